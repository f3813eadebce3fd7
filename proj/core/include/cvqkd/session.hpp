#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cvqkd/protocol.hpp"

namespace cvqkd::protocol {

/// Produces the record for one slot; must be a pure function of the slot index.
using SlotGenerator = std::function<PulseRecord(std::uint64_t slot)>;

/// Slots are reduced in fixed blocks of this size, merged in block order.
inline constexpr std::uint64_t kReductionBlock = 1u << 16;

/// All records in slot order. `threads` only affects wall time.
std::vector<PulseRecord> generate_records(std::uint64_t slots, unsigned threads,
                                          const SlotGenerator& generator);

/// Streaming reduction without materialising records. Bit-identical for any
/// thread count.
SessionStatistics accumulate_statistics(std::uint64_t slots, unsigned threads,
                                        const SlotGenerator& generator);

/// Honest session conveniences.
std::vector<PulseRecord> run_honest_session(const SystemParams& params, std::uint64_t slots,
                                            std::uint64_t master_seed, unsigned threads = 1);
SessionStatistics honest_statistics(const SystemParams& params, std::uint64_t slots,
                                    std::uint64_t master_seed, unsigned threads = 1);

}  // namespace cvqkd::protocol
