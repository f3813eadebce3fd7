#include "cvqkd/session.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace cvqkd::protocol {

namespace {

template <class Body>
void for_each_block(std::uint64_t blocks, unsigned threads, Body body) {
  threads = std::max(1u, threads);
  if (threads == 1 || blocks <= 1) {
    for (std::uint64_t b = 0; b < blocks; ++b) body(b);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t b = next++; b < blocks; b = next++) body(b);
  };
  std::vector<std::jthread> pool;
  const auto n = static_cast<unsigned>(std::min<std::uint64_t>(threads, blocks));
  pool.reserve(n);
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
}

}  // namespace

std::vector<PulseRecord> generate_records(std::uint64_t slots, unsigned threads,
                                          const SlotGenerator& generator) {
  std::vector<PulseRecord> records(slots);
  const std::uint64_t blocks = (slots + kReductionBlock - 1) / kReductionBlock;
  for_each_block(blocks, threads, [&](std::uint64_t b) {
    const std::uint64_t end = std::min(slots, (b + 1) * kReductionBlock);
    for (std::uint64_t k = b * kReductionBlock; k < end; ++k) records[k] = generator(k);
  });
  return records;
}

SessionStatistics accumulate_statistics(std::uint64_t slots, unsigned threads,
                                        const SlotGenerator& generator) {
  const std::uint64_t blocks = (slots + kReductionBlock - 1) / kReductionBlock;
  std::vector<SessionStatistics> partial(blocks);
  for_each_block(blocks, threads, [&](std::uint64_t b) {
    const std::uint64_t end = std::min(slots, (b + 1) * kReductionBlock);
    auto& acc = partial[b];
    for (std::uint64_t k = b * kReductionBlock; k < end; ++k) acc.add(generator(k));
  });
  SessionStatistics total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

std::vector<PulseRecord> run_honest_session(const SystemParams& params, std::uint64_t slots,
                                            std::uint64_t master_seed, unsigned threads) {
  params.validate();
  return generate_records(slots, threads, [&](std::uint64_t k) {
    return honest_slot(params, master_seed, k);
  });
}

SessionStatistics honest_statistics(const SystemParams& params, std::uint64_t slots,
                                    std::uint64_t master_seed, unsigned threads) {
  params.validate();
  return accumulate_statistics(slots, threads, [&](std::uint64_t k) {
    return honest_slot(params, master_seed, k);
  });
}

}  // namespace cvqkd::protocol
