#pragma once

#include <array>
#include <cstdint>

namespace dualkd::diff {

// Philox4x32-10 (Salmon et al., SC'11): a counter-based generator. Block i of
// stream s under key k is philox(counter = {lo32(i), hi32(i), lo32(s),
// hi32(s)}, key = {lo32(k), hi32(k)}); each block yields four 32-bit words
// consumed in order. Any implementation of that mapping reproduces every
// mask and initialization bit-for-bit.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t block = 0;  // index of the next block to generate
  std::uint32_t offset = 4;  // words already consumed from `buffer`
  std::array<std::uint32_t, 4> buffer{};

  bool operator==(const RngState&) const = default;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);
  explicit Rng(const RngState& state) : state_(state) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // 53-bit uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller without caching the second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  // Independent generator on a derived stream; does not advance this one.
  Rng fork(std::uint64_t stream_tag) const;

  const RngState& state() const { return state_; }

 private:
  RngState state_;
};

}  // namespace dualkd::diff
