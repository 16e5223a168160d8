#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace specsense {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
///
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits with no
/// internal state, so any block of any stream can be produced independently.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

/// One reproducible random stream, addressed by
/// (master_seed, experiment_id, trial_index).
///
/// Distinct addresses yield statistically independent streams; the output of
/// a stream depends only on its address, never on how many other streams were
/// drawn before it or on which thread draws it. Satisfies
/// UniformRandomBitGenerator.
class Substream {
 public:
  using result_type = std::uint32_t;

  Substream(std::uint64_t master_seed, std::uint64_t experiment_id,
            std::uint64_t trial_index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal variate (Box-Muller, both outputs used).
  double normal();

 private:
  Philox4x32::Key key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer, used to derive keys and child seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace specsense
