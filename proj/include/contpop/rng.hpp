#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace contpop {

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit key is the experiment seed and the upper half of the 128-bit
/// counter is a stream id, so (seed, stream) pairs never share output.
/// Satisfies UniformRandomBitGenerator.
class Philox {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;

  Philox(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open_closed();
  /// Exponential variate with the given rate.
  double exponential(double rate);

  /// Raw block function (exposed for known-answer tests).
  static Block block(Block counter, std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int used_ = 4;
};

}  // namespace contpop
