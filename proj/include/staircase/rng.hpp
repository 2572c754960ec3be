#pragma once

#include "staircase/types.hpp"

#include <array>
#include <cstdint>

namespace staircase {

/// Counter-based pseudo-random generator (Philox4x32-10). A generator is
/// addressed by (seed, stream); distinct streams are statistically
/// independent, which lets every simulation replication own stream `rep`
/// without coordination. Output is identical across platforms.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform draw strictly inside (0, 1).
  double next_double();

  /// Standard normal draw via the inverse CDF, so the value depends only on
  /// the uniform stream (no rejection loops).
  double next_gaussian();

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t counter) const;

  std::uint32_t key0_;
  std::uint32_t key1_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;
};

/// Draws from N(mean, cov). The covariance must be symmetric PSD up to a
/// -1e-10 tolerance on its eigenvalues (small negatives are clamped to zero);
/// otherwise throws ConfigError.
class GaussianSampler {
 public:
  GaussianSampler(const Vector& mean, const Matrix& cov);

  Vector draw(CounterRng& rng) const;

  Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Matrix transform_;  // Q * sqrt(Lambda)
};

}  // namespace staircase
