#include "staircase/rng.hpp"

#include "staircase/normal.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace staircase {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key0_(static_cast<std::uint32_t>(seed)),
      key1_(static_cast<std::uint32_t>(seed >> 32)),
      stream_(stream) {}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t counter) const {
  std::array<std::uint32_t, 4> c = {
      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  std::uint32_t k0 = key0_;
  std::uint32_t k1 = key1_;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return c;
}

std::uint64_t CounterRng::next_u64() {
  if (buffer_pos_ >= 4) {
    buffer_ = block(counter_++);
    buffer_pos_ = 0;
  }
  std::uint64_t lo = buffer_[buffer_pos_];
  std::uint64_t hi = buffer_[buffer_pos_ + 1];
  buffer_pos_ += 2;
  return (hi << 32) | lo;
}

double CounterRng::next_double() {
  // 53 random bits, offset by half an ulp so the value never hits 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::next_gaussian() { return normal_quantile(next_double()); }

GaussianSampler::GaussianSampler(const Vector& mean, const Matrix& cov) : mean_(mean) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ConfigError("GaussianSampler: covariance shape does not match the mean");
  }
  if (!cov.allFinite() || !mean.allFinite()) {
    throw ConfigError("GaussianSampler: non-finite parameters");
  }
  Matrix sym = 0.5 * (cov + cov.transpose());
  if ((cov - sym).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + sym.cwiseAbs().maxCoeff())) {
    throw ConfigError("GaussianSampler: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw ConfigError("GaussianSampler: eigendecomposition of covariance failed");
  }
  Vector vals = es.eigenvalues();
  double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
  if (vals.minCoeff() < -1e-10 * scale) {
    throw ConfigError("GaussianSampler: covariance is not positive semidefinite");
  }
  transform_ = es.eigenvectors() * vals.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vector GaussianSampler::draw(CounterRng& rng) const {
  Vector z(mean_.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.next_gaussian();
  return mean_ + transform_ * z;
}

}  // namespace staircase
