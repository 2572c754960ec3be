#include "staircase/fourblock.hpp"

#include "staircase/lowrank.hpp"
#include "staircase/normal.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace staircase {

namespace {

constexpr double kMaxGramCondition = 1e12;

// Solves G X = B for a small symmetric Gram matrix, rejecting
// ill-conditioned systems instead of falling back to a pseudo-inverse.
Matrix gram_solve(const Matrix& gram, const Matrix& rhs, const char* which) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success) {
    throw NumericError(std::string("four-block: eigendecomposition of ") + which + " failed");
  }
  const Vector& vals = es.eigenvalues();
  const double lo = vals.minCoeff();
  const double hi = vals.maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
    throw NumericError(std::string("four-block: ") + which +
                       " is singular or ill-conditioned (condition number " +
                       (lo > 0.0 ? std::to_string(hi / lo) : std::string("inf")) +
                       " exceeds 1e12)");
  }
  return es.eigenvectors() * vals.cwiseInverse().asDiagonal() *
         (es.eigenvectors().transpose() * rhs);
}

void check_unobserved_index(const FourBlockFit& fit, Index i, Index t, const char* who) {
  if (i < fit.n1 || i >= fit.n1 + fit.n2() || t < fit.t1 || t >= fit.t1 + fit.t2()) {
    throw std::domain_error(std::string(who) + ": (" + std::to_string(i) + ", " +
                            std::to_string(t) + ") does not index the unobserved block");
  }
}

}  // namespace

void validate(const FourBlockProblem& p) {
  if (p.Y_a.rows() < 1 || p.Y_a.cols() < 1 || p.Y_c.rows() < 1 || p.Y_b.cols() < 1) {
    throw DataError("four-block: every block dimension must be positive");
  }
  if (p.Y_b.rows() != p.Y_a.rows()) {
    throw DataError("four-block: Y_a and Y_b disagree on the number of control rows");
  }
  if (p.Y_c.cols() != p.Y_a.cols()) {
    throw DataError("four-block: Y_a and Y_c disagree on the number of pre-treatment columns");
  }
  if (!p.Y_a.allFinite() || !p.Y_b.allFinite() || !p.Y_c.allFinite()) {
    throw DataError("four-block: observed blocks contain non-finite entries");
  }
}

FourBlockFit four_block_estimate(const FourBlockProblem& p, int rank) {
  validate(p);
  const Index n1 = p.n1(), t1 = p.t1(), n2 = p.n2(), t2 = p.t2();
  if (rank < 1 || rank > std::min(n1, t1)) {
    throw NumericError("four-block: rank " + std::to_string(rank) +
                       " infeasible for N1=" + std::to_string(n1) +
                       ", T1=" + std::to_string(t1));
  }

  Matrix left(n1 + n2, t1);
  left << p.Y_a, p.Y_c;
  Matrix upper(n1, t1 + t2);
  upper << p.Y_a, p.Y_b;

  TruncatedSvd svd_left = truncated_svd(left, rank);
  TruncatedSvd svd_upper = truncated_svd(upper, rank);

  FourBlockFit fit;
  fit.rank = rank;
  fit.n1 = n1;
  fit.t1 = t1;
  fit.U_hat = svd_left.U;
  fit.V_hat = svd_upper.V;
  fit.left_singular_values = svd_left.S;
  fit.upper_singular_values = svd_upper.S;
  fit.left_reconstruction = svd_left.reconstruction();

  const auto U1 = fit.U_hat.topRows(n1);
  const auto U2 = fit.U_hat.bottomRows(n2);
  const auto V1 = fit.V_hat.topRows(t1);
  const auto V2 = fit.V_hat.bottomRows(t2);

  fit.M_hat_b = svd_upper.U * svd_upper.S.asDiagonal() * V2.transpose();
  fit.row_projection = U2 * gram_solve(U1.transpose() * U1, U1.transpose(), "U1'U1");
  fit.col_projection = V2 * gram_solve(V1.transpose() * V1, V1.transpose(), "V1'V1");
  fit.M_hat_d = fit.row_projection * fit.M_hat_b;
  return fit;
}

ResidualMatrix estimate_residuals(const FourBlockProblem& p, const FourBlockFit& fit) {
  validate(p);
  if (fit.n1 != p.n1() || fit.t1 != p.t1() || fit.n2() != p.n2() || fit.t2() != p.t2()) {
    throw std::invalid_argument("estimate_residuals: fit dimensions do not match the problem");
  }
  ResidualMatrix res;
  res.E_a = p.Y_a - fit.left_reconstruction.topRows(p.n1());
  res.E_c = p.Y_c - fit.left_reconstruction.bottomRows(p.n2());
  res.E_b = p.Y_b - fit.M_hat_b;
  return res;
}

double cell_variance(const FourBlockFit& fit, const ResidualMatrix& res, Index i, Index t) {
  check_unobserved_index(fit, i, t, "cell_variance");
  if (res.E_b.rows() != fit.n1 || res.E_b.cols() != fit.t2() ||
      res.E_c.rows() != fit.n2() || res.E_c.cols() != fit.t1) {
    throw std::invalid_argument("cell_variance: residual dimensions do not match the fit");
  }
  const Index di = i - fit.n1;
  const Index dt = t - fit.t1;
  double row_part = 0.0;
  for (Index k = 0; k < fit.n1; ++k) {
    const double w = fit.row_projection(di, k);
    const double e = res.E_b(k, dt);
    row_part += e * e * w * w;
  }
  double col_part = 0.0;
  for (Index s = 0; s < fit.t1; ++s) {
    const double w = fit.col_projection(dt, s);
    const double e = res.E_c(di, s);
    col_part += e * e * w * w;
  }
  return row_part + col_part;
}

CellInference cell_ci(double point, double variance, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("cell_ci: alpha must lie strictly inside (0, 1)");
  }
  if (!(variance >= 0.0)) {
    throw std::invalid_argument("cell_ci: variance must be nonnegative");
  }
  const double half_width = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(variance);
  CellInference ci;
  ci.point = point;
  ci.variance = variance;
  ci.lower = point - half_width;
  ci.upper = point + half_width;
  ci.alpha = alpha;
  return ci;
}

double bilinear_point(const FourBlockFit& fit, const Vector& c1, const Vector& c2) {
  if (c1.size() != fit.n2() || c2.size() != fit.t2()) {
    throw std::invalid_argument("bilinear_point: weight vectors do not match the hidden block");
  }
  return c1.dot(fit.M_hat_d * c2);
}

double bilinear_variance(const FourBlockFit& fit, const ResidualMatrix& res,
                         const Vector& c1, const Vector& c2) {
  if (c1.size() != fit.n2() || c2.size() != fit.t2()) {
    throw std::invalid_argument("bilinear_variance: weight vectors do not match the hidden block");
  }
  if (res.E_b.rows() != fit.n1 || res.E_b.cols() != fit.t2() ||
      res.E_c.rows() != fit.n2() || res.E_c.cols() != fit.t1) {
    throw std::invalid_argument("bilinear_variance: residual dimensions do not match the fit");
  }
  // [U1 (U1'U1)^-1 U2' c1 c2']_{k,t} = (row_projection' c1)_k * c2_t, and
  // symmetrically on the column side, so both double sums collapse to
  // weighted residual sums.
  const Vector g = fit.row_projection.transpose() * c1;  // N1
  const Vector h = fit.col_projection.transpose() * c2;  // T1
  double b_part = 0.0;
  for (Index t = 0; t < fit.t2(); ++t) {
    for (Index k = 0; k < fit.n1; ++k) {
      const double w = g[k] * c2[t];
      const double e = res.E_b(k, t);
      b_part += e * e * w * w;
    }
  }
  double c_part = 0.0;
  for (Index i = 0; i < fit.n2(); ++i) {
    for (Index s = 0; s < fit.t1; ++s) {
      const double w = c1[i] * h[s];
      const double e = res.E_c(i, s);
      c_part += e * e * w * w;
    }
  }
  return b_part + c_part;
}

double oracle_cell_variance(const Matrix& U_star, const Matrix& V_star, const Matrix& sigma,
                            Index n1, Index t1, Index i, Index t) {
  const Index n = U_star.rows();
  const Index tt = V_star.rows();
  if (n1 < 1 || n1 >= n || t1 < 1 || t1 >= tt) {
    throw std::invalid_argument("oracle_cell_variance: split outside the factor dimensions");
  }
  if (sigma.rows() != n || sigma.cols() != tt) {
    throw std::invalid_argument("oracle_cell_variance: sigma must be N x T");
  }
  if ((sigma.array() < 0.0).any()) {
    throw std::invalid_argument("oracle_cell_variance: sigma must be nonnegative");
  }
  if (i < n1 || i >= n || t < t1 || t >= tt) {
    throw std::domain_error("oracle_cell_variance: (i, t) does not index the unobserved block");
  }

  const auto U1 = U_star.topRows(n1);
  const auto V1 = V_star.topRows(t1);
  const Vector u_weights =
      gram_solve(U1.transpose() * U1, U1.transpose(), "U1*'U1*").transpose() *
      U_star.row(i).transpose();
  const Vector v_weights =
      gram_solve(V1.transpose() * V1, V1.transpose(), "V1*'V1*").transpose() *
      V_star.row(t).transpose();

  double row_part = 0.0;
  for (Index k = 0; k < n1; ++k) {
    const double s = sigma(k, t);
    row_part += s * s * u_weights[k] * u_weights[k];
  }
  double col_part = 0.0;
  for (Index s = 0; s < t1; ++s) {
    const double sd = sigma(i, s);
    col_part += sd * sd * v_weights[s] * v_weights[s];
  }
  return row_part + col_part;
}

}  // namespace staircase
