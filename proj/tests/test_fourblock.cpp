#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "staircase/fourblock.hpp"
#include "staircase/lowrank.hpp"
#include "staircase/normal.hpp"
#include "staircase/rng.hpp"
#include "support/reference.hpp"

#include <cmath>
#include <string>

using namespace staircase;

namespace {

Matrix gaussian_matrix(Index n, Index m, CounterRng& rng) {
  Matrix A(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) A(i, j) = rng.next_gaussian();
  return A;
}

struct Instance {
  FourBlockProblem problem;
  Matrix M_star;  // full N x T truth
};

Instance seeded_instance(Index n, Index t, Index n1, Index t1, int rank, double noise_sd,
                         std::uint64_t seed) {
  CounterRng rng(seed);
  const Matrix A = gaussian_matrix(n, rank, rng);
  const Matrix B = gaussian_matrix(t, rank, rng);
  Instance inst;
  inst.M_star = A * B.transpose();
  Matrix Y = inst.M_star;
  if (noise_sd > 0.0) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < t; ++j) Y(i, j) += noise_sd * rng.next_gaussian();
  }
  inst.problem.Y_a = Y.topLeftCorner(n1, t1);
  inst.problem.Y_b = Y.topRightCorner(n1, t - t1);
  inst.problem.Y_c = Y.bottomLeftCorner(n - n1, t1);
  return inst;
}

double max_abs(const Matrix& M) { return M.cwiseAbs().maxCoeff(); }

// Orthonormal columns from a seeded Gaussian draw.
Matrix orthonormal(Index n, Index r, std::uint64_t seed) {
  CounterRng rng(seed);
  const Matrix A = gaussian_matrix(n, r, rng);
  return Eigen::HouseholderQR<Matrix>(A).householderQ() * Matrix::Identity(n, r);
}

}  // namespace

TEST_CASE("noiseless rank-1 constant panel is recovered exactly") {
  FourBlockProblem p;
  p.Y_a = Matrix::Ones(2, 2);
  p.Y_b = Matrix::Ones(2, 2);
  p.Y_c = Matrix::Ones(2, 2);
  const FourBlockFit fit = four_block_estimate(p, 1);
  CHECK(max_abs(fit.M_hat_d - Matrix::Ones(2, 2)) < 1e-10);
}

TEST_CASE("noiseless rank-2 truth is recovered exactly") {
  Vector u(4), w(4), v(3), z(3);
  u << 1, 2, 3, 4;
  w << 1, 0, -1, 2;
  v << 1, 1, 1;
  z << 0, 1, 2;
  const Matrix M = u * v.transpose() + w * z.transpose();
  FourBlockProblem p;
  p.Y_a = M.topLeftCorner(2, 2);
  p.Y_b = M.topRightCorner(2, 1);
  p.Y_c = M.bottomLeftCorner(2, 2);
  const FourBlockFit fit = four_block_estimate(p, 2);
  CHECK(max_abs(fit.M_hat_d - M.bottomRightCorner(2, 1)) < 1e-10);
}

TEST_CASE("noiseless exactness across random ranks and shapes") {
  for (int r : {1, 2, 3}) {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const Instance inst = seeded_instance(14 + r, 11 + r, 7, 6, r, 0.0, seed + r * 100);
      const FourBlockFit fit = four_block_estimate(inst.problem, r);
      const Matrix truth = inst.M_star.bottomRightCorner(inst.problem.n2(), inst.problem.t2());
      CHECK(max_abs(fit.M_hat_d - truth) <= 1e-9 * max_abs(inst.M_star));
    }
  }
}

TEST_CASE("noisy seeded fit matches the step-by-step reference") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Instance inst = seeded_instance(40, 30, 20, 20, 2, 0.1, seed);
    const FourBlockProblem& p = inst.problem;
    const FourBlockFit fit = four_block_estimate(p, 2);
    const reference::FourBlock ref = reference::four_block(p.Y_a, p.Y_b, p.Y_c, 2);

    CHECK(max_abs(fit.M_hat_d - ref.M_d) < 1e-8);
    CHECK(max_abs(fit.M_hat_b - ref.M_b) < 1e-8);
    CHECK(max_abs(fit.left_reconstruction - ref.left_recon) < 1e-8);

    const ResidualMatrix res = estimate_residuals(p, fit);
    CHECK(max_abs(res.E_a - ref.E_a) < 1e-8);
    CHECK(max_abs(res.E_b - ref.E_b) < 1e-8);
    CHECK(max_abs(res.E_c - ref.E_c) < 1e-8);

    for (Index i = p.n1(); i < p.n(); i += 7) {
      for (Index t = p.t1(); t < p.t(); t += 5) {
        const double lib = cell_variance(fit, res, i, t);
        const double ref_v = reference::cell_variance(ref.U_hat, ref.V_hat, ref.E_b, ref.E_c,
                                                      p.n1(), p.t1(), i, t);
        CHECK(std::abs(lib - ref_v) < 1e-8);
      }
    }
  }
}

TEST_CASE("noiseless inputs leave zero residuals and zero variances") {
  const Instance inst = seeded_instance(12, 10, 6, 5, 2, 0.0, 77);
  const FourBlockFit fit = four_block_estimate(inst.problem, 2);
  const ResidualMatrix res = estimate_residuals(inst.problem, fit);
  CHECK(max_abs(res.E_a) < 1e-10);
  CHECK(max_abs(res.E_b) < 1e-10);
  CHECK(max_abs(res.E_c) < 1e-10);
  for (Index i = 6; i < 12; ++i)
    for (Index t = 5; t < 10; ++t) CHECK(cell_variance(fit, res, i, t) < 1e-20);
}

TEST_CASE("doubling the panel doubles the fit and quadruples the variance") {
  const Instance inst = seeded_instance(16, 12, 8, 6, 2, 0.2, 5);
  FourBlockProblem scaled;
  scaled.Y_a = 2.0 * inst.problem.Y_a;
  scaled.Y_b = 2.0 * inst.problem.Y_b;
  scaled.Y_c = 2.0 * inst.problem.Y_c;

  const FourBlockFit fit = four_block_estimate(inst.problem, 2);
  const FourBlockFit fit2 = four_block_estimate(scaled, 2);
  const ResidualMatrix res = estimate_residuals(inst.problem, fit);
  const ResidualMatrix res2 = estimate_residuals(scaled, fit2);

  // Scaling by a power of two is exact in binary floating point.
  CHECK((fit2.M_hat_d.array() == (2.0 * fit.M_hat_d).array()).all());
  CHECK((res2.E_b.array() == (2.0 * res.E_b).array()).all());
  CHECK((res2.E_c.array() == (2.0 * res.E_c).array()).all());
  for (Index i = 8; i < 16; i += 3) {
    for (Index t = 6; t < 12; t += 2) {
      CHECK(cell_variance(fit2, res2, i, t) == 4.0 * cell_variance(fit, res, i, t));
    }
  }
}

TEST_CASE("fit is deterministic") {
  const Instance inst = seeded_instance(20, 15, 10, 8, 3, 0.3, 9);
  const FourBlockFit a = four_block_estimate(inst.problem, 3);
  const FourBlockFit b = four_block_estimate(inst.problem, 3);
  CHECK((a.M_hat_d.array() == b.M_hat_d.array()).all());
  CHECK((a.U_hat.array() == b.U_hat.array()).all());
  CHECK((a.V_hat.array() == b.V_hat.array()).all());
}

TEST_CASE("variance formula matches a literal double loop on a hand-built fit") {
  // Fixed small factors and residuals, projections recomputed in test code.
  const Matrix U = orthonormal(5, 2, 21);
  const Matrix V = orthonormal(6, 2, 22);
  CounterRng rng(23);
  const Matrix Eb = gaussian_matrix(3, 3, rng);
  const Matrix Ec = gaussian_matrix(2, 3, rng);

  FourBlockFit fit;
  fit.rank = 2;
  fit.n1 = 3;
  fit.t1 = 3;
  fit.U_hat = U;
  fit.V_hat = V;
  const Matrix U1 = U.topRows(3), U2 = U.bottomRows(2);
  const Matrix V1 = V.topRows(3), V2 = V.bottomRows(3);
  fit.row_projection = U2 * (U1.transpose() * U1).inverse() * U1.transpose();
  fit.col_projection = V2 * (V1.transpose() * V1).inverse() * V1.transpose();
  fit.M_hat_b = Matrix::Zero(3, 3);
  fit.M_hat_d = Matrix::Zero(2, 3);
  fit.left_reconstruction = Matrix::Zero(5, 3);

  ResidualMatrix res;
  res.E_a = Matrix::Zero(3, 3);
  res.E_b = Eb;
  res.E_c = Ec;

  for (Index i = 3; i < 5; ++i) {
    for (Index t = 3; t < 6; ++t) {
      const double lib = cell_variance(fit, res, i, t);
      const double ref = reference::cell_variance(U, V, Eb, Ec, 3, 3, i, t);
      CHECK(std::abs(lib - ref) < 1e-12);
      CHECK(lib >= 0.0);
    }
  }
}

TEST_CASE("interval construction") {
  const CellInference ci = cell_ci(0.0, 1.0, 0.05);
  CHECK(std::abs(ci.lower + 1.95996) < 1e-4);
  CHECK(std::abs(ci.upper - 1.95996) < 1e-4);

  const CellInference degenerate = cell_ci(2.5, 0.0, 0.05);
  CHECK(degenerate.lower == 2.5);
  CHECK(degenerate.upper == 2.5);

  const CellInference tight = cell_ci(0.0, 1.0, 0.9999);
  CHECK(tight.upper - tight.lower < ci.upper - ci.lower);
  CHECK(tight.upper - tight.lower < 1e-3);

  CHECK_THROWS_AS(cell_ci(0.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(cell_ci(0.0, 1.0, 1.0), ConfigError);
}

TEST_CASE("bilinear point evaluates the weighted block") {
  const Instance inst = seeded_instance(14, 12, 7, 6, 2, 0.1, 31);
  const FourBlockFit fit = four_block_estimate(inst.problem, 2);
  const Index n2 = fit.n2(), t2 = fit.t2();

  Vector e2 = Vector::Zero(n2), e4 = Vector::Zero(t2);
  e2[2] = 1.0;
  e4[4] = 1.0;
  CHECK(bilinear_point(fit, e2, e4) == fit.M_hat_d(2, 4));
  CHECK(bilinear_point(fit, Vector::Zero(n2), e4) == 0.0);

  const Vector avg = Vector::Constant(n2, 1.0 / double(n2));
  double direct = 0.0;
  for (Index i = 0; i < n2; ++i) direct += fit.M_hat_d(i, 4);
  direct /= double(n2);
  CHECK(std::abs(bilinear_point(fit, avg, e4) - direct) < 1e-12);
}

TEST_CASE("bilinear variance: canonical vectors collapse to the cell variance") {
  const Instance inst = seeded_instance(12, 11, 6, 5, 2, 0.2, 41);
  const FourBlockFit fit = four_block_estimate(inst.problem, 2);
  const ResidualMatrix res = estimate_residuals(inst.problem, fit);
  for (Index i = 6; i < 12; ++i) {
    for (Index t = 5; t < 11; ++t) {
      Vector c1 = Vector::Zero(fit.n2()), c2 = Vector::Zero(fit.t2());
      c1[i - 6] = 1.0;
      c2[t - 5] = 1.0;
      CHECK(std::abs(bilinear_variance(fit, res, c1, c2) - cell_variance(fit, res, i, t)) <
            1e-12);
    }
  }
}

TEST_CASE("bilinear variance matches the literal loop oracle") {
  const Instance inst = seeded_instance(13, 10, 7, 5, 2, 0.15, 51);
  const FourBlockFit fit = four_block_estimate(inst.problem, 2);
  const ResidualMatrix res = estimate_residuals(inst.problem, fit);

  const Vector ones1 = Vector::Ones(fit.n2());
  const Vector ones2 = Vector::Ones(fit.t2());
  const double lib = bilinear_variance(fit, res, ones1, ones2);
  const double ref = reference::bilinear_variance(fit.U_hat, fit.V_hat, res.E_b, res.E_c,
                                                  7, 5, ones1, ones2);
  CHECK(std::abs(lib - ref) < 1e-10);

  CounterRng rng(52);
  Vector c1(fit.n2()), c2(fit.t2());
  for (Index i = 0; i < c1.size(); ++i) c1[i] = rng.next_gaussian();
  for (Index i = 0; i < c2.size(); ++i) c2[i] = rng.next_gaussian();
  CHECK(std::abs(bilinear_variance(fit, res, c1, c2) -
                 reference::bilinear_variance(fit.U_hat, fit.V_hat, res.E_b, res.E_c, 7, 5,
                                              c1, c2)) < 1e-10);

  const Instance clean = seeded_instance(12, 10, 6, 5, 2, 0.0, 53);
  const FourBlockFit cfit = four_block_estimate(clean.problem, 2);
  const ResidualMatrix cres = estimate_residuals(clean.problem, cfit);
  CHECK(bilinear_variance(cfit, cres, Vector::Ones(cfit.n2()), Vector::Ones(cfit.t2())) <
        1e-18);
}

TEST_CASE("downstream quantities do not depend on the factor basis") {
  // Left matrix with an exactly repeated singular value: the two backends
  // pick different bases inside the degenerate block, yet block b, the
  // imputed block and the variances must agree.
  const Matrix U0 = orthonormal(8, 3, 61);
  const Matrix V0 = orthonormal(4, 3, 62);
  Vector S0(3);
  S0 << 3.0, 3.0, 1.0;
  const Matrix left = U0 * S0.asDiagonal() * V0.transpose();
  CounterRng rng(63);

  FourBlockProblem p;
  p.Y_a = left.topRows(5);
  p.Y_c = left.bottomRows(3);
  p.Y_b = gaussian_matrix(5, 3, rng);

  const FourBlockFit fit = four_block_estimate(p, 3);
  CHECK(std::abs(fit.left_singular_values[0] - fit.left_singular_values[1]) < 1e-12);

  const reference::FourBlock ref = reference::four_block(p.Y_a, p.Y_b, p.Y_c, 3);
  CHECK(max_abs(fit.M_hat_d - ref.M_d) < 1e-9);
  CHECK(max_abs(fit.M_hat_b - ref.M_b) < 1e-9);

  const ResidualMatrix res = estimate_residuals(p, fit);
  for (Index i = 5; i < 8; ++i) {
    for (Index t = 4; t < 7; ++t) {
      const double lib = cell_variance(fit, res, i, t);
      const double ref_v =
          reference::cell_variance(ref.U_hat, ref.V_hat, ref.E_b, ref.E_c, 5, 4, i, t);
      CHECK(std::abs(lib - ref_v) < 1e-9 * (1.0 + std::abs(lib)));
    }
  }

  // Explicit remix: the variance is invariant under any orthogonal mixing of
  // either factor, so rotated factors must reproduce it.
  const double c = std::cos(0.7), s = std::sin(0.7);
  Matrix W = Matrix::Identity(3, 3);
  W(0, 0) = c;
  W(0, 1) = -s;
  W(1, 0) = s;
  W(1, 1) = c;
  const Matrix U_mixed = fit.U_hat * W;
  const Matrix V_mixed = fit.V_hat * W;
  for (Index i = 5; i < 8; ++i) {
    for (Index t = 4; t < 7; ++t) {
      const double lib = cell_variance(fit, res, i, t);
      const double mixed =
          reference::cell_variance(U_mixed, V_mixed, res.E_b, res.E_c, 5, 4, i, t);
      CHECK(std::abs(lib - mixed) < 1e-9 * (1.0 + std::abs(lib)));
    }
  }
}

TEST_CASE("oracle variance: zero noise and constant factors") {
  const Matrix U = Matrix::Constant(10, 1, 1.0 / std::sqrt(10.0));
  const Matrix V = Matrix::Constant(8, 1, 1.0 / std::sqrt(8.0));

  CHECK(oracle_cell_variance(U, V, Matrix::Zero(10, 8), 4, 3, 5, 4) == 0.0);

  // Constant rank-1 factors: gamma* = sigma^2 (1/N1 + 1/T1), and the literal
  // loop oracle agrees.
  const double sigma0 = 0.7;
  const Matrix sigma = Matrix::Constant(10, 8, sigma0);
  const double expected = sigma0 * sigma0 * (1.0 / 4.0 + 1.0 / 3.0);
  const double got = oracle_cell_variance(U, V, sigma, 4, 3, 5, 4);
  CHECK(std::abs(got - expected) < 1e-12);
  CHECK(std::abs(reference::oracle_cell_variance(U, V, sigma, 4, 3, 5, 4) - got) < 1e-12);
}

TEST_CASE("oracle variance matches the Monte-Carlo variance of the error field") {
  // Simulate the linearized imputation error directly from its definition
  // and compare its empirical variance with the oracle value.
  const Index n = 12, t = 10, n1 = 6, t1 = 5;
  CounterRng factor_rng(71);
  const Matrix A = gaussian_matrix(n, 2, factor_rng);
  const Matrix B = gaussian_matrix(t, 2, factor_rng);
  const TruncatedSvd truth = truncated_svd(A * B.transpose(), 2);
  const Matrix U = truth.U, V = truth.V;
  const double sigma0 = 0.3;

  const Matrix U1 = U.topRows(n1), U2 = U.bottomRows(n - n1);
  const Matrix V1 = V.topRows(t1), V2 = V.bottomRows(t - t1);
  const Matrix P_u = U2 * (U1.transpose() * U1).inverse() * U1.transpose();
  const Matrix P_v = V1 * (V1.transpose() * V1).inverse() * V2.transpose();

  const int draws = 100000;
  CounterRng rng(72);
  Matrix sum = Matrix::Zero(n - n1, t - t1);
  Matrix sum_sq = Matrix::Zero(n - n1, t - t1);
  Matrix Eb(n1, t - t1), Ec(n - n1, t1);
  for (int d = 0; d < draws; ++d) {
    for (Index i = 0; i < Eb.rows(); ++i)
      for (Index j = 0; j < Eb.cols(); ++j) Eb(i, j) = sigma0 * rng.next_gaussian();
    for (Index i = 0; i < Ec.rows(); ++i)
      for (Index j = 0; j < Ec.cols(); ++j) Ec(i, j) = sigma0 * rng.next_gaussian();
    const Matrix Z = P_u * Eb + Ec * P_v;
    sum += Z;
    sum_sq += Z.cwiseProduct(Z);
  }

  const Matrix sigma = Matrix::Constant(n, t, sigma0);
  for (Index i = 0; i < n - n1; i += 2) {
    for (Index j = 0; j < t - t1; j += 2) {
      const double mean = sum(i, j) / draws;
      const double mc_var = sum_sq(i, j) / draws - mean * mean;
      const double oracle = oracle_cell_variance(U, V, sigma, n1, t1, n1 + i, t1 + j);
      CHECK(std::abs(mc_var - oracle) < 0.03 * oracle);
    }
  }
}

TEST_CASE("invalid inputs and indices are rejected") {
  const Instance inst = seeded_instance(10, 8, 5, 4, 2, 0.1, 81);
  CHECK_THROWS_AS(four_block_estimate(inst.problem, 5), NumericError);
  CHECK_THROWS_AS(four_block_estimate(inst.problem, 0), NumericError);

  FourBlockProblem bad = inst.problem;
  bad.Y_b(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(four_block_estimate(bad, 2), DataError);

  FourBlockProblem mismatched = inst.problem;
  mismatched.Y_c = Matrix::Zero(5, 3);
  CHECK_THROWS_AS(four_block_estimate(mismatched, 2), DataError);

  const FourBlockFit fit = four_block_estimate(inst.problem, 2);
  const ResidualMatrix res = estimate_residuals(inst.problem, fit);
  CHECK_THROWS_AS(cell_variance(fit, res, 2, 6), std::domain_error);
  CHECK_THROWS_AS(cell_variance(fit, res, 7, 2), std::domain_error);
  CHECK_THROWS_AS(bilinear_point(fit, Vector::Ones(3), Vector::Ones(4)),
                  std::invalid_argument);

  const Instance other = seeded_instance(12, 8, 6, 4, 2, 0.1, 82);
  CHECK_THROWS_AS(estimate_residuals(other.problem, fit), std::invalid_argument);
}

TEST_CASE("degenerate control rows trigger a conditioning error") {
  // Two identical control rows make U1'U1 numerically singular.
  FourBlockProblem p;
  p.Y_a.resize(2, 2);
  p.Y_a << 1, 2, 1, 2;
  p.Y_b.resize(2, 1);
  p.Y_b << 1, 1;
  p.Y_c.resize(2, 2);
  p.Y_c << 3, 1, 0, 5;
  try {
    four_block_estimate(p, 2);
    CHECK(false);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("U1'U1") != std::string::npos);
  }
}
