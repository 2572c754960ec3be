#pragma once

#include "staircase/types.hpp"

#include <string>

namespace staircase {

/// A panel in four-block form: N1 always-control rows, N2 rows treated from
/// column T1 onward. Blocks a (N1 x T1), b (N1 x T2) and c (N2 x T1) are
/// observed; the bottom-right N2 x T2 block is not.
struct FourBlockProblem {
  Matrix Y_a;
  Matrix Y_b;
  Matrix Y_c;

  Index n1() const { return Y_a.rows(); }
  Index t1() const { return Y_a.cols(); }
  Index n2() const { return Y_c.rows(); }
  Index t2() const { return Y_b.cols(); }
  Index n() const { return n1() + n2(); }
  Index t() const { return t1() + t2(); }
};

/// Throws DataError unless the three blocks are finite with consistent,
/// strictly positive dimensions.
void validate(const FourBlockProblem& p);

/// Output of the four-block estimator.
///
/// U_hat is the left factor of the rank-r SVD of [Y_a; Y_c], V_hat the right
/// factor of the rank-r SVD of [Y_a, Y_b]. row_projection and col_projection
/// cache U2 (U1'U1)^-1 U1' and V2 (V1'V1)^-1 V1'; they define the imputation
/// M_hat_d = row_projection * M_hat_b and every variance estimate below.
/// Immutable after construction and safe to share across threads.
struct FourBlockFit {
  Matrix M_hat_d;             // N2 x T2 imputed block
  Matrix M_hat_b;             // N1 x T2 denoised block b
  Matrix U_hat;               // N x r
  Matrix V_hat;               // T x r
  Matrix left_reconstruction; // N x T1 rank-r reconstruction of [Y_a; Y_c]
  Matrix row_projection;      // N2 x N1
  Matrix col_projection;      // T2 x T1
  Vector left_singular_values;
  Vector upper_singular_values;
  int rank = 0;
  Index n1 = 0;
  Index t1 = 0;

  Index n2() const { return U_hat.rows() - n1; }
  Index t2() const { return V_hat.rows() - t1; }
};

/// Residuals over the observed region. Blocks a and c are measured against
/// the left reconstruction, block b against M_hat_b; the treated block has
/// no residual.
struct ResidualMatrix {
  Matrix E_a;  // N1 x T1
  Matrix E_b;  // N1 x T2
  Matrix E_c;  // N2 x T1
};

/// Point estimate with variance and a two-sided normal interval.
struct CellInference {
  double point = 0.0;
  double variance = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
};

/// Rank-r estimate of the unobserved block.
///
/// Computes the rank-r SVDs of the left submatrix [Y_a; Y_c] and the upper
/// submatrix [Y_a, Y_b], denoises block b as U_up Sigma_up V2', and imputes
/// M_hat_d = U2 (U1'U1)^-1 U1' M_hat_b.
///
/// Requires rank <= min(N1, T1); the Gram matrices U1'U1 and V1'V1 must be
/// positive definite with condition number at most 1e12, otherwise a
/// NumericError identifies the offending factor.
FourBlockFit four_block_estimate(const FourBlockProblem& p, int rank);

/// Observed-region residuals for a fit produced from p.
ResidualMatrix estimate_residuals(const FourBlockProblem& p, const FourBlockFit& fit);

/// Variance estimate for the imputed entry (i, t), 0-based with
/// i in [N1, N) and t in [T1, T):
///   sum_k E_b(k,t)^2 * row_projection(i-N1,k)^2
/// + sum_s E_c(i-N1,s)^2 * col_projection(t-T1,s)^2.
/// Throws std::domain_error when (i, t) indexes the observed region.
double cell_variance(const FourBlockFit& fit, const ResidualMatrix& res, Index i, Index t);

/// Two-sided interval point +/- z_{1-alpha/2} * sqrt(variance).
CellInference cell_ci(double point, double variance, double alpha);

/// c1' * M_hat_d * c2.
double bilinear_point(const FourBlockFit& fit, const Vector& c1, const Vector& c2);

/// Variance estimate for the bilinear form c1' M_d c2, summing squared
/// residuals against the rank-1 weight patterns induced by (c1, c2) on
/// blocks b and c. Reduces exactly to cell_variance for canonical vectors.
double bilinear_variance(const FourBlockFit& fit, const ResidualMatrix& res,
                         const Vector& c1, const Vector& c2);

/// Ground-truth asymptotic variance of the imputation error at (i, t), from
/// the true factors and per-entry noise deviations sigma (N x T). Intended
/// for simulations and tests where the truth is known.
double oracle_cell_variance(const Matrix& U_star, const Matrix& V_star, const Matrix& sigma,
                            Index n1, Index t1, Index i, Index t);

}  // namespace staircase
