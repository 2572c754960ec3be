#pragma once

// Brute-force reference implementations used only by tests. Each one
// retraces the corresponding estimator definition step by step: a different
// SVD backend (one-sided Jacobi instead of divide-and-conquer), explicit
// matrix inverses, and literal summation loops. They share no code with the
// library paths they check. Downstream quantities are invariant to the
// factor signs, so no sign convention is applied here.

#include "staircase/types.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace reference {

using staircase::Index;
using staircase::Matrix;
using staircase::Vector;

struct Svd {
  Matrix U;
  Vector S;
  Matrix V;
};

inline Svd jacobi_svd(const Matrix& A, int r) {
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Svd out;
  out.U = svd.matrixU().leftCols(r);
  out.S = svd.singularValues().head(r);
  out.V = svd.matrixV().leftCols(r);
  return out;
}

struct FourBlock {
  Matrix U_hat;
  Matrix V_hat;
  Matrix left_recon;
  Matrix M_b;
  Matrix M_d;
  Matrix E_a;
  Matrix E_b;
  Matrix E_c;
};

inline FourBlock four_block(const Matrix& Ya, const Matrix& Yb, const Matrix& Yc, int r) {
  const Index n1 = Ya.rows(), t1 = Ya.cols(), n2 = Yc.rows(), t2 = Yb.cols();
  Matrix left(n1 + n2, t1);
  left.topRows(n1) = Ya;
  left.bottomRows(n2) = Yc;
  Matrix upper(n1, t1 + t2);
  upper.leftCols(t1) = Ya;
  upper.rightCols(t2) = Yb;

  const Svd L = jacobi_svd(left, r);
  const Svd Up = jacobi_svd(upper, r);

  FourBlock f;
  f.U_hat = L.U;
  f.V_hat = Up.V;
  f.left_recon = L.U * L.S.asDiagonal() * L.V.transpose();
  f.M_b = Up.U * Up.S.asDiagonal() * Up.V.bottomRows(t2).transpose();
  const Matrix U1 = L.U.topRows(n1);
  const Matrix U2 = L.U.bottomRows(n2);
  f.M_d = U2 * (U1.transpose() * U1).inverse() * U1.transpose() * f.M_b;
  f.E_a = Ya - f.left_recon.topRows(n1);
  f.E_c = Yc - f.left_recon.bottomRows(n2);
  f.E_b = Yb - f.M_b;
  return f;
}

// Literal summation of the per-cell variance definition, for arbitrary
// injected factors. (i, t) index the full matrix, 0-based.
inline double cell_variance(const Matrix& U, const Matrix& V, const Matrix& Eb,
                            const Matrix& Ec, Index n1, Index t1, Index i, Index t) {
  const Matrix ginv_u = (U.topRows(n1).transpose() * U.topRows(n1)).inverse();
  const Matrix ginv_v = (V.topRows(t1).transpose() * V.topRows(t1)).inverse();
  double total = 0.0;
  for (Index k = 0; k < n1; ++k) {
    const double w = U.row(i) * ginv_u * U.row(k).transpose();
    total += Eb(k, t - t1) * Eb(k, t - t1) * w * w;
  }
  for (Index s = 0; s < t1; ++s) {
    const double w = V.row(t) * ginv_v * V.row(s).transpose();
    total += Ec(i - n1, s) * Ec(i - n1, s) * w * w;
  }
  return total;
}

// Literal evaluation of the bilinear variance: both weight patterns are
// materialized entry by entry and swept with residual squares.
inline double bilinear_variance(const Matrix& U, const Matrix& V, const Matrix& Eb,
                                const Matrix& Ec, Index n1, Index t1, const Vector& c1,
                                const Vector& c2) {
  const Index n2 = c1.size();
  const Index t2 = c2.size();
  const Matrix ginv_u = (U.topRows(n1).transpose() * U.topRows(n1)).inverse();
  const Matrix ginv_v = (V.topRows(t1).transpose() * V.topRows(t1)).inverse();
  const Matrix pattern_u = U.topRows(n1) * ginv_u * U.bottomRows(n2).transpose();  // N1 x N2
  const Matrix pattern_v = V.bottomRows(t2) * ginv_v * V.topRows(t1).transpose();  // T2 x T1

  double total = 0.0;
  for (Index i = 0; i < n1; ++i) {
    for (Index t = 0; t < t2; ++t) {
      double w = 0.0;
      for (Index j = 0; j < n2; ++j) w += pattern_u(i, j) * c1[j];
      w *= c2[t];
      total += Eb(i, t) * Eb(i, t) * w * w;
    }
  }
  for (Index i = 0; i < n2; ++i) {
    for (Index t = 0; t < t1; ++t) {
      double w = 0.0;
      for (Index s = 0; s < t2; ++s) w += c2[s] * pattern_v(s, t);
      w *= c1[i];
      total += Ec(i, t) * Ec(i, t) * w * w;
    }
  }
  return total;
}

// Literal summation of the oracle variance from true factors and noise
// deviations.
inline double oracle_cell_variance(const Matrix& U, const Matrix& V, const Matrix& sigma,
                                   Index n1, Index t1, Index i, Index t) {
  const Matrix ginv_u = (U.topRows(n1).transpose() * U.topRows(n1)).inverse();
  const Matrix ginv_v = (V.topRows(t1).transpose() * V.topRows(t1)).inverse();
  double total = 0.0;
  for (Index k = 0; k < n1; ++k) {
    const double w = U.row(i) * ginv_u * U.row(k).transpose();
    total += sigma(k, t) * sigma(k, t) * w * w;
  }
  for (Index s = 0; s < t1; ++s) {
    const double w = V.row(t) * ginv_v * V.row(s).transpose();
    total += sigma(i, s) * sigma(i, s) * w * w;
  }
  return total;
}

}  // namespace reference
