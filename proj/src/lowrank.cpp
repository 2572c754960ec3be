#include "staircase/lowrank.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace staircase {

TruncatedSvd truncated_svd(const Matrix& A, int rank) {
  const Index min_dim = std::min(A.rows(), A.cols());
  if (rank < 1 || rank > min_dim) {
    throw NumericError("truncated_svd: rank " + std::to_string(rank) +
                       " outside [1, " + std::to_string(min_dim) + "] for a " +
                       std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                       " matrix");
  }
  if (!A.allFinite()) {
    throw DataError("truncated_svd: input contains non-finite entries");
  }

  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedSvd out;
  out.U = svd.matrixU().leftCols(rank);
  out.S = svd.singularValues().head(rank);
  out.V = svd.matrixV().leftCols(rank);

  // Fix signs: the largest-magnitude entry of each right-singular vector is
  // made nonnegative (first such entry on ties).
  for (int j = 0; j < rank; ++j) {
    Index pivot = 0;
    double best = std::abs(out.V(0, j));
    for (Index i = 1; i < out.V.rows(); ++i) {
      double mag = std::abs(out.V(i, j));
      if (mag > best) {
        best = mag;
        pivot = i;
      }
    }
    if (out.V(pivot, j) < 0.0) {
      out.V.col(j) = -out.V.col(j);
      out.U.col(j) = -out.U.col(j);
    }
  }
  return out;
}

int select_rank(const Vector& singular_values, int max_rank) {
  const Index n = singular_values.size();
  if (n < 2) {
    throw DataError("select_rank: need at least two singular values");
  }
  if (max_rank < 1) {
    throw ConfigError("select_rank: max_rank must be positive");
  }
  for (Index i = 0; i < n; ++i) {
    if (!(singular_values[i] >= 0.0) ||
        (i + 1 < n && singular_values[i + 1] > singular_values[i])) {
      throw DataError("select_rank: values must be nonnegative and non-increasing");
    }
  }

  const int last_gap = static_cast<int>(std::min<Index>(max_rank - 1, n - 1));
  if (last_gap < 1) return 1;  // no admissible gap; only rank 1 remains

  int best_j = 1;
  double best_ratio = -1.0;
  for (int j = 1; j <= last_gap; ++j) {
    const double lo = singular_values[j];  // S[j+1] in 1-indexed terms
    if (lo == 0.0) return j;               // first zero gap
    const double ratio = singular_values[j - 1] / lo;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_j = j;
    }
  }
  return best_j;
}

}  // namespace staircase
