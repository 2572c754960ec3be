#pragma once

#include "staircase/types.hpp"

namespace staircase {

/// Top-r singular triplets of a dense matrix.
///
/// Columns of U and V are orthonormal, S is non-increasing and nonnegative,
/// and U * diag(S) * V^T is the best rank-r Frobenius approximation of the
/// input. Signs follow a fixed convention (see truncated_svd), so results
/// are reproducible bit for bit.
struct TruncatedSvd {
  Matrix U;  // n x r
  Vector S;  // r
  Matrix V;  // m x r

  Matrix reconstruction() const { return U * S.asDiagonal() * V.transpose(); }
};

/// Truncated rank-r SVD of A.
///
/// Sign convention: in each right-singular vector the entry of largest
/// magnitude (lowest index on ties) is made nonnegative, and the paired left
/// vector is flipped with it. Deterministic for a fixed input.
///
/// Throws NumericError when r exceeds min(n, m) and DataError on non-finite
/// input.
TruncatedSvd truncated_svd(const Matrix& A, int rank);

/// Picks a rank from a non-increasing singular-value profile: the gap
/// j in [1, max_rank-1] (1-indexed) maximizing S[j] / S[j+1], ties broken
/// toward smaller j. A zero trailing value wins immediately (infinite gap).
/// This automates the usual visual elbow heuristic; callers may override.
int select_rank(const Vector& singular_values, int max_rank);

}  // namespace staircase
