#pragma once

namespace staircase {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, accurate to better than 1e-10 over (0, 1).
/// Throws ConfigError if p is outside (0, 1).
double normal_quantile(double p);

}  // namespace staircase
