#ifndef FSVI_SPECIAL_FUNCTIONS_HPP
#define FSVI_SPECIAL_FUNCTIONS_HPP

#include <span>

namespace fsvi {

/// Natural log of the gamma function for x > 0.
/// Lanczos approximation (g = 7, 9 coefficients) with reflection below 0.5.
/// Absolute error <= 1e-12 * max(1, |ln Gamma(x)|) on [1e-3, 1e6].
double ln_gamma(double x);

/// Digamma psi(x) = d/dx ln Gamma(x) for x > 0.
/// Upward recurrence below 6, then the Bernoulli asymptotic series.
/// Relative error <= 1e-10 on [1e-3, 1e6].
double digamma(double x);

/// Trigamma psi'(x) = d/dx psi(x) for x > 0. Always positive.
/// Relative error <= 1e-8 on [1e-3, 1e6].
double trigamma(double x);

/// Log of the multivariate beta function:
/// ln B(alpha) = sum_i ln Gamma(alpha_i) - ln Gamma(sum_i alpha_i).
/// Requires K >= 2 and every component positive. Sums run in ascending
/// index order so results are reproducible bit-for-bit.
double ln_beta(std::span<const double> alpha);

} // namespace fsvi

#endif
