#pragma once

// Special functions needed by the gamma and von Mises log-densities.
// All throw DomainError outside their domain.

namespace homoenc::special {

/// ln Gamma(x), x > 0. Lanczos (g = 7, 9 coefficients); reflection below 1/2.
double lgamma(double x);

/// psi(x) = d/dx ln Gamma(x), x > 0. Recurrence up to x >= 6, then the
/// asymptotic series.
double digamma(double x);

/// psi'(x), x > 0. Needed for the derivative of digamma on the tape.
double trigamma(double x);

/// ln I0(kappa), kappa >= 0. Power series below 15, asymptotic expansion
/// above.
double log_bessel_i0(double kappa);

/// I1(kappa) / I0(kappa) = d/dkappa ln I0(kappa), kappa >= 0.
double bessel_ratio(double kappa);

/// d/dkappa of bessel_ratio: 1 - R/kappa - R^2 (1/2 at kappa = 0).
double bessel_ratio_derivative(double kappa);

}  // namespace homoenc::special
