#pragma once

// Special functions used by the detector closed forms.
//
// Every function is pure. Domain violations throw DomainError, results that
// would carry fewer than six correct significant digits throw PrecisionError,
// and results beyond double range throw OverflowError.

namespace specsense::specfun {

double erf(double x);
double erfc(double x);

/// Natural log of the complete gamma function, a > 0.
double log_gamma(double a);

/// Regularized lower incomplete gamma P(a, z), a > 0, z >= 0.
double gamma_p(double a, double z);
/// Regularized upper incomplete gamma Q(a, z) = 1 - P(a, z).
double gamma_q(double a, double z);
double log_gamma_p(double a, double z);
double log_gamma_q(double a, double z);

/// ln(Q(a, z_lo) - Q(a, z_hi)) for 0 <= z_lo < z_hi.
///
/// Works from whichever tail keeps the two terms small so the difference is
/// formed without cancellation against 1. Throws PrecisionError when the two
/// terms agree to more than six digits.
double log_gamma_q_difference(double a, double z_lo, double z_hi);

/// Upper incomplete gamma Gamma(a, z) = int_z^inf t^(a-1) e^-t dt for any
/// finite real order a and z > 0. For non-positive orders and z <= 1 the
/// value comes from the downward recurrence
/// Gamma(a, z) = (Gamma(a+1, z) - z^a e^-z) / a; beyond z = 1 the recurrence
/// is ill-conditioned and the continued fraction is used instead. Results
/// below the normal double range throw PrecisionError.
double upper_gamma(double a, double z);

/// Generalized exponential integral E_n(z) = int_1^inf e^(-zt) t^-n dt,
/// evaluated as z^(n-1) Gamma(1-n, z).
double expint_en(double n, double z);

/// Right-tail probability of a chi-square variable with n degrees of freedom.
double chi2_sf(int n, double t);
/// Inverse of chi2_sf in t: the t >= 0 with chi2_sf(n, t) = p, p in (0, 1].
double chi2_isf(int n, double p);
double chi2_pdf(int n, double t);

}  // namespace specsense::specfun
