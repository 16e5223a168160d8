#include "specsense/specfun.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "specsense/errors.hpp"

namespace specsense::specfun {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 100000;
// Largest tolerated relative error estimate before PrecisionError.
constexpr double kPrecisionLimit = 1e-6;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

// Lanczos approximation, g = 7, n = 9 (Godfrey coefficients).
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_log_gamma(double a) {
  if (a < 0.5) {
    // Reflection; a is in (0, 0.5) here so sin(pi a) > 0.
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * a)) -
           lanczos_log_gamma(1.0 - a);
  }
  const double x = a - 1.0;
  double sum = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    sum += kLanczos[i] / (x + static_cast<double>(i));
  }
  const double t = x + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) - t +
         std::log(sum);
}

// Series for the lower tail: gamma(a,z) = e^-z z^a * series_sum(a, z).
double lower_series_sum(double a, double z) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int i = 0; i < kMaxIterations; ++i) {
    ap += 1.0;
    term *= z / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) return sum;
  }
  throw PrecisionError("incomplete gamma series did not converge");
}

// Modified Lentz continued fraction for the upper tail:
// Gamma(a,z) = e^-z z^a * upper_fraction(a, z). Valid for z > 0 and any a,
// converging quickly once z > a + 1.
double upper_fraction(double a, double z) {
  double b = z + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw PrecisionError("incomplete gamma continued fraction did not converge");
}

bool use_series(double a, double z) { return z < a + 1.0; }

void check_regularized_args(double a, double z) {
  require_finite(a, "order");
  require_finite(z, "argument");
  if (a <= 0.0) throw DomainError("regularized gamma requires a > 0");
  if (z < 0.0) throw DomainError("regularized gamma requires z >= 0");
}

struct Estimate {
  double value;
  double rel_error;
};

// E_1(z) = Gamma(0, z) for 0 < z <= 1.
Estimate exp_integral_e1(double z) {
  // -gamma - ln z + sum_{k>=1} (-1)^(k+1) z^k / (k k!)
  constexpr double kEulerGamma = 0.57721566490153286061;
  double term = 1.0;
  double sum = 0.0;
  double magnitude = 0.0;
  for (int k = 1; k < kMaxIterations; ++k) {
    term *= -z / k;
    const double add = -term / k;
    sum += add;
    magnitude += std::fabs(add);
    if (std::fabs(add) < kEps * std::fabs(sum)) break;
  }
  const double value = -kEulerGamma - std::log(z) + sum;
  const double scale = kEulerGamma + std::fabs(std::log(z)) + magnitude;
  return {value, 4.0 * kEps * scale / std::fabs(value)};
}

// e^-z z^a times the continued fraction, formed in the log domain.
Estimate upper_gamma_fraction(double a, double z) {
  const double log_scale = a * std::log(z) - z;
  const double log_value = log_scale + std::log(upper_fraction(a, z));
  if (log_value > std::log(std::numeric_limits<double>::max())) {
    throw OverflowError("upper_gamma: result exceeds double range");
  }
  if (log_value < std::log(std::numeric_limits<double>::min())) {
    throw PrecisionError("upper_gamma: result underflows to a subnormal value");
  }
  return {std::exp(log_value), 8.0 * kEps * (1.0 + std::fabs(log_scale))};
}

Estimate upper_gamma_positive(double a, double z) {
  const double log_scale = a * std::log(z) - z;
  if (use_series(a, z)) {
    const double complete = std::tgamma(a);
    if (!std::isfinite(complete)) {
      throw OverflowError("upper_gamma: Gamma(a) exceeds double range");
    }
    const double lower = std::exp(log_scale) * lower_series_sum(a, z);
    const double value = complete - lower;
    if (!(value > 0.0)) {
      throw PrecisionError("upper_gamma: complement lost all precision");
    }
    return {value, 4.0 * kEps * (complete + lower) / value};
  }
  return upper_gamma_fraction(a, z);
}

}  // namespace

double erf(double x) { return std::erf(x); }

double erfc(double x) { return std::erfc(x); }

double log_gamma(double a) {
  require_finite(a, "log_gamma argument");
  if (a <= 0.0) throw DomainError("log_gamma requires a > 0");
  return lanczos_log_gamma(a);
}

double log_gamma_p(double a, double z) {
  check_regularized_args(a, z);
  if (z == 0.0) return -std::numeric_limits<double>::infinity();
  const double log_prefactor = a * std::log(z) - z - log_gamma(a);
  if (use_series(a, z)) {
    return log_prefactor + std::log(lower_series_sum(a, z));
  }
  return std::log1p(-std::exp(log_prefactor) * upper_fraction(a, z));
}

double log_gamma_q(double a, double z) {
  check_regularized_args(a, z);
  if (z == 0.0) return 0.0;
  const double log_prefactor = a * std::log(z) - z - log_gamma(a);
  if (use_series(a, z)) {
    return std::log1p(-std::exp(log_prefactor) * lower_series_sum(a, z));
  }
  return log_prefactor + std::log(upper_fraction(a, z));
}

double gamma_p(double a, double z) { return std::exp(log_gamma_p(a, z)); }

double gamma_q(double a, double z) { return std::exp(log_gamma_q(a, z)); }

double log_gamma_q_difference(double a, double z_lo, double z_hi) {
  check_regularized_args(a, z_lo);
  check_regularized_args(a, z_hi);
  if (!(z_lo < z_hi)) {
    throw DomainError("log_gamma_q_difference requires z_lo < z_hi");
  }
  // Q(lo) - Q(hi) == P(hi) - P(lo); take the smaller tail.
  double big;
  double small;
  if (z_lo >= a) {
    big = log_gamma_q(a, z_lo);
    small = log_gamma_q(a, z_hi);
  } else {
    big = log_gamma_p(a, z_hi);
    small = log_gamma_p(a, z_lo);
  }
  const double kept = -std::expm1(small - big);
  if (!(kept >= kPrecisionLimit)) {
    throw PrecisionError(
        "incomplete gamma difference loses more than six digits");
  }
  return big + std::log(kept);
}

double upper_gamma(double a, double z) {
  require_finite(a, "upper_gamma order");
  require_finite(z, "upper_gamma argument");
  if (z <= 0.0) throw DomainError("upper_gamma requires z > 0");

  if (a > 0.0) {
    const Estimate e = upper_gamma_positive(a, z);
    if (e.rel_error > kPrecisionLimit) {
      throw PrecisionError("upper_gamma: cancellation in complement");
    }
    return e.value;
  }

  // Away from the origin the recurrence cancels (each step loses a factor of
  // about z / |a|) while the continued fraction converges for any order.
  if (z > 1.0) {
    return upper_gamma_fraction(a, z).value;
  }

  // Climb to the smallest order b = a + m in [0, 1), then recur downwards.
  const double steps = std::ceil(-a);
  const double base_order = a + steps;
  Estimate current = base_order == 0.0 ? exp_integral_e1(z)
                                       : upper_gamma_positive(base_order, z);
  const double log_z = std::log(z);
  double order = base_order;
  for (int i = 0; i < static_cast<int>(steps); ++i) {
    const double next = order - 1.0;
    const double term = std::exp(next * log_z - z);
    if (!std::isfinite(term)) {
      throw OverflowError("upper_gamma: recurrence term exceeds double range");
    }
    const double numerator = current.value - term;
    if (numerator == 0.0) {
      throw PrecisionError("upper_gamma: recurrence cancelled exactly");
    }
    const double value = numerator / next;
    const double rel = (std::fabs(current.value) * current.rel_error +
                        std::fabs(term) * kEps) /
                           std::fabs(numerator) +
                       kEps;
    current = {value, rel};
    order = next;
  }
  if (!std::isfinite(current.value)) {
    throw OverflowError("upper_gamma: result exceeds double range");
  }
  if (current.rel_error > kPrecisionLimit) {
    throw PrecisionError("upper_gamma: recurrence cancellation too large");
  }
  return current.value;
}

double expint_en(double n, double z) {
  require_finite(n, "expint_en order");
  require_finite(z, "expint_en argument");
  if (z <= 0.0) throw DomainError("expint_en requires z > 0");
  const double value = std::pow(z, n - 1.0) * upper_gamma(1.0 - n, z);
  if (!std::isfinite(value)) {
    throw OverflowError("expint_en: result exceeds double range");
  }
  return value;
}

double chi2_sf(int n, double t) {
  if (n < 1) throw DomainError("chi2_sf requires n >= 1");
  require_finite(t, "chi2_sf argument");
  if (t < 0.0) throw DomainError("chi2_sf requires t >= 0");
  return gamma_q(0.5 * n, 0.5 * t);
}

double chi2_pdf(int n, double t) {
  if (n < 1) throw DomainError("chi2_pdf requires n >= 1");
  require_finite(t, "chi2_pdf argument");
  if (t < 0.0) throw DomainError("chi2_pdf requires t >= 0");
  const double half = 0.5 * n;
  if (t == 0.0) {
    if (n == 2) return 0.5;
    return n < 2 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return std::exp((half - 1.0) * std::log(t) - 0.5 * t -
                  half * std::numbers::ln2 - log_gamma(half));
}

double chi2_isf(int n, double p) {
  if (n < 1) throw DomainError("chi2_isf requires n >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("chi2_isf requires p in (0, 1]");
  if (p == 1.0) return 0.0;

  double lo = 0.0;
  double hi = std::max(4.0 * n, 100.0);
  int doublings = 0;
  while (chi2_sf(n, hi) > p) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 1000) throw DomainError("chi2_isf: bracket expansion failed");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (chi2_sf(n, mid) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace specsense::specfun
