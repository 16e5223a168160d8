#include "specsense/detectors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "specsense/errors.hpp"
#include "specsense/specfun.hpp"

namespace specsense {
namespace {

// 1 - sqrt(pi) u e^{u^2} erfc(u), for u >= 0.
double scaled_erfc_tail(double u) {
  if (u < 6.0) {
    return 1.0 - std::sqrt(std::numbers::pi) * u * std::exp(u * u) *
                     specfun::erfc(u);
  }
  // Asymptotic series sum_{k>=1} (-1)^(k+1) (2k-1)!! / (2u^2)^k.
  const double s = 0.5 / (u * u);
  double term = 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = term * (2 * k - 1) * s;
    if (next > term && k > 1) break;
    term = next;
    sum += sign * term;
    sign = -sign;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double log_gaussian_density(double x, double variance) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + x * x / variance);
}

void require_order(int n) {
  if (n < 3) throw DomainError("closed-form detectors require n >= 3");
}

}  // namespace

bool UniformPrior::degenerate() const {
  return width() <= kDegeneratePriorWidth * delta_max;
}

void validate(const UniformPrior& prior) {
  if (!std::isfinite(prior.delta_min) || !std::isfinite(prior.delta_max) ||
      !(prior.delta_min > 0.0) || !(prior.delta_max >= prior.delta_min)) {
    throw DomainError("uniform prior requires 0 < delta_min <= delta_max");
  }
}

DetectorKind DetectorKind::lrt(int estimation_samples) {
  if (estimation_samples < 1) throw DomainError("NP-LRT requires K >= 1");
  return {Family::kLrt, estimation_samples, {}};
}

DetectorKind DetectorKind::ave(UniformPrior prior) {
  validate(prior);
  return {Family::kAve, 0, prior};
}

DetectorKind DetectorKind::avn(UniformPrior prior) {
  validate(prior);
  return {Family::kAvn, 0, prior};
}

DetectorKind DetectorKind::llr(UniformPrior prior) {
  validate(prior);
  return {Family::kLlr, 0, prior};
}

std::string DetectorKind::label() const {
  switch (family) {
    case Family::kLrt:
      return "lrt:K=" + std::to_string(estimation_samples);
    case Family::kAve:
      return "ave";
    case Family::kAvn:
      return "avn";
    case Family::kLlr:
      return "llr";
  }
  return {};
}

std::string DetectorKind::display_name() const {
  switch (family) {
    case Family::kLrt:
      return "NP-LRT (K=" + std::to_string(estimation_samples) + ")";
    case Family::kAve:
      return "NP-AVE";
    case Family::kAvn:
      return "NP-AVN";
    case Family::kLlr:
      return "NP-LLR";
  }
  return {};
}

bool operator==(const DetectorKind& a, const DetectorKind& b) {
  if (a.family != b.family) return false;
  if (a.family == DetectorKind::Family::kLrt) {
    return a.estimation_samples == b.estimation_samples;
  }
  return a.prior.delta_min == b.prior.delta_min &&
         a.prior.delta_max == b.prior.delta_max;
}

DetectorKind parse_detector(const std::string& label, const UniformPrior& prior) {
  if (label == "ave") return DetectorKind::ave(prior);
  if (label == "avn") return DetectorKind::avn(prior);
  if (label == "llr") return DetectorKind::llr(prior);
  const std::string prefix = "lrt:K=";
  if (label.rfind(prefix, 0) == 0) {
    const char* first = label.data() + prefix.size();
    const char* last = label.data() + label.size();
    int k = 0;
    const auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec == std::errc() && ptr == last && first != last) {
      return DetectorKind::lrt(k);
    }
  }
  throw DomainError("unknown detector '" + label +
                    "' (expected lrt:K=<int>, ave, avn or llr)");
}

double energy_statistic(std::span<const double> observation) {
  double sum = 0.0;
  for (double x : observation) sum += x * x;
  return sum;
}

double lrt_threshold(double sigma2_hat, int n, double target_pfa) {
  if (!(sigma2_hat > 0.0) || !std::isfinite(sigma2_hat)) {
    throw DomainError("lrt_threshold requires sigma2_hat > 0");
  }
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw DomainError("lrt_threshold requires target_pfa in (0, 1)");
  }
  return sigma2_hat * specfun::chi2_isf(n, target_pfa);
}

double ave_log_marginal_density(double x, double variance_offset,
                                const UniformPrior& prior) {
  validate(prior);
  if (!std::isfinite(x)) throw DomainError("sample must be finite");
  if (!(variance_offset >= 0.0)) throw DomainError("variance offset must be >= 0");

  const UniformPrior support = prior.shifted(variance_offset);
  if (support.degenerate()) {
    return log_gaussian_density(x, support.midpoint());
  }
  // G(x, v) = sqrt(2v/pi) e^{-x^2/2v} + x erf(x/sqrt(2v)) is an antiderivative
  // in v of the Gaussian density. Writing G - |x| = e^{-u^2} sqrt(2v/pi)
  // phi(u), u = |x|/sqrt(2v), keeps the difference free of cancellation
  // against |x| and lets the largest exponential be factored out.
  const double ax = std::fabs(x);
  const double v_lo = support.delta_min;
  const double v_hi = support.delta_max;
  const double u_lo = ax / std::sqrt(2.0 * v_lo);
  const double u_hi = ax / std::sqrt(2.0 * v_hi);
  const double a_hi = std::sqrt(2.0 * v_hi / std::numbers::pi) * scaled_erfc_tail(u_hi);
  const double a_lo = std::sqrt(2.0 * v_lo / std::numbers::pi) * scaled_erfc_tail(u_lo);
  const double decay = 0.5 * x * x * (1.0 / v_lo - 1.0 / v_hi);
  const double bracket = a_hi - a_lo * std::exp(-decay);
  if (!(bracket > 0.0)) {
    throw PrecisionError("averaged density lost all significant digits");
  }
  return -u_hi * u_hi + std::log(bracket) - std::log(prior.width());
}

double ave_marginal_density(double x, double variance_offset,
                            const UniformPrior& prior) {
  return std::exp(ave_log_marginal_density(x, variance_offset, prior));
}

double ave_log_ratio(std::span<const double> observation, double signal_power,
                     const UniformPrior& prior) {
  validate(prior);
  if (!(signal_power >= 0.0)) throw DomainError("signal power must be >= 0");
  if (signal_power == 0.0) return 0.0;
  double total = 0.0;
  for (double x : observation) {
    total += ave_log_marginal_density(x, signal_power, prior) -
             ave_log_marginal_density(x, 0.0, prior);
  }
  return total;
}

double avn_log_ratio(double t_statistic, int n, double signal_power,
                     const UniformPrior& prior) {
  validate(prior);
  require_order(n);
  if (!(t_statistic > 0.0) || !std::isfinite(t_statistic)) {
    throw DomainError("avn_log_ratio requires a positive finite energy");
  }
  if (!(signal_power >= 0.0)) throw DomainError("signal power must be >= 0");
  if (signal_power == 0.0) return 0.0;

  if (prior.degenerate()) {
    // Plain Gaussian likelihood ratio at the midpoint noise power.
    const double v0 = prior.midpoint();
    const double v1 = v0 + signal_power;
    return 0.5 * n * std::log(v0 / v1) + 0.5 * t_statistic * (1.0 / v0 - 1.0 / v1);
  }
  const double order = 0.5 * n - 1.0;
  const double half_t = 0.5 * t_statistic;
  const double numerator = specfun::log_gamma_q_difference(
      order, half_t / (signal_power + prior.delta_max),
      half_t / (signal_power + prior.delta_min));
  const double denominator = specfun::log_gamma_q_difference(
      order, half_t / prior.delta_max, half_t / prior.delta_min);
  return numerator - denominator;
}

double llr_pfa(double gamma, int n, const UniformPrior& prior) {
  validate(prior);
  require_order(n);
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw DomainError("llr_pfa requires a finite gamma >= 0");
  }
  if (gamma == 0.0) return 1.0;
  if (prior.degenerate()) return specfun::chi2_sf(n, gamma / prior.midpoint());

  // Closed form divided through by Gamma(n/2) so that no factor overflows:
  //   2 d (g/2d)^{n/2} e^{-g/2d} / Gamma(n/2)  and  Q(n/2, g/2d).
  const double a = 0.5 * n;
  const double log_complete = specfun::log_gamma(a);
  auto power_term = [&](double d) {
    const double z = gamma / (2.0 * d);
    return 2.0 * d * std::exp(a * std::log(z) - z - log_complete);
  };
  auto tail_term = [&](double d) {
    return (d * (n - 2) - gamma) * specfun::gamma_q(a, gamma / (2.0 * d));
  };
  const double numerator = power_term(prior.delta_min) - power_term(prior.delta_max) +
                           tail_term(prior.delta_min) - tail_term(prior.delta_max);
  const double denominator = (n - 2) * (prior.delta_min - prior.delta_max);
  return std::clamp(numerator / denominator, 0.0, 1.0);
}

double llr_pd(double gamma, int n, const UniformPrior& prior, double signal_power) {
  if (!(signal_power >= 0.0)) throw DomainError("signal power must be >= 0");
  return llr_pfa(gamma, n, prior.shifted(signal_power));
}

Threshold llr_threshold(double target_pfa, int n, const UniformPrior& prior) {
  validate(prior);
  require_order(n);
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw DomainError("llr_threshold requires target_pfa in (0, 1)");
  }
  double lo = 0.0;
  double hi = n * (prior.delta_max + 10.0);
  int doublings = 0;
  while (llr_pfa(hi, n, prior) > target_pfa) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200 || !std::isfinite(hi)) {
      throw DomainError("llr_threshold: bracket expansion failed");
    }
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (llr_pfa(mid, n, prior) > target_pfa) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {0.5 * (lo + hi), target_pfa, {ThresholdProvenance::Kind::kAnalyticLlr, 0, 0}};
}

double llr_h0_density(double t_statistic, int n, const UniformPrior& prior) {
  validate(prior);
  require_order(n);
  if (!(t_statistic > 0.0) || !std::isfinite(t_statistic)) {
    throw DomainError("llr_h0_density requires t > 0");
  }
  if (prior.degenerate()) {
    const double s = prior.midpoint();
    return specfun::chi2_pdf(n, t_statistic / s) / s;
  }
  const double half_t = 0.5 * t_statistic;
  const double log_mass = specfun::log_gamma_q_difference(
      0.5 * n - 1.0, half_t / prior.delta_max, half_t / prior.delta_min);
  return std::exp(log_mass) / ((n - 2) * prior.width());
}

void to_json(nlohmann::json& j, const UniformPrior& prior) {
  j = {{"delta_min", prior.delta_min}, {"delta_max", prior.delta_max}};
}

void to_json(nlohmann::json& j, const DetectorKind& detector) {
  j = {{"label", detector.label()}};
  if (detector.family == DetectorKind::Family::kLrt) {
    j["estimation_samples"] = detector.estimation_samples;
  } else {
    j["prior"] = detector.prior;
  }
}

namespace {

std::string provenance_name(ThresholdProvenance::Kind kind) {
  switch (kind) {
    case ThresholdProvenance::Kind::kAnalyticChi2:
      return "analytic-chi2";
    case ThresholdProvenance::Kind::kAnalyticLlr:
      return "analytic-llr";
    case ThresholdProvenance::Kind::kMonteCarlo:
      return "monte-carlo";
  }
  return {};
}

}  // namespace

void to_json(nlohmann::json& j, const Threshold& threshold) {
  nlohmann::json provenance = {{"kind", provenance_name(threshold.provenance.kind)}};
  if (threshold.provenance.kind == ThresholdProvenance::Kind::kMonteCarlo) {
    provenance["trials"] = threshold.provenance.trials;
    provenance["seed"] = threshold.provenance.seed;
  }
  j = {{"value", threshold.value},
       {"target_pfa", threshold.target_pfa},
       {"provenance", provenance}};
}

void from_json(const nlohmann::json& j, Threshold& threshold) {
  threshold.value = j.at("value").get<double>();
  threshold.target_pfa = j.at("target_pfa").get<double>();
  const auto& provenance = j.at("provenance");
  const auto kind = provenance.at("kind").get<std::string>();
  if (kind == "analytic-chi2") {
    threshold.provenance = {ThresholdProvenance::Kind::kAnalyticChi2, 0, 0};
  } else if (kind == "analytic-llr") {
    threshold.provenance = {ThresholdProvenance::Kind::kAnalyticLlr, 0, 0};
  } else if (kind == "monte-carlo") {
    threshold.provenance = {ThresholdProvenance::Kind::kMonteCarlo,
                            provenance.at("trials").get<std::uint64_t>(),
                            provenance.at("seed").get<std::uint64_t>()};
  } else {
    throw DomainError("unknown threshold provenance '" + kind + "'");
  }
}

}  // namespace specsense
