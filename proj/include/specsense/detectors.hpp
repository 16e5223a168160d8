#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"

// Energy-detection statistics under noise-power uncertainty.
//
// NP-LRT compares the energy against a chi-square threshold scaled by the
// maximum-likelihood noise estimate. The other three detectors assume the
// noise power is uniform on (delta_min, delta_max) and remove it from the
// test: NP-AVE averages each sample's likelihood over the prior, NP-AVN
// averages the joint likelihood, and NP-LLR keeps the energy statistic but
// takes its threshold from the prior-averaged false-alarm probability.
// Ratio statistics are returned in the log domain.

namespace specsense {

struct UniformPrior {
  double delta_min = 0.0;
  double delta_max = 0.0;

  double width() const { return delta_max - delta_min; }
  double midpoint() const { return 0.5 * (delta_min + delta_max); }
  /// The same interval moved right by `offset`.
  UniformPrior shifted(double offset) const {
    return {delta_min + offset, delta_max + offset};
  }
  /// True when the width is too small for the closed forms to be evaluated
  /// without cancellation; callers then collapse to the midpoint noise power.
  bool degenerate() const;
};

/// Throws DomainError unless 0 < delta_min <= delta_max, both finite.
void validate(const UniformPrior& prior);

inline constexpr double kDegeneratePriorWidth = 1e-6;  // relative to delta_max

struct DetectorKind {
  enum class Family { kLrt, kAve, kAvn, kLlr };

  Family family = Family::kLlr;
  int estimation_samples = 0;  // LRT only
  UniformPrior prior{};        // AVE, AVN, LLR

  static DetectorKind lrt(int estimation_samples);
  static DetectorKind ave(UniformPrior prior);
  static DetectorKind avn(UniformPrior prior);
  static DetectorKind llr(UniformPrior prior);

  bool has_analytic_threshold() const {
    return family == Family::kLrt || family == Family::kLlr;
  }
  /// Short form used on the command line and in CSV output:
  /// "lrt:K=10", "ave", "avn", "llr".
  std::string label() const;
  /// Conventional name, e.g. "NP-LRT (K=10)".
  std::string display_name() const;

  friend bool operator==(const DetectorKind& a, const DetectorKind& b);
};

/// Parses a label; AVE/AVN/LLR take `prior`. Throws DomainError on bad syntax.
DetectorKind parse_detector(const std::string& label, const UniformPrior& prior);

struct ThresholdProvenance {
  enum class Kind { kAnalyticChi2, kAnalyticLlr, kMonteCarlo };
  Kind kind = Kind::kAnalyticChi2;
  std::uint64_t trials = 0;  // Monte Carlo only
  std::uint64_t seed = 0;    // Monte Carlo only
};

struct Threshold {
  double value = 0.0;
  double target_pfa = 0.0;
  ThresholdProvenance provenance{};
};

/// Sum of squared samples; the decision variable of NP-LRT and NP-LLR.
double energy_statistic(std::span<const double> observation);

/// sigma2_hat * chi2_isf(n, target_pfa).
double lrt_threshold(double sigma2_hat, int n, double target_pfa);

/// ln of the prior-averaged Gaussian density of one sample,
///   (1/W) int_{dmin}^{dmax} N(x; 0, offset + s) ds,  W = dmax - dmin.
/// Evaluated from the erf antiderivative in a scaled form that stays finite
/// far into the tails.
double ave_log_marginal_density(double x, double variance_offset,
                                const UniformPrior& prior);
double ave_marginal_density(double x, double variance_offset,
                            const UniformPrior& prior);

/// sum_i ln f(x_i | H1) - ln f(x_i | H0) with per-sample averaged densities.
double ave_log_ratio(std::span<const double> observation, double signal_power,
                     const UniformPrior& prior);

/// ln of the ratio of the prior-averaged joint likelihoods. Depends on the
/// observation only through t_statistic = sum x^2; reduces to a ratio of
/// incomplete-gamma differences of order n/2 - 1.
double avn_log_ratio(double t_statistic, int n, double signal_power,
                     const UniformPrior& prior);

/// Closed-form false-alarm probability of the energy test against threshold
/// `gamma` when the noise power is uniform on the prior.
double llr_pfa(double gamma, int n, const UniformPrior& prior);
/// Detection probability: llr_pfa on the prior shifted by the signal power.
double llr_pd(double gamma, int n, const UniformPrior& prior, double signal_power);
/// Threshold with llr_pfa(threshold) == target_pfa. Depends only on (n, prior).
Threshold llr_threshold(double target_pfa, int n, const UniformPrior& prior);
/// Prior-averaged density of the energy statistic under H0.
double llr_h0_density(double t_statistic, int n, const UniformPrior& prior);

void to_json(nlohmann::json& j, const UniformPrior& prior);
void to_json(nlohmann::json& j, const DetectorKind& detector);
void to_json(nlohmann::json& j, const Threshold& threshold);
void from_json(const nlohmann::json& j, Threshold& threshold);

}  // namespace specsense
