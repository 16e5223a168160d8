#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "specsense/random.hpp"

namespace specsense {

enum class Hypothesis { kH0, kH1 };

std::string to_string(Hypothesis h);

struct FixedNoise {
  double sigma2 = 1.0;
};

/// Noise power uniform on (delta_min, delta_max).
struct UniformNoise {
  double delta_min = 0.0;
  double delta_max = 0.0;
};

/// Noise power exp(g) with g ~ Normal(log_location, log_variance).
struct LogNormalNoise {
  double log_location = 0.0;
  double log_variance = 0.0;
};

using NoiseModel = std::variant<FixedNoise, UniformNoise, LogNormalNoise>;

/// Throws ConfigError naming the offending field.
void validate(const NoiseModel& model);

/// Draws the true noise power for one trial.
double draw_noise_power(const NoiseModel& model, Substream& rng);

/// One experiment cell.
struct ScenarioConfig {
  double signal_power = 0.0;  // beta^2
  int n_samples = 1;          // N
  NoiseModel noise_model = FixedNoise{};
  double interference_variance = 0.0;  // eta, 0 disables
  int estimation_samples = 1;          // K
  std::uint64_t master_seed = 0;

  /// Signal power over the mean of the uniform noise interval.
  /// Throws DomainError for non-uniform noise models.
  double snr() const;
};

void validate(const ScenarioConfig& config);

/// A single Monte Carlo trial: K noise-only training samples and N
/// observation samples, all at the same realized noise power.
struct TrialData {
  Hypothesis hypothesis = Hypothesis::kH0;
  double true_sigma2 = 0.0;
  std::vector<double> training;
  std::vector<double> observation;
};

/// Draw order within the stream: noise power, the N noise samples, the N
/// signal samples (H1 only), the N interference samples (eta > 0 only), then
/// the K training samples. Training therefore comes last, so a trial with a
/// larger K extends the training of a smaller K without touching anything
/// else.
TrialData generate_trial(const ScenarioConfig& config, Hypothesis hypothesis,
                         Substream& rng);

/// Maximum-likelihood noise power (1/K) sum w^2.
double ml_noise_estimate(std::span<const double> training);

inline constexpr double kBoltzmann = 1.38e-23;

/// Noise-power interval k T B G for a receiver temperature range.
std::pair<double, double> interval_from_temperature(double t_min, double t_max,
                                                    double bandwidth,
                                                    double gain_factor);

void to_json(nlohmann::json& j, const NoiseModel& model);
void from_json(const nlohmann::json& j, NoiseModel& model);
void to_json(nlohmann::json& j, const ScenarioConfig& config);
/// Rejects unknown and missing keys and validates the result.
void from_json(const nlohmann::json& j, ScenarioConfig& config);

}  // namespace specsense
