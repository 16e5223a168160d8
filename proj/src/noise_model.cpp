#include "specsense/noise_model.hpp"

#include <cmath>
#include <set>

#include "specsense/errors.hpp"

namespace specsense {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!j.is_object()) throw ConfigError(context, "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError(context.empty() ? key : context + "." + key,
                        "unknown key");
    }
  }
  for (const auto& key : allowed) {
    if (!j.contains(key)) {
      throw ConfigError(context.empty() ? key : context + "." + key,
                        "missing key");
    }
  }
}

template <class T>
T read(const nlohmann::json& j, const std::string& key,
       const std::string& field) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field, std::string("invalid value: ") + e.what());
  }
}

int read_int(const nlohmann::json& j, const std::string& key) {
  if (!j.at(key).is_number_integer()) throw ConfigError(key, "must be an integer");
  return read<int>(j, key, key);
}

}  // namespace

std::string to_string(Hypothesis h) { return h == Hypothesis::kH0 ? "H0" : "H1"; }

void validate(const NoiseModel& model) {
  std::visit(
      Overloaded{
          [](const FixedNoise& m) {
            require(std::isfinite(m.sigma2) && m.sigma2 > 0.0,
                    "noise_model.sigma2", "must be finite and > 0");
          },
          [](const UniformNoise& m) {
            require(std::isfinite(m.delta_min) && m.delta_min > 0.0,
                    "noise_model.delta_min", "must be finite and > 0");
            require(std::isfinite(m.delta_max) && m.delta_max > m.delta_min,
                    "noise_model.delta_max", "must be finite and > delta_min");
          },
          [](const LogNormalNoise& m) {
            require(std::isfinite(m.log_location), "noise_model.log_location",
                    "must be finite");
            require(std::isfinite(m.log_variance) && m.log_variance > 0.0,
                    "noise_model.log_variance", "must be finite and > 0");
          }},
      model);
}

double draw_noise_power(const NoiseModel& model, Substream& rng) {
  return std::visit(
      Overloaded{
          [](const FixedNoise& m) { return m.sigma2; },
          [&rng](const UniformNoise& m) {
            // uniform() is in [0, 1); reject the endpoint to stay open.
            double u = rng.uniform();
            while (u == 0.0) u = rng.uniform();
            return m.delta_min + u * (m.delta_max - m.delta_min);
          },
          [&rng](const LogNormalNoise& m) {
            return std::exp(m.log_location + std::sqrt(m.log_variance) * rng.normal());
          }},
      model);
}

double ScenarioConfig::snr() const {
  const auto* uniform = std::get_if<UniformNoise>(&noise_model);
  if (uniform == nullptr) {
    throw DomainError("snr is defined for uniform noise models only");
  }
  return 2.0 * signal_power / (uniform->delta_min + uniform->delta_max);
}

void validate(const ScenarioConfig& config) {
  require(std::isfinite(config.signal_power) && config.signal_power >= 0.0,
          "signal_power", "must be finite and >= 0");
  require(config.n_samples >= 1, "n_samples", "must be >= 1");
  validate(config.noise_model);
  require(std::isfinite(config.interference_variance) &&
              config.interference_variance >= 0.0,
          "interference_variance", "must be finite and >= 0");
  require(config.estimation_samples >= 1, "estimation_samples", "must be >= 1");
}

TrialData generate_trial(const ScenarioConfig& config, Hypothesis hypothesis,
                         Substream& rng) {
  const auto n = static_cast<std::size_t>(config.n_samples);
  const auto k = static_cast<std::size_t>(config.estimation_samples);

  TrialData trial;
  trial.hypothesis = hypothesis;
  trial.true_sigma2 = draw_noise_power(config.noise_model, rng);

  const double noise_sd = std::sqrt(trial.true_sigma2);
  trial.observation.resize(n);
  for (double& x : trial.observation) x = noise_sd * rng.normal();

  if (hypothesis == Hypothesis::kH1) {
    const double signal_sd = std::sqrt(config.signal_power);
    for (double& x : trial.observation) x += signal_sd * rng.normal();
  }
  if (config.interference_variance > 0.0) {
    const double interference_sd = std::sqrt(config.interference_variance);
    for (double& x : trial.observation) x += interference_sd * rng.normal();
  }

  trial.training.resize(k);
  for (double& w : trial.training) w = noise_sd * rng.normal();
  return trial;
}

double ml_noise_estimate(std::span<const double> training) {
  if (training.empty()) throw DomainError("ml_noise_estimate: empty training set");
  double sum = 0.0;
  for (double w : training) sum += w * w;
  return sum / static_cast<double>(training.size());
}

std::pair<double, double> interval_from_temperature(double t_min, double t_max,
                                                    double bandwidth,
                                                    double gain_factor) {
  if (!(t_min > 0.0 && t_min < t_max)) {
    throw DomainError("interval_from_temperature requires 0 < t_min < t_max");
  }
  if (!(bandwidth > 0.0) || !(gain_factor > 0.0)) {
    throw DomainError("interval_from_temperature requires positive bandwidth and gain");
  }
  const double scale = kBoltzmann * bandwidth * gain_factor;
  return {scale * t_min, scale * t_max};
}

void to_json(nlohmann::json& j, const NoiseModel& model) {
  std::visit(Overloaded{
                 [&j](const FixedNoise& m) {
                   j = {{"variant", "Fixed"}, {"sigma2", m.sigma2}};
                 },
                 [&j](const UniformNoise& m) {
                   j = {{"variant", "Uniform"},
                        {"delta_min", m.delta_min},
                        {"delta_max", m.delta_max}};
                 },
                 [&j](const LogNormalNoise& m) {
                   j = {{"variant", "LogNormal"},
                        {"log_location", m.log_location},
                        {"log_variance", m.log_variance}};
                 }},
             model);
}

void from_json(const nlohmann::json& j, NoiseModel& model) {
  if (!j.is_object() || !j.contains("variant")) {
    throw ConfigError("noise_model.variant", "missing key");
  }
  const auto variant = read<std::string>(j, "variant", "noise_model.variant");
  if (variant == "Fixed") {
    check_keys(j, {"variant", "sigma2"}, "noise_model");
    model = FixedNoise{read<double>(j, "sigma2", "noise_model.sigma2")};
  } else if (variant == "Uniform") {
    check_keys(j, {"variant", "delta_min", "delta_max"}, "noise_model");
    model = UniformNoise{read<double>(j, "delta_min", "noise_model.delta_min"),
                         read<double>(j, "delta_max", "noise_model.delta_max")};
  } else if (variant == "LogNormal") {
    check_keys(j, {"variant", "log_location", "log_variance"}, "noise_model");
    model = LogNormalNoise{
        read<double>(j, "log_location", "noise_model.log_location"),
        read<double>(j, "log_variance", "noise_model.log_variance")};
  } else {
    throw ConfigError("noise_model.variant",
                      "expected one of Fixed, Uniform, LogNormal");
  }
  validate(model);
}

void to_json(nlohmann::json& j, const ScenarioConfig& config) {
  nlohmann::json noise;
  to_json(noise, config.noise_model);
  j = {{"signal_power", config.signal_power},
       {"n_samples", config.n_samples},
       {"noise_model", noise},
       {"interference_variance", config.interference_variance},
       {"estimation_samples", config.estimation_samples},
       {"master_seed", config.master_seed}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& config) {
  check_keys(j,
             {"signal_power", "n_samples", "noise_model", "interference_variance",
              "estimation_samples", "master_seed"},
             "");
  ScenarioConfig out;
  out.signal_power = read<double>(j, "signal_power", "signal_power");
  out.n_samples = read_int(j, "n_samples");
  from_json(j.at("noise_model"), out.noise_model);
  out.interference_variance =
      read<double>(j, "interference_variance", "interference_variance");
  out.estimation_samples = read_int(j, "estimation_samples");
  const auto& seed = j.at("master_seed");
  if (!seed.is_number_unsigned() &&
      !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw ConfigError("master_seed", "must be an unsigned 64-bit integer");
  }
  out.master_seed = j.at("master_seed").get<std::uint64_t>();
  validate(out);
  config = out;
}

}  // namespace specsense
