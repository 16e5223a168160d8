#include "specsense/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "specsense/errors.hpp"
#include "specsense/parallel.hpp"
#include "specsense/specfun.hpp"

#ifndef SPECSENSE_VERSION
#define SPECSENSE_VERSION "0.0.0"
#endif

namespace specsense {
namespace {

std::vector<DetectorKind> standard_detectors(const UniformPrior& prior) {
  return {DetectorKind::lrt(10), DetectorKind::lrt(20), DetectorKind::ave(prior),
          DetectorKind::avn(prior), DetectorKind::llr(prior)};
}

ExperimentPreset uniform_preset(const std::string& id, double signal_power, int n,
                                UniformPrior prior) {
  ExperimentPreset preset;
  preset.id = id;
  preset.config.signal_power = signal_power;
  preset.config.n_samples = n;
  preset.config.noise_model = UniformNoise{prior.delta_min, prior.delta_max};
  preset.config.estimation_samples = 20;
  preset.detectors = standard_detectors(prior);
  preset.pfa_grid = default_pfa_grid();
  preset.calibration_noise = preset.config.noise_model;
  return preset;
}

ExperimentPreset mismatch_preset(const std::string& id, double log_variance) {
  const UniformPrior assumed{0.5, 2.0};
  ExperimentPreset preset = uniform_preset(id, 1.8, 40, assumed);
  // Median of the actual noise power at the geometric mean of the assumed
  // interval; log_variance is the variance of the Gaussian exponent.
  const double location = 0.5 * std::log(assumed.delta_min * assumed.delta_max);
  preset.config.noise_model = LogNormalNoise{location, log_variance};
  preset.notes =
      "actual noise power is log-normal: exp(g), g ~ Normal(log_location, "
      "log_variance); log_variance is the variance of the exponent and the "
      "median equals sqrt(delta_min * delta_max) of the assumed prior. "
      "NP-AVE/NP-AVN thresholds are calibrated under the assumed uniform prior.";
  return preset;
}

std::uint64_t count_h1(const std::vector<DetectorOutput>& outputs,
                       const Threshold& threshold) {
  std::uint64_t count = 0;
  for (const auto& output : outputs) {
    if (decide(output, threshold) == Decision::kH1) ++count;
  }
  return count;
}

double binomial_se(double p, std::uint64_t trials) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

ScenarioConfig calibration_config(const ExperimentPreset& preset,
                                  const RunOptions& options) {
  ScenarioConfig config = preset.config;
  config.noise_model = preset.calibration_noise;
  config.master_seed = options.seed;
  return config;
}

std::string format_number(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.10g", value);
  return buffer;
}

}  // namespace

const std::vector<std::string>& preset_ids() {
  static const std::vector<std::string> ids = {"fig1a", "fig1b", "fig2a", "fig2b",
                                               "fig3a", "fig3b", "fig4"};
  return ids;
}

ExperimentPreset make_preset(const std::string& id) {
  if (id == "fig1a") return uniform_preset(id, 0.5, 20, {0.7, 1.3});
  if (id == "fig1b") return uniform_preset(id, 0.5, 20, {0.5, 1.5});
  if (id == "fig2a") return uniform_preset(id, 0.5, 40, {0.5, 1.5});
  if (id == "fig2b") return uniform_preset(id, 1.0, 40, {0.5, 1.5});
  if (id == "fig3a") return mismatch_preset(id, 1.0);
  if (id == "fig3b") return mismatch_preset(id, 0.1);
  if (id == "fig4") {
    ExperimentPreset preset = uniform_preset(id, 0.5, 20, {0.7, 1.3});
    preset.config.interference_variance = 0.3;
    preset.notes =
        "Gaussian interference of variance 0.3 is added under both hypotheses; "
        "detectors are not told about it.";
    return preset;
  }
  std::string valid;
  for (const auto& known : preset_ids()) valid += (valid.empty() ? "" : ", ") + known;
  throw DomainError("unknown experiment '" + id + "'; valid ids: " + valid);
}

std::vector<double> default_pfa_grid() {
  constexpr int kPoints = 15;
  const double lo = std::log(0.01);
  const double hi = std::log(0.9);
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * i / (kPoints - 1));
  }
  grid.back() = 0.9;
  grid.front() = 0.01;
  return grid;
}

void validate_pfa_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw DomainError("pfa grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0)) {
      throw DomainError("pfa grid values must lie in (0, 1)");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw DomainError("pfa grid must be strictly increasing");
    }
  }
}

SimulationRun simulate(const ExperimentPreset& preset, const RunOptions& options) {
  if (options.trials == 0) throw DomainError("trials must be positive");
  SimulationRun run;
  run.config = preset.config;
  run.config.master_seed = options.seed;
  for (const auto& detector : preset.detectors) {
    if (detector.family == DetectorKind::Family::kLrt) {
      run.config.estimation_samples =
          std::max(run.config.estimation_samples, detector.estimation_samples);
    }
  }
  validate(run.config);

  for (const auto& detector : preset.detectors) {
    run.samples.push_back({detector, std::vector<DetectorOutput>(options.trials),
                           std::vector<DetectorOutput>(options.trials)});
  }
  for (Hypothesis hypothesis : {Hypothesis::kH0, Hypothesis::kH1}) {
    const auto role = hypothesis == Hypothesis::kH0 ? StreamRole::kEvaluationH0
                                                    : StreamRole::kEvaluationH1;
    parallel_for(options.trials, options.workers, [&](std::size_t i) {
      Substream rng(options.seed, static_cast<std::uint64_t>(role), i);
      const TrialData trial = generate_trial(run.config, hypothesis, rng);
      for (auto& samples : run.samples) {
        auto& slot = hypothesis == Hypothesis::kH0 ? samples.h0 : samples.h1;
        slot[i] = evaluate_detector(samples.detector, run.config, trial);
      }
    });
  }
  return run;
}

std::vector<Threshold> grid_thresholds(const DetectorKind& detector,
                                       const ExperimentPreset& preset,
                                       const RunOptions& options) {
  const int n = preset.config.n_samples;
  std::vector<Threshold> thresholds;
  switch (detector.family) {
    case DetectorKind::Family::kLrt:
      for (double p : preset.pfa_grid) {
        thresholds.push_back({specfun::chi2_isf(n, p), p,
                              {ThresholdProvenance::Kind::kAnalyticChi2, 0, 0}});
      }
      break;
    case DetectorKind::Family::kLlr:
      for (double p : preset.pfa_grid) {
        thresholds.push_back(llr_threshold(p, n, detector.prior));
      }
      break;
    case DetectorKind::Family::kAve:
    case DetectorKind::Family::kAvn: {
      const auto reports =
          calibrate_grid(detector, calibration_config(preset, options), preset.pfa_grid,
                         options.calibration_trials, options.seed, options.workers,
                         options.cache);
      for (const auto& report : reports) thresholds.push_back(report.threshold);
      break;
    }
  }
  return thresholds;
}

std::vector<RocPoint> roc_points(const ExperimentPreset& preset,
                                 const SimulationRun& run,
                                 const RunOptions& options) {
  std::vector<RocPoint> points;
  for (const auto& samples : run.samples) {
    const auto thresholds = grid_thresholds(samples.detector, preset, options);
    const auto trials = static_cast<std::uint64_t>(samples.h0.size());
    for (const auto& threshold : thresholds) {
      RocPoint point;
      point.detector = samples.detector;
      point.target_pfa = threshold.target_pfa;
      point.trials = trials;
      point.empirical_pfa =
          static_cast<double>(count_h1(samples.h0, threshold)) / static_cast<double>(trials);
      point.empirical_pd =
          static_cast<double>(count_h1(samples.h1, threshold)) / static_cast<double>(trials);
      point.se_pfa = binomial_se(point.empirical_pfa, trials);
      point.se_pd = binomial_se(point.empirical_pd, trials);
      points.push_back(point);
    }
  }
  return points;
}

std::vector<RocPoint> run_roc(const ExperimentPreset& preset, const RunOptions& options) {
  validate_pfa_grid(preset.pfa_grid);
  const SimulationRun run = simulate(preset, options);
  return roc_points(preset, run, options);
}

MatchedPoint matched_operating_point(const DetectorSamples& samples, double pfa) {
  if (!(pfa > 0.0 && pfa < 1.0)) throw DomainError("pfa must lie in (0, 1)");
  std::vector<double> h0;
  h0.reserve(samples.h0.size());
  for (const auto& output : samples.h0) h0.push_back(output.normalized());
  std::sort(h0.begin(), h0.end());
  const double threshold = h0[quantile_index(h0.size(), pfa)];

  const auto m = static_cast<std::uint64_t>(samples.h0.size());
  const auto above_h0 = static_cast<std::uint64_t>(
      h0.end() - std::upper_bound(h0.begin(), h0.end(), threshold));
  std::uint64_t above_h1 = 0;
  for (const auto& output : samples.h1) {
    if (output.normalized() > threshold) ++above_h1;
  }
  MatchedPoint point;
  point.detector = samples.detector;
  point.pfa = pfa;
  point.trials = m;
  point.empirical_pfa = static_cast<double>(above_h0) / static_cast<double>(m);
  point.empirical_pd =
      static_cast<double>(above_h1) / static_cast<double>(samples.h1.size());
  point.se_pd = binomial_se(point.empirical_pd, samples.h1.size());
  return point;
}

PresetRun run_experiment(const ExperimentPreset& preset, const RunOptions& options) {
  validate_pfa_grid(preset.pfa_grid);
  PresetRun result;
  result.preset = preset;
  result.simulation = simulate(preset, options);
  result.points = roc_points(preset, result.simulation, options);
  result.provenance = provenance_record(preset, options);
  return result;
}

PresetRun run_preset(const std::string& id, const RunOptions& options) {
  return run_experiment(make_preset(id), options);
}

std::vector<SnrPoint> pd_vs_snr(const ExperimentPreset& templ,
                                const std::vector<double>& snr_grid,
                                double target_pfa, const RunOptions& options) {
  const auto* uniform = std::get_if<UniformNoise>(&templ.config.noise_model);
  if (uniform == nullptr) {
    throw DomainError("pd_vs_snr needs a uniform noise model to define the SNR");
  }
  if (snr_grid.empty()) throw DomainError("snr grid is empty");
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    if (!(snr_grid[i] >= 0.0) || !std::isfinite(snr_grid[i])) {
      throw DomainError("snr values must be finite and >= 0");
    }
    if (i > 0 && !(snr_grid[i] > snr_grid[i - 1])) {
      throw DomainError("snr grid must be strictly increasing");
    }
  }
  const double mean_noise = 0.5 * (uniform->delta_min + uniform->delta_max);
  std::vector<SnrPoint> out;
  for (double snr : snr_grid) {
    ExperimentPreset cell = templ;
    cell.config.signal_power = snr * mean_noise;
    cell.pfa_grid = {target_pfa};
    for (const auto& point : run_roc(cell, options)) out.push_back({snr, point});
  }
  return out;
}

nlohmann::json provenance_record(const ExperimentPreset& preset,
                                 const RunOptions& options) {
  ScenarioConfig config = preset.config;
  config.master_seed = options.seed;
  nlohmann::json detectors = nlohmann::json::array();
  for (const auto& detector : preset.detectors) detectors.push_back(detector);
  nlohmann::json calibration_noise;
  to_json(calibration_noise, preset.calibration_noise);
  return {{"experiment", preset.id},
          {"code_version", code_version()},
          {"config", config},
          {"calibration_noise_model", calibration_noise},
          {"detectors", detectors},
          {"pfa_grid", preset.pfa_grid},
          {"trials", options.trials},
          {"calibration_trials", options.calibration_trials},
          {"seed", options.seed},
          {"streams",
           {{"generator", "philox4x32-10"},
            {"address", "(seed, experiment_id, trial_index)"},
            {"calibration_experiment_id",
             static_cast<std::uint64_t>(StreamRole::kCalibration)},
            {"h0_experiment_id", static_cast<std::uint64_t>(StreamRole::kEvaluationH0)},
            {"h1_experiment_id", static_cast<std::uint64_t>(StreamRole::kEvaluationH1)}}},
          {"quantile_rule", "ceil((1 - p) * trials)-th order statistic"},
          {"notes", preset.notes}};
}

void write_roc_csv(std::ostream& out, const std::string& experiment,
                   const std::vector<RocPoint>& points, std::uint64_t seed) {
  out << kRocCsvHeader << '\n';
  for (const auto& p : points) {
    out << experiment << ',' << p.detector.label() << ',' << format_number(p.target_pfa)
        << ',' << format_number(p.empirical_pfa) << ',' << format_number(p.empirical_pd)
        << ',' << format_number(p.se_pfa) << ',' << format_number(p.se_pd) << ','
        << p.trials << ',' << seed << '\n';
  }
}

void write_snr_csv(std::ostream& out, const std::string& experiment,
                   const std::vector<SnrPoint>& points, std::uint64_t seed) {
  out << "experiment,snr,detector,target_pfa,empirical_pfa,empirical_pd,se_pfa,se_pd,"
         "trials,seed\n";
  for (const auto& s : points) {
    const auto& p = s.point;
    out << experiment << ',' << format_number(s.snr) << ',' << p.detector.label() << ','
        << format_number(p.target_pfa) << ',' << format_number(p.empirical_pfa) << ','
        << format_number(p.empirical_pd) << ',' << format_number(p.se_pfa) << ','
        << format_number(p.se_pd) << ',' << p.trials << ',' << seed << '\n';
  }
}

std::string code_version() { return std::string("specsense ") + SPECSENSE_VERSION; }

}  // namespace specsense
