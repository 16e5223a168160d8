#include "specsense/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "specsense/errors.hpp"
#include "specsense/parallel.hpp"

namespace specsense {

DetectorOutput evaluate_detector(const DetectorKind& detector,
                                 const ScenarioConfig& config,
                                 const TrialData& trial) {
  const std::span<const double> observation(trial.observation);
  switch (detector.family) {
    case DetectorKind::Family::kLrt: {
      const auto k = static_cast<std::size_t>(detector.estimation_samples);
      if (trial.training.size() < k) {
        throw DomainError("trial carries fewer training samples than NP-LRT needs");
      }
      return {energy_statistic(observation),
              ml_noise_estimate(std::span<const double>(trial.training).first(k))};
    }
    case DetectorKind::Family::kAve:
      return {ave_log_ratio(observation, config.signal_power, detector.prior), 1.0};
    case DetectorKind::Family::kAvn:
      return {avn_log_ratio(energy_statistic(observation), config.n_samples,
                            config.signal_power, detector.prior),
              1.0};
    case DetectorKind::Family::kLlr:
      return {energy_statistic(observation), 1.0};
  }
  throw DomainError("unknown detector family");
}

Decision decide(double statistic, const Threshold& threshold) {
  return statistic > threshold.value ? Decision::kH1 : Decision::kH0;
}

Decision decide(const DetectorOutput& output, const Threshold& threshold) {
  return output.statistic > output.threshold_scale * threshold.value ? Decision::kH1
                                                                     : Decision::kH0;
}

std::size_t quantile_index(std::size_t m, double target_pfa) {
  if (m == 0) throw DomainError("quantile of an empty sample");
  // The small slack keeps e.g. (1 - 0.1) * 1e5 from rounding up past 90000.
  const double position = (1.0 - target_pfa) * static_cast<double>(m);
  auto k = static_cast<std::size_t>(std::ceil(position - 1e-9 * std::max(1.0, position)));
  k = std::clamp<std::size_t>(k, 1, m);
  return k - 1;
}

std::vector<double> calibration_statistics(const DetectorKind& detector,
                                           const ScenarioConfig& config,
                                           std::uint64_t trials, std::uint64_t seed,
                                           unsigned workers) {
  validate(config);
  std::vector<double> statistics(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    Substream rng(seed, static_cast<std::uint64_t>(StreamRole::kCalibration), i);
    const TrialData trial = generate_trial(config, Hypothesis::kH0, rng);
    statistics[i] = evaluate_detector(detector, config, trial).normalized();
  });
  std::sort(statistics.begin(), statistics.end());
  return statistics;
}

CalibrationReport report_from_sorted(const std::vector<double>& sorted,
                                     double target_pfa, std::uint64_t seed) {
  const std::size_t m = sorted.size();
  const double value = sorted[quantile_index(m, target_pfa)];
  const auto above = static_cast<std::size_t>(
      sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), value));
  CalibrationReport report;
  report.threshold = {value, target_pfa,
                      {ThresholdProvenance::Kind::kMonteCarlo, m, seed}};
  report.trials = m;
  report.empirical_pfa_at_threshold = static_cast<double>(above) / static_cast<double>(m);
  report.standard_error = std::sqrt(target_pfa * (1.0 - target_pfa) / static_cast<double>(m));
  return report;
}

namespace {

void check_request(const DetectorKind& detector, double target_pfa,
                   std::uint64_t trials) {
  if (detector.has_analytic_threshold()) {
    throw DomainError(detector.display_name() +
                      " has an analytic threshold; Monte Carlo calibration is "
                      "only for NP-AVE and NP-AVN");
  }
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw DomainError("target_pfa must lie in (0, 1)");
  }
  if (static_cast<double>(trials) * target_pfa < 100.0) {
    throw DomainError("calibration needs trials * target_pfa >= 100");
  }
}

}  // namespace

CalibrationReport calibrate_mc(const DetectorKind& detector,
                               const ScenarioConfig& config, double target_pfa,
                               std::uint64_t trials, std::uint64_t seed,
                               unsigned workers) {
  check_request(detector, target_pfa, trials);
  const auto sorted = calibration_statistics(detector, config, trials, seed, workers);
  return report_from_sorted(sorted, target_pfa, seed);
}

std::vector<CalibrationReport> calibrate_grid(const DetectorKind& detector,
                                              const ScenarioConfig& config,
                                              const std::vector<double>& grid,
                                              std::uint64_t trials, std::uint64_t seed,
                                              unsigned workers,
                                              const CalibrationCache* cache) {
  for (double p : grid) check_request(detector, p, trials);
  std::vector<std::optional<CalibrationReport>> found(grid.size());
  std::vector<std::string> keys(grid.size());
  bool complete = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (cache == nullptr) {
      complete = false;
      continue;
    }
    keys[i] = calibration_cache_key(detector, config, grid[i], trials, seed);
    found[i] = cache->load(keys[i]);
    complete = complete && found[i].has_value();
  }
  std::vector<double> sorted;
  if (!complete) sorted = calibration_statistics(detector, config, trials, seed, workers);

  std::vector<CalibrationReport> reports;
  reports.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (found[i]) {
      reports.push_back(*found[i]);
      continue;
    }
    reports.push_back(report_from_sorted(sorted, grid[i], seed));
    if (cache != nullptr) cache->store(keys[i], reports.back());
  }
  return reports;
}

std::string calibration_cache_key(const DetectorKind& detector,
                                  const ScenarioConfig& config, double target_pfa,
                                  std::uint64_t trials, std::uint64_t seed) {
  const nlohmann::json identity = {{"detector", detector},
                                   {"config", config},
                                   {"target_pfa", target_pfa},
                                   {"trials", trials},
                                   {"seed", seed}};
  // FNV-1a, 64 bit.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : identity.dump()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

CalibrationCache::CalibrationCache(std::filesystem::path directory)
    : directory_(std::move(directory)) {}

std::filesystem::path CalibrationCache::path_for(const std::string& key) const {
  return directory_ / ("calibration-" + key + ".json");
}

std::optional<CalibrationReport> CalibrationCache::load(const std::string& key) const {
  std::ifstream in(path_for(key));
  if (!in) return std::nullopt;
  try {
    return nlohmann::json::parse(in).get<CalibrationReport>();
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are recomputed
  }
}

void CalibrationCache::store(const std::string& key,
                             const CalibrationReport& report) const {
  std::filesystem::create_directories(directory_);
  const auto target = path_for(key);
  auto staging = target;
  staging += ".tmp";
  {
    std::ofstream out(staging, std::ios::trunc);
    out << nlohmann::json(report).dump(2) << '\n';
  }
  std::filesystem::rename(staging, target);
}

void to_json(nlohmann::json& j, const CalibrationReport& report) {
  j = {{"threshold", report.threshold},
       {"trials", report.trials},
       {"empirical_pfa_at_threshold", report.empirical_pfa_at_threshold},
       {"standard_error", report.standard_error}};
}

void from_json(const nlohmann::json& j, CalibrationReport& report) {
  report.threshold = j.at("threshold").get<Threshold>();
  report.trials = j.at("trials").get<std::uint64_t>();
  report.empirical_pfa_at_threshold = j.at("empirical_pfa_at_threshold").get<double>();
  report.standard_error = j.at("standard_error").get<double>();
}

}  // namespace specsense
