#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "specsense/detectors.hpp"
#include "specsense/noise_model.hpp"

namespace specsense {

class CalibrationCache;

/// Substream experiment ids. Calibration and the two evaluation hypotheses
/// never share a stream under the same master seed.
enum class StreamRole : std::uint64_t {
  kCalibration = 1,
  kEvaluationH0 = 2,
  kEvaluationH1 = 3,
};

/// A detector's output for one trial. The decision is
/// statistic > threshold_scale * threshold.value; threshold_scale is the
/// trial's noise estimate for NP-LRT and 1 otherwise.
struct DetectorOutput {
  double statistic = 0.0;
  double threshold_scale = 1.0;

  double normalized() const { return statistic / threshold_scale; }
};

/// Evaluates `detector` on one trial under the scenario's signal power.
/// NP-LRT uses the first K training samples.
DetectorOutput evaluate_detector(const DetectorKind& detector,
                                 const ScenarioConfig& config,
                                 const TrialData& trial);

enum class Decision { kH0, kH1 };

/// H1 iff statistic > threshold.value (ties go to H0).
Decision decide(double statistic, const Threshold& threshold);
Decision decide(const DetectorOutput& output, const Threshold& threshold);

struct CalibrationReport {
  Threshold threshold;
  std::uint64_t trials = 0;
  double empirical_pfa_at_threshold = 0.0;
  double standard_error = 0.0;
};

/// Index into an ascending sample of size m of the ceil((1-p) m)-th order
/// statistic.
std::size_t quantile_index(std::size_t m, double target_pfa);

/// Detector statistics over `trials` H0 trials drawn from the calibration
/// substreams of `seed`, sorted ascending.
std::vector<double> calibration_statistics(const DetectorKind& detector,
                                           const ScenarioConfig& config,
                                           std::uint64_t trials, std::uint64_t seed,
                                           unsigned workers = 1);

/// Builds the report for one target from already sorted statistics.
CalibrationReport report_from_sorted(const std::vector<double>& sorted,
                                     double target_pfa, std::uint64_t seed);

/// Monte Carlo threshold for NP-AVE or NP-AVN. Deterministic in
/// (detector, config, target_pfa, trials, seed); independent of `workers`.
CalibrationReport calibrate_mc(const DetectorKind& detector,
                               const ScenarioConfig& config, double target_pfa,
                               std::uint64_t trials, std::uint64_t seed,
                               unsigned workers = 1);

/// Calibrates every target in `grid` from one shared set of H0 statistics.
/// Entry i equals calibrate_mc(..., grid[i], trials, seed). When `cache` is
/// given, hits are reused and misses are stored.
std::vector<CalibrationReport> calibrate_grid(const DetectorKind& detector,
                                              const ScenarioConfig& config,
                                              const std::vector<double>& grid,
                                              std::uint64_t trials, std::uint64_t seed,
                                              unsigned workers = 1,
                                              const CalibrationCache* cache = nullptr);

/// Stable hex digest of (detector, config, target_pfa, trials, seed).
std::string calibration_cache_key(const DetectorKind& detector,
                                  const ScenarioConfig& config, double target_pfa,
                                  std::uint64_t trials, std::uint64_t seed);

/// Directory of cached CalibrationReport JSON files, one per key.
class CalibrationCache {
 public:
  explicit CalibrationCache(std::filesystem::path directory);

  std::optional<CalibrationReport> load(const std::string& key) const;
  void store(const std::string& key, const CalibrationReport& report) const;
  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path directory_;
};

void to_json(nlohmann::json& j, const CalibrationReport& report);
void from_json(const nlohmann::json& j, CalibrationReport& report);

}  // namespace specsense
