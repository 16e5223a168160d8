#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "specsense/calibration.hpp"
#include "specsense/detectors.hpp"
#include "specsense/noise_model.hpp"

namespace specsense {

struct ExperimentPreset {
  std::string id;
  ScenarioConfig config;
  std::vector<DetectorKind> detectors;
  std::vector<double> pfa_grid;
  /// Noise model used when calibrating NP-AVE / NP-AVN. Equals the scenario's
  /// model except in the mismatch presets, where the designer calibrates
  /// under the assumed uniform prior.
  NoiseModel calibration_noise;
  std::string notes;
};

/// fig1a, fig1b, fig2a, fig2b, fig3a, fig3b, fig4.
const std::vector<std::string>& preset_ids();
/// Throws DomainError listing the valid ids for an unknown id.
ExperimentPreset make_preset(const std::string& id);

/// 15 log-spaced false-alarm targets from 0.01 to 0.9.
std::vector<double> default_pfa_grid();

/// Validates a false-alarm grid: non-empty, strictly increasing, inside (0, 1).
void validate_pfa_grid(const std::vector<double>& grid);

struct RunOptions {
  std::uint64_t trials = 100000;
  std::uint64_t calibration_trials = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  const CalibrationCache* cache = nullptr;
};

struct RocPoint {
  DetectorKind detector;
  double target_pfa = 0.0;
  double empirical_pfa = 0.0;
  double empirical_pd = 0.0;
  double se_pfa = 0.0;
  double se_pd = 0.0;
  std::uint64_t trials = 0;
};

/// Per-trial outputs of one detector on the evaluation streams.
struct DetectorSamples {
  DetectorKind detector;
  std::vector<DetectorOutput> h0;
  std::vector<DetectorOutput> h1;
};

struct SimulationRun {
  ScenarioConfig config;  // as simulated (seed and training length resolved)
  std::vector<DetectorSamples> samples;
};

/// Draws `trials` H0 and `trials` H1 trials from the evaluation substreams
/// and evaluates every detector of the preset on each. All detectors see the
/// same trials.
SimulationRun simulate(const ExperimentPreset& preset, const RunOptions& options);

/// Thresholds for one detector over the preset grid: chi-square for NP-LRT
/// (applied per trial against the noise estimate), closed form for NP-LLR,
/// Monte Carlo on the calibration substreams for NP-AVE / NP-AVN.
std::vector<Threshold> grid_thresholds(const DetectorKind& detector,
                                       const ExperimentPreset& preset,
                                       const RunOptions& options);

std::vector<RocPoint> roc_points(const ExperimentPreset& preset,
                                 const SimulationRun& run,
                                 const RunOptions& options);

std::vector<RocPoint> run_roc(const ExperimentPreset& preset, const RunOptions& options);

/// A point of the empirical ROC curve read at a given empirical false-alarm
/// rate: the threshold is the H0 sample quantile of the detector's
/// normalized statistic, so detectors whose nominal threshold misses its
/// target are still compared at equal false-alarm rates.
struct MatchedPoint {
  DetectorKind detector;
  double pfa = 0.0;
  double empirical_pfa = 0.0;
  double empirical_pd = 0.0;
  double se_pd = 0.0;
  std::uint64_t trials = 0;
};

MatchedPoint matched_operating_point(const DetectorSamples& samples, double pfa);

struct PresetRun {
  ExperimentPreset preset;
  SimulationRun simulation;
  std::vector<RocPoint> points;
  nlohmann::json provenance;
};

PresetRun run_preset(const std::string& id, const RunOptions& options);
/// Same, for a preset built by the caller (custom configurations).
PresetRun run_experiment(const ExperimentPreset& preset, const RunOptions& options);

struct SnrPoint {
  double snr = 0.0;
  RocPoint point;
};

/// Pd at a fixed target false-alarm rate as the SNR varies; each SNR sets
/// signal_power = snr * (delta_min + delta_max) / 2 on the template's uniform
/// noise model. All SNR values reuse the same substreams.
std::vector<SnrPoint> pd_vs_snr(const ExperimentPreset& templ,
                                const std::vector<double>& snr_grid,
                                double target_pfa, const RunOptions& options);

nlohmann::json provenance_record(const ExperimentPreset& preset,
                                 const RunOptions& options);

inline constexpr const char* kRocCsvHeader =
    "experiment,detector,target_pfa,empirical_pfa,empirical_pd,se_pfa,se_pd,trials,seed";

void write_roc_csv(std::ostream& out, const std::string& experiment,
                   const std::vector<RocPoint>& points, std::uint64_t seed);
void write_snr_csv(std::ostream& out, const std::string& experiment,
                   const std::vector<SnrPoint>& points, std::uint64_t seed);

std::string code_version();

}  // namespace specsense
