#include "specsense/calibration.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "specsense/errors.hpp"
#include "specsense/specfun.hpp"

using namespace specsense;

namespace {

const UniformPrior kNarrow{0.7, 1.3};

ScenarioConfig fig1a_like() {
  ScenarioConfig config;
  config.signal_power = 0.5;
  config.n_samples = 20;
  config.noise_model = UniformNoise{0.7, 1.3};
  config.estimation_samples = 10;
  return config;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("specsense-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Decide, TieRule) {
  const Threshold t{4.0, 0.1, {}};
  EXPECT_EQ(decide(5.0, t), Decision::kH1);
  EXPECT_EQ(decide(3.0, t), Decision::kH0);
  EXPECT_EQ(decide(4.0, t), Decision::kH0);
  EXPECT_EQ(decide(DetectorOutput{8.0, 2.0}, t), Decision::kH0);
  EXPECT_EQ(decide(DetectorOutput{8.1, 2.0}, t), Decision::kH1);
}

TEST(QuantileIndex, OrderStatistic) {
  EXPECT_EQ(quantile_index(100000, 0.1), 89999u);
  EXPECT_EQ(quantile_index(10, 0.5), 4u);
  EXPECT_EQ(quantile_index(3, 0.1), 2u);
  EXPECT_EQ(quantile_index(1000, 0.999), 0u);
  EXPECT_THROW(quantile_index(0, 0.1), DomainError);
}

TEST(EvaluateDetector, LrtUsesTrainingPrefix) {
  ScenarioConfig config = fig1a_like();
  config.estimation_samples = 20;
  Substream rng(1, 1, 1);
  const auto trial = generate_trial(config, Hypothesis::kH0, rng);
  const auto out = evaluate_detector(DetectorKind::lrt(10), config, trial);
  EXPECT_EQ(out.statistic, energy_statistic(trial.observation));
  EXPECT_EQ(out.threshold_scale,
            ml_noise_estimate(std::span<const double>(trial.training).first(10)));
  EXPECT_THROW(evaluate_detector(DetectorKind::lrt(30), config, trial), DomainError);
  const auto llr = evaluate_detector(DetectorKind::llr(kNarrow), config, trial);
  EXPECT_EQ(llr.statistic, out.statistic);
  EXPECT_EQ(llr.threshold_scale, 1.0);
}

TEST(Calibration, EnergyQuantileMatchesChiSquare) {
  ScenarioConfig config;
  config.n_samples = 20;
  config.noise_model = FixedNoise{1.0};
  const std::uint64_t m = 200000;
  const auto sorted = calibration_statistics(DetectorKind::llr({1.0, 1.0}), config, m, 5);
  const auto report = report_from_sorted(sorted, 0.1, 5);
  const double q = specfun::chi2_isf(20, 0.1);
  const double quantile_se = std::sqrt(0.09 / m) / specfun::chi2_pdf(20, q);
  EXPECT_NEAR(report.threshold.value, q, 3 * quantile_se);
  EXPECT_EQ(report.threshold.provenance.kind, ThresholdProvenance::Kind::kMonteCarlo);
}

TEST(Calibration, DeterministicAndWorkerIndependent) {
  const auto detector = DetectorKind::ave(kNarrow);
  const auto a = calibrate_mc(detector, fig1a_like(), 0.1, 5000, 17, 1);
  const auto b = calibrate_mc(detector, fig1a_like(), 0.1, 5000, 17, 1);
  const auto c = calibrate_mc(detector, fig1a_like(), 0.1, 5000, 17, 3);
  EXPECT_EQ(a.threshold.value, b.threshold.value);
  EXPECT_EQ(a.threshold.value, c.threshold.value);
  const auto d = calibrate_mc(detector, fig1a_like(), 0.1, 5000, 18, 1);
  EXPECT_NE(a.threshold.value, d.threshold.value);
}

TEST(Calibration, MedianAtHalf) {
  const auto detector = DetectorKind::avn(kNarrow);
  const auto sorted = calibration_statistics(detector, fig1a_like(), 1001, 3);
  EXPECT_EQ(calibrate_mc(detector, fig1a_like(), 0.5, 1001, 3).threshold.value, sorted[500]);
}

TEST(Calibration, ReportFields) {
  const auto report = calibrate_mc(DetectorKind::avn(kNarrow), fig1a_like(), 0.2, 4000, 9);
  EXPECT_EQ(report.trials, 4000u);
  EXPECT_DOUBLE_EQ(report.standard_error, std::sqrt(0.2 * 0.8 / 4000));
  EXPECT_NEAR(report.empirical_pfa_at_threshold, 0.2, 1.0 / 4000);
  EXPECT_EQ(report.threshold.provenance.trials, 4000u);
  EXPECT_EQ(report.threshold.provenance.seed, 9u);
  const nlohmann::json j = report;
  EXPECT_EQ(j.get<CalibrationReport>().threshold.value, report.threshold.value);
}

TEST(Calibration, RejectsMisuse) {
  EXPECT_THROW(calibrate_mc(DetectorKind::lrt(10), fig1a_like(), 0.1, 10000, 1), DomainError);
  EXPECT_THROW(calibrate_mc(DetectorKind::llr(kNarrow), fig1a_like(), 0.1, 10000, 1),
               DomainError);
  EXPECT_THROW(calibrate_mc(DetectorKind::ave(kNarrow), fig1a_like(), 0.01, 9999, 1),
               DomainError);
  EXPECT_THROW(calibrate_mc(DetectorKind::ave(kNarrow), fig1a_like(), 1.0, 10000, 1),
               DomainError);
  auto bad = fig1a_like();
  bad.n_samples = 0;
  EXPECT_THROW(calibrate_mc(DetectorKind::ave(kNarrow), bad, 0.1, 10000, 1), ConfigError);
}

TEST(Calibration, ThresholdsDecreaseWithPfa) {
  const auto reports = calibrate_grid(DetectorKind::ave(kNarrow), fig1a_like(),
                                      {0.05, 0.1, 0.3}, 20000, 4);
  EXPECT_GT(reports[0].threshold.value, reports[1].threshold.value);
  EXPECT_GT(reports[1].threshold.value, reports[2].threshold.value);
}

TEST(Calibration, ValidatesOnFreshStreams) {
  const std::uint64_t m = 20000;
  for (const auto& detector : {DetectorKind::ave(kNarrow), DetectorKind::avn(kNarrow)}) {
    const auto reports = calibrate_grid(detector, fig1a_like(), {0.05, 0.1, 0.3}, m, 12);
    for (const auto& report : reports) {
      std::uint64_t alarms = 0;
      for (std::uint64_t i = 0; i < m; ++i) {
        Substream rng(12, static_cast<std::uint64_t>(StreamRole::kEvaluationH0), i);
        const auto trial = generate_trial(fig1a_like(), Hypothesis::kH0, rng);
        if (decide(evaluate_detector(detector, fig1a_like(), trial), report.threshold) ==
            Decision::kH1) {
          ++alarms;
        }
      }
      const double p = report.threshold.target_pfa;
      EXPECT_NEAR(static_cast<double>(alarms) / m, p, 3 * std::sqrt(p * (1 - p) / m))
          << detector.label() << " " << p;
    }
  }
}

TEST(Calibration, GridMatchesSingleCalls) {
  const auto detector = DetectorKind::avn(kNarrow);
  const auto grid = calibrate_grid(detector, fig1a_like(), {0.05, 0.3}, 3000, 2);
  EXPECT_EQ(grid[0].threshold.value,
            calibrate_mc(detector, fig1a_like(), 0.05, 3000, 2).threshold.value);
  EXPECT_EQ(grid[1].threshold.value,
            calibrate_mc(detector, fig1a_like(), 0.3, 3000, 2).threshold.value);
}

TEST(Cache, KeySeparatesInputs) {
  const auto detector = DetectorKind::ave(kNarrow);
  const auto base = calibration_cache_key(detector, fig1a_like(), 0.1, 1000, 1);
  EXPECT_EQ(base.size(), 16u);
  EXPECT_EQ(base, calibration_cache_key(detector, fig1a_like(), 0.1, 1000, 1));
  EXPECT_NE(base, calibration_cache_key(DetectorKind::avn(kNarrow), fig1a_like(), 0.1, 1000, 1));
  EXPECT_NE(base, calibration_cache_key(detector, fig1a_like(), 0.2, 1000, 1));
  EXPECT_NE(base, calibration_cache_key(detector, fig1a_like(), 0.1, 1001, 1));
  EXPECT_NE(base, calibration_cache_key(detector, fig1a_like(), 0.1, 1000, 2));
  auto other = fig1a_like();
  other.interference_variance = 0.3;
  EXPECT_NE(base, calibration_cache_key(detector, other, 0.1, 1000, 1));
}

TEST(Cache, StoresAndReuses) {
  const auto dir = fresh_dir("cache-test");
  const CalibrationCache cache(dir);
  const auto detector = DetectorKind::ave(kNarrow);
  const auto first = calibrate_grid(detector, fig1a_like(), {0.1}, 2000, 6, 1, &cache);
  const auto key = calibration_cache_key(detector, fig1a_like(), 0.1, 2000, 6);
  ASSERT_TRUE(std::filesystem::exists(dir / ("calibration-" + key + ".json")));
  const auto loaded = cache.load(key);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->threshold.value, first[0].threshold.value);

  // A hit is returned as stored, without recomputation.
  CalibrationReport planted = first[0];
  planted.threshold.value = 123.0;
  cache.store(key, planted);
  EXPECT_EQ(calibrate_grid(detector, fig1a_like(), {0.1}, 2000, 6, 1, &cache)[0].threshold.value,
            123.0);

  // Unreadable entries are recomputed.
  std::ofstream(dir / ("calibration-" + key + ".json")) << "{not json";
  EXPECT_FALSE(cache.load(key).has_value());
  EXPECT_EQ(calibrate_grid(detector, fig1a_like(), {0.1}, 2000, 6, 1, &cache)[0].threshold.value,
            first[0].threshold.value);
  std::filesystem::remove_all(dir);
}
