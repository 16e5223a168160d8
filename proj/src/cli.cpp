#include "specsense/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "specsense/calibration.hpp"
#include "specsense/errors.hpp"
#include "specsense/evaluation.hpp"
#include "specsense/parallel.hpp"
#include "specsense/quadrature.hpp"
#include "specsense/specfun.hpp"

namespace specsense {
namespace {

namespace fs = std::filesystem;

// Bad flag values found after parsing; reported like parse errors.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Flags {
  std::uint64_t trials = 100000;
  std::uint64_t calibration_trials = 100000;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string pfa_grid;
  std::string detectors;
  std::string prior;
  bool force = false;
  bool no_cache = false;
  unsigned workers = default_workers();

  std::string config_path;
  std::string name;
  std::string experiment;
  std::string detector = "ave";
  double pfa = 0.1;
  std::string snr_grid = "0,0.1,0.2,0.3,0.5,0.75,1";
  std::string preset = "fig1a";
};

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) parts.push_back(part);
  return parts;
}

std::vector<double> parse_reals(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  for (const auto& part : split(text)) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || !std::isfinite(value)) {
      throw UsageError(flag + ": '" + part + "' is not a number");
    }
    values.push_back(value);
  }
  if (values.empty()) throw UsageError(flag + ": empty list");
  return values;
}

std::optional<UniformPrior> parse_prior(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto values = parse_reals(text, "--prior");
  if (values.size() != 2) throw UsageError("--prior takes two values: dmin,dmax");
  const UniformPrior prior{values[0], values[1]};
  try {
    validate(prior);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--prior: ") + e.what());
  }
  return prior;
}

std::optional<UniformPrior> prior_of(const NoiseModel& model) {
  if (const auto* uniform = std::get_if<UniformNoise>(&model)) {
    return UniformPrior{uniform->delta_min, uniform->delta_max};
  }
  return std::nullopt;
}

std::vector<DetectorKind> parse_detectors(const std::string& text,
                                          const std::optional<UniformPrior>& prior) {
  std::vector<DetectorKind> detectors;
  for (const auto& label : split(text)) {
    const bool needs_prior = label.rfind("lrt", 0) != 0;
    if (needs_prior && !prior) {
      throw UsageError("--detectors: '" + label +
                       "' needs a uniform prior; pass --prior dmin,dmax");
    }
    try {
      detectors.push_back(parse_detector(label, prior.value_or(UniformPrior{1.0, 1.0})));
    } catch (const DomainError& e) {
      throw UsageError(std::string("--detectors: ") + e.what());
    }
  }
  if (detectors.empty()) throw UsageError("--detectors: empty list");
  return detectors;
}

std::vector<DetectorKind> default_detectors(const std::optional<UniformPrior>& prior) {
  std::vector<DetectorKind> detectors = {DetectorKind::lrt(10), DetectorKind::lrt(20)};
  if (prior) {
    detectors.push_back(DetectorKind::ave(*prior));
    detectors.push_back(DetectorKind::avn(*prior));
    detectors.push_back(DetectorKind::llr(*prior));
  }
  return detectors;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return j.get<ScenarioConfig>();
}

class Outputs {
 public:
  Outputs(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

  fs::path path(const std::string& file) const { return dir_ / file; }

  // Called for every output before any computation starts.
  void claim(const std::string& file) const {
    if (!force_ && fs::exists(path(file))) {
      throw std::runtime_error(path(file).string() +
                               " already exists; pass --force to overwrite");
    }
  }

  void write(const std::string& file, const std::string& contents) const {
    fs::create_directories(dir_);
    const auto target = path(file);
    auto staging = target;
    staging += ".tmp";
    {
      std::ofstream out(staging, std::ios::binary | std::ios::trunc);
      out << contents;
      if (!out) throw std::runtime_error("cannot write " + staging.string());
    }
    fs::rename(staging, target);
  }

 private:
  fs::path dir_;
  bool force_;
};

std::unique_ptr<CalibrationCache> make_cache(const Flags& flags, const fs::path& out_dir) {
  if (flags.no_cache) return nullptr;
  return std::make_unique<CalibrationCache>(out_dir / ".threshold-cache");
}

RunOptions run_options(const Flags& flags, const CalibrationCache* cache) {
  RunOptions options;
  options.trials = flags.trials;
  options.calibration_trials = flags.calibration_trials;
  options.seed = flags.seed;
  options.workers = flags.workers;
  options.cache = cache;
  return options;
}

void check_counts(const Flags& flags) {
  if (flags.trials == 0) throw UsageError("--trials must be positive");
  if (flags.calibration_trials == 0) throw UsageError("--calibration-trials must be positive");
  if (flags.workers == 0) throw UsageError("--workers must be positive");
}

std::vector<double> grid_or_default(const Flags& flags) {
  if (flags.pfa_grid.empty()) return default_pfa_grid();
  auto grid = parse_reals(flags.pfa_grid, "--pfa-grid");
  try {
    validate_pfa_grid(grid);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--pfa-grid: ") + e.what());
  }
  return grid;
}

// Monte Carlo thresholds need trials * p >= 100 at every grid point.
void check_calibration_budget(const ExperimentPreset& preset, const Flags& flags) {
  const bool calibrated = std::any_of(
      preset.detectors.begin(), preset.detectors.end(),
      [](const DetectorKind& d) { return !d.has_analytic_threshold(); });
  if (calibrated && static_cast<double>(flags.calibration_trials) * preset.pfa_grid.front() < 100.0) {
    throw UsageError("--calibration-trials too small: trials * smallest pfa must be >= 100");
  }
}

std::string roc_csv(const PresetRun& run, const std::string& experiment, std::uint64_t seed) {
  std::ostringstream csv;
  write_roc_csv(csv, experiment, run.points, seed);
  return csv.str();
}

int command_reproduce(const Flags& flags, const Outputs& outputs, const fs::path& out_dir,
                      std::ostream& out) {
  check_counts(flags);
  ExperimentPreset preset = make_preset(flags.experiment);
  if (!flags.pfa_grid.empty()) preset.pfa_grid = grid_or_default(flags);
  if (!flags.detectors.empty()) {
    preset.detectors = parse_detectors(flags.detectors, preset.detectors.back().prior);
  }
  check_calibration_budget(preset, flags);
  const std::string csv_name = preset.id + ".csv";
  const std::string provenance_name = preset.id + ".provenance.json";
  outputs.claim(csv_name);
  outputs.claim(provenance_name);

  const auto cache = make_cache(flags, out_dir);
  const PresetRun run = run_experiment(preset, run_options(flags, cache.get()));
  nlohmann::json provenance = run.provenance;
  provenance["command"] = "reproduce";
  outputs.write(csv_name, roc_csv(run, preset.id, flags.seed));
  outputs.write(provenance_name, provenance.dump(2) + "\n");
  out << "wrote " << outputs.path(csv_name).string() << " (" << run.points.size()
      << " rows)\n";
  return 0;
}

int command_roc(const Flags& flags, const Outputs& outputs, const fs::path& out_dir,
                std::ostream& out) {
  check_counts(flags);
  const auto flag_prior = parse_prior(flags.prior);
  const auto grid = grid_or_default(flags);
  ScenarioConfig config = load_config(flags.config_path);
  const auto prior = flag_prior ? flag_prior : prior_of(config.noise_model);

  ExperimentPreset preset;
  preset.id = flags.name;
  preset.config = config;
  preset.detectors = flags.detectors.empty() ? default_detectors(prior)
                                             : parse_detectors(flags.detectors, prior);
  preset.pfa_grid = grid;
  preset.calibration_noise = config.noise_model;
  check_calibration_budget(preset, flags);
  const std::string csv_name = flags.name + ".csv";
  const std::string provenance_name = flags.name + ".provenance.json";
  outputs.claim(csv_name);
  outputs.claim(provenance_name);

  const auto cache = make_cache(flags, out_dir);
  const PresetRun run = run_experiment(preset, run_options(flags, cache.get()));
  nlohmann::json provenance = run.provenance;
  provenance["command"] = "roc";
  outputs.write(csv_name, roc_csv(run, flags.name, flags.seed));
  outputs.write(provenance_name, provenance.dump(2) + "\n");
  out << "wrote " << outputs.path(csv_name).string() << " (" << run.points.size()
      << " rows)\n";
  return 0;
}

int command_pd_vs_snr(const Flags& flags, const Outputs& outputs, const fs::path& out_dir,
                      std::ostream& out) {
  check_counts(flags);
  const auto snr_grid = parse_reals(flags.snr_grid, "--snr-grid");
  if (!(flags.pfa > 0.0 && flags.pfa < 1.0)) throw UsageError("--pfa must lie in (0, 1)");

  ExperimentPreset templ;
  if (!flags.config_path.empty()) {
    templ.config = load_config(flags.config_path);
    templ.id = flags.name;
    templ.calibration_noise = templ.config.noise_model;
    const auto flag_prior = parse_prior(flags.prior);
    const auto prior = flag_prior ? flag_prior : prior_of(templ.config.noise_model);
    templ.detectors = flags.detectors.empty() ? default_detectors(prior)
                                              : parse_detectors(flags.detectors, prior);
  } else {
    templ = make_preset(flags.preset);
    if (!flags.detectors.empty()) {
      templ.detectors = parse_detectors(flags.detectors, templ.detectors.back().prior);
    }
  }
  if (!std::holds_alternative<UniformNoise>(templ.config.noise_model)) {
    throw UsageError("pd-vs-snr needs a uniform noise model to define the SNR");
  }
  templ.pfa_grid = {flags.pfa};
  check_calibration_budget(templ, flags);
  const std::string csv_name = flags.name + ".csv";
  const std::string provenance_name = flags.name + ".provenance.json";
  outputs.claim(csv_name);
  outputs.claim(provenance_name);

  const auto cache = make_cache(flags, out_dir);
  const auto options = run_options(flags, cache.get());
  const auto points = pd_vs_snr(templ, snr_grid, flags.pfa, options);
  nlohmann::json provenance = provenance_record(templ, options);
  provenance["command"] = "pd-vs-snr";
  provenance["snr_grid"] = snr_grid;
  provenance["target_pfa"] = flags.pfa;
  provenance["snr_definition"] = "signal_power = snr * (delta_min + delta_max) / 2";
  std::ostringstream csv;
  write_snr_csv(csv, flags.name, points, flags.seed);
  outputs.write(csv_name, csv.str());
  outputs.write(provenance_name, provenance.dump(2) + "\n");
  out << "wrote " << outputs.path(csv_name).string() << " (" << points.size() << " rows)\n";
  return 0;
}

int command_calibrate(const Flags& flags, const Outputs& outputs, const fs::path& out_dir,
                      std::ostream& out) {
  if (flags.trials == 0) throw UsageError("--trials must be positive");
  if (flags.detector != "ave" && flags.detector != "avn") {
    throw UsageError("--detector must be ave or avn");
  }
  if (!(flags.pfa > 0.0 && flags.pfa < 1.0)) throw UsageError("--pfa must lie in (0, 1)");
  if (static_cast<double>(flags.trials) * flags.pfa < 100.0) {
    throw UsageError("--trials too small: trials * pfa must be >= 100");
  }
  const auto flag_prior = parse_prior(flags.prior);
  ScenarioConfig config = load_config(flags.config_path);
  config.master_seed = flags.seed;
  const auto prior = flag_prior ? flag_prior : prior_of(config.noise_model);
  if (!prior) throw UsageError("calibrate needs --prior for a non-uniform noise model");
  const DetectorKind detector = parse_detector(flags.detector, *prior);
  const std::string name = (flags.name.empty() ? "calibration-" + flags.detector : flags.name) + ".json";
  outputs.claim(name);

  const auto cache = make_cache(flags, out_dir);
  const auto reports = calibrate_grid(detector, config, {flags.pfa}, flags.trials,
                                      flags.seed, flags.workers, cache.get());
  nlohmann::json record = reports.front();
  record["detector"] = detector;
  record["config"] = config;
  record["code_version"] = code_version();
  outputs.write(name, record.dump(2) + "\n");
  out << std::setprecision(10) << "threshold " << reports.front().threshold.value
      << " (empirical pfa " << reports.front().empirical_pfa_at_threshold << ", se "
      << reports.front().standard_error << ")\n"
      << "wrote " << outputs.path(name).string() << "\n";
  return 0;
}

int command_specfun_check(std::ostream& out) {
  bool ok = true;
  out << std::left << std::setw(14) << "function" << std::setw(8) << "points"
      << std::setw(14) << "max error" << "tolerance\n";
  for (const auto& line : specfun_check()) {
    out << std::left << std::setw(14) << line.function << std::setw(8) << line.points
        << std::setw(14) << std::setprecision(3) << std::scientific << line.max_error
        << line.tolerance << (line.ok() ? "" : "  FAIL") << "\n";
    out << std::defaultfloat;
    ok = ok && line.ok();
  }
  return ok ? 0 : 1;
}

double relative_error(double value, double reference) {
  return std::abs(value - reference) / std::max(std::abs(reference), 1e-300);
}

}  // namespace

std::vector<SpecfunCheckLine> specfun_check() {
  std::vector<SpecfunCheckLine> lines;

  SpecfunCheckLine erf_line{"erf", 0.0, 1e-8, 0};
  for (double x = 0.1; x <= 4.0 + 1e-12; x += 0.3) {
    const auto q = quadrature::integrate(
        [](double t) { return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-t * t); }, 0.0, x);
    erf_line.max_error = std::max(erf_line.max_error, relative_error(specfun::erf(x), q.value));
    ++erf_line.points;
  }
  lines.push_back(erf_line);

  SpecfunCheckLine gamma_line{"upper_gamma", 0.0, 1e-8, 0};
  for (double a = -3.0; a <= 3.0 + 1e-12; a += 0.5) {
    for (double z : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0}) {
      const auto q = quadrature::integrate_to_infinity(
          [a](double t) { return std::exp((a - 1.0) * std::log(t) - t); }, z);
      gamma_line.max_error =
          std::max(gamma_line.max_error, relative_error(specfun::upper_gamma(a, z), q.value));
      ++gamma_line.points;
    }
  }
  lines.push_back(gamma_line);

  SpecfunCheckLine en_line{"expint_en", 0.0, 1e-8, 0};
  for (int n = -18; n <= 1; ++n) {
    for (double z : {0.1, 1.0, 10.0}) {
      const auto q = quadrature::integrate_to_infinity(
          [n, z](double t) { return std::exp(-z * t - n * std::log(t)); }, 1.0);
      en_line.max_error =
          std::max(en_line.max_error, relative_error(specfun::expint_en(n, z), q.value));
      ++en_line.points;
    }
  }
  lines.push_back(en_line);

  SpecfunCheckLine sf_line{"chi2_sf", 0.0, 1e-8, 0};
  SpecfunCheckLine isf_line{"chi2_isf", 0.0, 1e-10, 0};
  for (int n : {1, 2, 3, 4, 10, 20, 40, 80}) {
    for (double t : {0.5, 1.0, 5.0, 10.0, 20.0, 40.0, 60.0}) {
      const auto q = quadrature::integrate_to_infinity(
          [n](double s) { return specfun::chi2_pdf(n, s); }, t);
      sf_line.max_error = std::max(sf_line.max_error, relative_error(specfun::chi2_sf(n, t), q.value));
      ++sf_line.points;
    }
    for (double p : {0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 0.999}) {
      isf_line.max_error = std::max(
          isf_line.max_error, std::abs(specfun::chi2_sf(n, specfun::chi2_isf(n, p)) - p));
      ++isf_line.points;
    }
  }
  lines.push_back(sf_line);
  lines.push_back(isf_line);
  return lines;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags flags;
  CLI::App app{"Energy detection under noise-power uncertainty", "specsense"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  const auto add_run_flags = [&flags](CLI::App* command) {
    command->add_option("--trials", flags.trials, "Monte Carlo trials per hypothesis")
        ->capture_default_str();
    command->add_option("--calibration-trials", flags.calibration_trials,
                        "H0 trials for NP-AVE/NP-AVN thresholds")
        ->capture_default_str();
    command->add_option("--seed", flags.seed, "master seed")->capture_default_str();
    command->add_option("--out-dir", flags.out_dir,
                        "output directory (SPECSENSE_OUT_DIR overrides)")
        ->capture_default_str();
    command->add_option("--detectors", flags.detectors,
                        "comma list: lrt:K=<k>, ave, avn, llr");
    command->add_flag("--force", flags.force, "overwrite existing outputs");
    command->add_flag("--no-cache", flags.no_cache, "do not read or write the threshold cache");
    command->add_option("--workers", flags.workers, "worker threads")->capture_default_str();
  };

  auto* reproduce = app.add_subcommand("reproduce", "run a preset experiment");
  reproduce->add_option("experiment", flags.experiment, "preset id")
      ->required()
      ->check(CLI::IsMember(preset_ids()));
  reproduce->add_option("--pfa-grid", flags.pfa_grid, "comma list of target Pfa");
  add_run_flags(reproduce);

  auto* roc = app.add_subcommand("roc", "run a custom scenario");
  roc->add_option("--config", flags.config_path, "scenario JSON")->required();
  roc->add_option("--name", flags.name, "output base name")->capture_default_str();
  roc->add_option("--pfa-grid", flags.pfa_grid, "comma list of target Pfa");
  roc->add_option("--prior", flags.prior, "assumed noise interval dmin,dmax");
  add_run_flags(roc);

  auto* sweep = app.add_subcommand("pd-vs-snr", "detection probability against SNR");
  sweep->add_option("--config", flags.config_path, "scenario JSON (uniform noise)");
  sweep->add_option("--preset", flags.preset, "preset used as template without --config")
      ->check(CLI::IsMember(preset_ids()))
      ->capture_default_str();
  sweep->add_option("--snr-grid", flags.snr_grid, "comma list of SNR values")
      ->capture_default_str();
  sweep->add_option("--pfa", flags.pfa, "target false-alarm probability")
      ->capture_default_str();
  sweep->add_option("--name", flags.name, "output base name");
  sweep->add_option("--prior", flags.prior, "assumed noise interval dmin,dmax");
  add_run_flags(sweep);

  auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo threshold for NP-AVE/NP-AVN");
  calibrate->add_option("--config", flags.config_path, "scenario JSON")->required();
  calibrate->add_option("--detector", flags.detector, "ave or avn")->capture_default_str();
  calibrate->add_option("--pfa", flags.pfa, "target false-alarm probability")
      ->capture_default_str();
  calibrate->add_option("--prior", flags.prior, "assumed noise interval dmin,dmax");
  calibrate->add_option("--name", flags.name, "output base name");
  calibrate->add_option("--trials", flags.trials, "calibration trials")->capture_default_str();
  calibrate->add_option("--seed", flags.seed, "master seed")->capture_default_str();
  calibrate->add_option("--out-dir", flags.out_dir, "output directory")->capture_default_str();
  calibrate->add_flag("--force", flags.force, "overwrite existing output");
  calibrate->add_flag("--no-cache", flags.no_cache, "do not use the threshold cache");
  calibrate->add_option("--workers", flags.workers, "worker threads")->capture_default_str();

  auto* check = app.add_subcommand("specfun-check", "special functions against quadrature");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e, out, err);
    return status == 0 ? 0 : 2;
  }

  fs::path out_dir = flags.out_dir;
  if (const char* env = std::getenv("SPECSENSE_OUT_DIR"); env != nullptr && *env != '\0') {
    out_dir = env;
  }
  const Outputs outputs(out_dir, flags.force);

  try {
    if (*check) return command_specfun_check(out);
    if (*reproduce) return command_reproduce(flags, outputs, out_dir, out);
    if (*roc) {
      if (flags.name.empty()) flags.name = "roc";
      return command_roc(flags, outputs, out_dir, out);
    }
    if (*sweep) {
      if (flags.name.empty()) flags.name = "pd_vs_snr";
      return command_pd_vs_snr(flags, outputs, out_dir, out);
    }
    if (*calibrate) return command_calibrate(flags, outputs, out_dir, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.field() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace specsense
