#include "msd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace msd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer '" + value + "' for " + key);
  }
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number '" + value + "' for " + key);
  }
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad seed '" + value + "' for " + key);
  }
}

std::vector<int> parse_n_sweep(const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto range = item.find("..");
    if (range != std::string::npos) {
      const int lo = parse_int(item.substr(0, range), "n_sweep");
      const int hi = parse_int(item.substr(range + 2), "n_sweep");
      if (hi < lo) throw std::invalid_argument("n_sweep: empty range " + item);
      for (int n = lo; n <= hi; ++n) out.push_back(n);
    } else {
      out.push_back(parse_int(item, "n_sweep"));
    }
  }
  if (out.empty()) throw std::invalid_argument("n_sweep: no values");
  return out;
}

double energy_total_for(const ExperimentConfig& config, int n) {
  return config.energy_rule == EnergyRule::kProportionalToActive
             ? static_cast<double>(n)
             : config.energy_total;
}

ThresholdParams sweep_params(const ExperimentConfig& config, int n) {
  const NoiseSpec noise = NoiseSpec::gaussian(config.sigma);
  const double total = energy_total_for(config, n);
  if (config.mode == ThresholdMode::kTheorem1)
    return ThresholdParams::uncalibrated(config.alpha, n, config.num_subspaces,
                                         config.subspace_dim, total, noise);
  return ThresholdParams::calibrated(config.alpha, n, config.num_subspaces,
                                     config.subspace_dim, total, noise, config.c1);
}

// One Monte Carlo draw: pattern, equal-split coefficients, noisy observation,
// statistics. Everything derives from the single seed.
struct TrialDraw {
  std::vector<int> pattern;
  std::vector<double> stats;
};

TrialDraw run_trial(const SubspaceCollection& collection, int n, double total_energy,
                    double sigma, std::uint64_t seed) {
  RngStream rng(seed);
  const ActivityPattern pattern = sample_activity_pattern(collection.size(), n, rng);
  const auto energies = allocate_energies(n, total_energy);
  const auto coeffs = sample_coefficients(energies, collection.subspace_dim(), rng);
  const auto instance =
      synthesize(collection, pattern, coeffs, NoiseSpec::gaussian(sigma), rng);
  return TrialDraw{pattern.indices, test_statistics(collection, instance.observation)};
}

std::vector<int> exceed(const std::vector<double>& stats, const std::vector<double>& taus,
                        double scale) {
  std::vector<int> active;
  for (std::size_t k = 0; k < stats.size(); ++k)
    if (stats[k] > scale * taus[k]) active.push_back(static_cast<int>(k));
  return active;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (subspace_dim < 1 || ambient_dim < subspace_dim)
    throw std::invalid_argument("ExperimentConfig: need D >= d >= 1");
  if (num_subspaces < 3)
    throw std::invalid_argument("ExperimentConfig: need at least 3 subspaces");
  if (n_sweep.empty()) throw std::invalid_argument("ExperimentConfig: empty n_sweep");
  for (int n : n_sweep) {
    if (n < 1 || n >= num_subspaces)
      throw std::invalid_argument("ExperimentConfig: every n must satisfy 1 <= n < N");
    if (static_cast<long long>(n) * subspace_dim >= ambient_dim)
      throw std::invalid_argument("ExperimentConfig: every n must satisfy n * d < D");
  }
  if (sigma < 0.0) throw std::invalid_argument("ExperimentConfig: sigma must be nonnegative");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("ExperimentConfig: alpha must be in (0, 1]");
  if (energy_rule == EnergyRule::kExplicitTotal && !(energy_total > 0.0))
    throw std::invalid_argument("ExperimentConfig: explicit energy_total must be positive");
  if (trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be positive");
  if (mode == ThresholdMode::kCalibrated && (!(c1 > 0.0) || c1 > 1.0))
    throw std::invalid_argument("ExperimentConfig: calibrated mode needs c1 in (0, 1]");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "D")
      config.ambient_dim = parse_int(value, key);
    else if (key == "d")
      config.subspace_dim = parse_int(value, key);
    else if (key == "N")
      config.num_subspaces = parse_int(value, key);
    else if (key == "n_sweep")
      config.n_sweep = parse_n_sweep(value);
    else if (key == "sigma")
      config.sigma = parse_double(value, key);
    else if (key == "alpha")
      config.alpha = parse_double(value, key);
    else if (key == "energy_rule") {
      if (value == "proportional")
        config.energy_rule = EnergyRule::kProportionalToActive;
      else if (value == "explicit")
        config.energy_rule = EnergyRule::kExplicitTotal;
      else
        throw std::invalid_argument("config: energy_rule must be proportional or explicit");
    } else if (key == "energy_total")
      config.energy_total = parse_double(value, key);
    else if (key == "trials")
      config.trials = parse_int(value, key);
    else if (key == "master_seed")
      config.master_seed = parse_u64(value, key);
    else if (key == "mode") {
      if (value == "theorem1")
        config.mode = ThresholdMode::kTheorem1;
      else if (value == "calibrated")
        config.mode = ThresholdMode::kCalibrated;
      else
        throw std::invalid_argument("config: mode must be theorem1 or calibrated");
    } else if (key == "c1")
      config.c1 = parse_double(value, key);
    else if (key == "output_path")
      config.output_path = value;
    else
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key " + key);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  return parse_config(in);
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[160];
  std::string text;
  std::snprintf(buf, sizeof buf, "D=%d;d=%d;N=%d;", config.ambient_dim,
                config.subspace_dim, config.num_subspaces);
  text += buf;
  text += "n_sweep=";
  for (int n : config.n_sweep) {
    std::snprintf(buf, sizeof buf, "%d,", n);
    text += buf;
  }
  std::snprintf(buf, sizeof buf, ";sigma=%.17g;alpha=%.17g;rule=%d;total=%.17g;", config.sigma,
                config.alpha, static_cast<int>(config.energy_rule), config.energy_total);
  text += buf;
  std::snprintf(buf, sizeof buf, "trials=%d;mode=%d;c1=%.17g", config.trials,
                static_cast<int>(config.mode), config.c1);
  text += buf;

  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SubspaceCollection generate_collection(int ambient_dim, int subspace_dim,
                                       int num_subspaces, std::uint64_t master_seed) {
  std::vector<BasisMatrix> bases;
  bases.reserve(static_cast<std::size_t>(num_subspaces));
  for (int i = 0; i < num_subspaces; ++i) {
    RngStream rng(derive_seed(master_seed, kStreamCollection, static_cast<std::uint64_t>(i)));
    bases.push_back(haar_stiefel_sample(ambient_dim, subspace_dim, rng));
  }
  return SubspaceCollection(std::move(bases));
}

SweepResult run_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.output_path.empty())
    throw std::invalid_argument("run_sweep: output_path must be set");

  const SubspaceCollection collection = generate_collection(
      config.ambient_dim, config.subspace_dim, config.num_subspaces, config.master_seed);
  const CoherenceProfile profile = compute_profile(collection);

  SweepResult result;
  result.profile = profile;
  for (int n : config.n_sweep) {
    const ThresholdParams params = sweep_params(config, n);
    const std::vector<double> taus = thresholds(params, profile);
    std::vector<TrialRecord> records(static_cast<std::size_t>(config.trials));
#pragma omp parallel for schedule(static)
    for (int t = 0; t < config.trials; ++t) {
      const auto seed = derive_seed(config.master_seed, kStreamTrial,
                                    static_cast<std::uint64_t>(n),
                                    static_cast<std::uint64_t>(t));
      TrialDraw draw =
          run_trial(collection, n, params.energy_total, config.sigma, seed);
      records[static_cast<std::size_t>(t)] =
          TrialRecord{std::move(draw.pattern), exceed(draw.stats, taus, 1.0)};
    }
    result.rows.push_back(SweepRow{n, params.c1, summarize(records)});
  }

  std::ofstream out(config.output_path);
  if (!out) throw std::runtime_error("run_sweep: cannot open " + config.output_path);
  char buf[256];
  out << "# subspace unmixing sweep\n";
  std::snprintf(buf, sizeof buf, "# seed = %llu\n",
                static_cast<unsigned long long>(config.master_seed));
  out << buf;
  out << "# config_hash = " << config_hash(config) << "\n";
  out << "# mode = "
      << (config.mode == ThresholdMode::kTheorem1 ? "theorem1" : "calibrated") << "\n";
  out << "n,D,d,N,sigma,alpha,c1,trials,fwer,fwer_se,ndp_mean,fdp_mean\n";
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.12g,%.12g,%.12g,%d,%.12g,%.12g,%.12g,%.12g\n",
                  row.n, config.ambient_dim, config.subspace_dim, config.num_subspaces,
                  config.sigma, config.alpha, row.c1, row.summary.trials,
                  row.summary.fwer.value, row.summary.fwer.se, row.summary.ndp_mean,
                  row.summary.fdp_mean);
    out << buf;
  }
  if (!out) throw std::runtime_error("run_sweep: write failed for " + config.output_path);
  return result;
}

CalibrationResult calibrate_c1(const ExperimentConfig& config,
                               const std::vector<double>& c1_grid, int validation_trials) {
  config.validate();
  if (c1_grid.empty()) throw std::invalid_argument("calibrate_c1: empty grid");
  for (double c1 : c1_grid)
    if (!(c1 > 0.0) || c1 > 1.0)
      throw std::invalid_argument("calibrate_c1: grid values must lie in (0, 1]");
  if (validation_trials < 1)
    throw std::invalid_argument("calibrate_c1: validation_trials must be positive");

  std::vector<double> grid = c1_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const SubspaceCollection collection = generate_collection(
      config.ambient_dim, config.subspace_dim, config.num_subspaces, config.master_seed);
  const CoherenceProfile profile = compute_profile(collection);

  // Statistics are computed once per trial; every grid value reuses them,
  // since c1 only rescales the thresholds. Per-trial outcomes land in fixed
  // slots and are reduced in trial order, so the table does not depend on the
  // thread schedule.
  const std::size_t G = grid.size();
  const std::size_t S = config.n_sweep.size();
  const auto T = static_cast<std::size_t>(validation_trials);
  std::vector<double> fwer(G * S, 0.0), ndp_mean(G * S, 0.0);
  std::vector<std::uint8_t> fw_flag(G * T);
  std::vector<double> ndp_val(G * T);
  for (std::size_t s = 0; s < S; ++s) {
    const int n = config.n_sweep[s];
    ThresholdParams params = ThresholdParams::calibrated(
        config.alpha, n, config.num_subspaces, config.subspace_dim,
        energy_total_for(config, n), NoiseSpec::gaussian(config.sigma), 1.0);
    const std::vector<double> base_taus = thresholds(params, profile);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < validation_trials; ++t) {
      const auto seed = derive_seed(config.master_seed, kStreamCalibration,
                                    static_cast<std::uint64_t>(n),
                                    static_cast<std::uint64_t>(t));
      const TrialDraw draw =
          run_trial(collection, n, params.energy_total, config.sigma, seed);
      for (std::size_t g = 0; g < G; ++g) {
        TrialRecord record{draw.pattern,
                           exceed(draw.stats, base_taus, grid[g] * grid[g])};
        fw_flag[g * T + static_cast<std::size_t>(t)] = family_wise_error(record) ? 1 : 0;
        ndp_val[g * T + static_cast<std::size_t>(t)] = ndp(record);
      }
    }
    for (std::size_t g = 0; g < G; ++g) {
      double fw_sum = 0.0, miss_sum = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        fw_sum += fw_flag[g * T + t];
        miss_sum += ndp_val[g * T + t];
      }
      fwer[g * S + s] = fw_sum / validation_trials;
      ndp_mean[g * S + s] = miss_sum / validation_trials;
    }
  }

  CalibrationResult result;
  result.validation_trials = validation_trials;
  result.table.reserve(G * S);
  int selected = -1;
  for (std::size_t g = 0; g < G; ++g) {
    bool feasible = true;
    for (std::size_t s = 0; s < S; ++s) {
      const double p = fwer[g * S + s];
      const double se = std::sqrt(p * (1.0 - p) / validation_trials);
      result.table.push_back(
          CalibrationCell{grid[g], config.n_sweep[s], p, se, ndp_mean[g * S + s]});
      if (p + se > config.alpha) feasible = false;
    }
    if (feasible && selected < 0) selected = static_cast<int>(g);
  }
  if (selected < 0) {
    std::string msg = "calibrate_c1: no grid value controls FWER at alpha = " +
                      std::to_string(config.alpha) + "; grid spans [" +
                      std::to_string(grid.front()) + ", " + std::to_string(grid.back()) +
                      "], " + std::to_string(validation_trials) + " trials per point";
    throw CalibrationError(std::move(msg), std::move(result));
  }
  result.selected_c1 = grid[static_cast<std::size_t>(selected)];
  return result;
}

void write_calibration_csv(const std::string& path, const CalibrationResult& result,
                           const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_calibration_csv: cannot open " + path);
  char buf[192];
  out << "# threshold calibration table\n";
  std::snprintf(buf, sizeof buf, "# seed = %llu\n",
                static_cast<unsigned long long>(config.master_seed));
  out << buf;
  out << "# config_hash = " << config_hash(config) << "\n";
  std::snprintf(buf, sizeof buf, "# validation_trials = %d\n", result.validation_trials);
  out << buf;
  std::snprintf(buf, sizeof buf, "# selected_c1 = %.12g\n", result.selected_c1);
  out << buf;
  out << "c1,n,fwer,fwer_se,ndp_mean\n";
  for (const auto& cell : result.table) {
    std::snprintf(buf, sizeof buf, "%.12g,%d,%.12g,%.12g,%.12g\n", cell.c1, cell.n,
                  cell.fwer, cell.fwer_se, cell.ndp_mean);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_calibration_csv: write failed for " + path);
}

namespace {

void write_histogram(std::ofstream& out, const char* name, const std::vector<double>& values) {
  constexpr int kBins = 64;
  double max = 0.0;
  for (double v : values) max = std::max(max, v);
  std::vector<long> counts(kBins, 0);
  for (double v : values) {
    int bin = max > 0.0 ? static_cast<int>(v / max * kBins) : 0;
    bin = std::clamp(bin, 0, kBins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  const double width = max / kBins;
  char buf[160];
  for (int b = 0; b < kBins; ++b) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.12g,%.12g,%ld\n", name, b + 1, b * width,
                  (b + 1) * width, counts[static_cast<std::size_t>(b)]);
    out << buf;
  }
}

}  // namespace

void write_coherence_histograms(const std::string& path, const CoherenceProfile& profile,
                                const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_coherence_histograms: cannot open " + path);
  out << "# per-subspace coherence histograms, 64 equal-width bins from 0 to the observed max\n";
  for (const std::string& c : comments) out << "# " << c << "\n";
  out << "measure,bin_index,bin_left,bin_right,count\n";
  write_histogram(out, "local_two", profile.local_two);
  write_histogram(out, "avg_mixing", profile.avg_mixing);
  if (!out) throw std::runtime_error("write_coherence_histograms: write failed for " + path);
}

void coherence_report(const ExperimentConfig& config, const std::string& profile_csv,
                      const std::string& histogram_csv) {
  config.validate();
  const SubspaceCollection collection = generate_collection(
      config.ambient_dim, config.subspace_dim, config.num_subspaces, config.master_seed);
  const CoherenceProfile profile = compute_profile(collection);
  const double lb = coherence_lower_bound(config.num_subspaces, config.ambient_dim,
                                          config.subspace_dim);
  char buf[160];
  std::snprintf(buf, sizeof buf, "collection: D = %d, d = %d, N = %d, seed = %llu",
                config.ambient_dim, config.subspace_dim, config.num_subspaces,
                static_cast<unsigned long long>(config.master_seed));
  write_profile_csv(profile_csv, profile, lb, {buf});
  write_coherence_histograms(histogram_csv, profile, {buf});
}

std::vector<int> ml_oracle_detect(const SubspaceCollection& c, const Eigen::VectorXd& y,
                                  int n) {
  if (n < 1 || n >= c.size())
    throw std::invalid_argument("ml_oracle_detect: need 1 <= n < N");
  if (y.size() != c.ambient_dim())
    throw std::invalid_argument("ml_oracle_detect: observation length does not match D");

  // C(N, n) with an early cap; enumeration above the budget is refused.
  constexpr double kBudget = 1e6;
  double combos = 1.0;
  for (int i = 0; i < n; ++i) {
    combos *= static_cast<double>(c.size() - i) / (i + 1);
    if (combos > kBudget)
      throw std::invalid_argument("ml_oracle_detect: C(N, n) exceeds the 1e6 budget");
  }

  const int D = c.ambient_dim();
  const int d = c.subspace_dim();
  Eigen::MatrixXd stacked(D, static_cast<Eigen::Index>(n) * d);
  std::vector<int> combo(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) combo[static_cast<std::size_t>(i)] = i;

  std::vector<int> best;
  double best_energy = -1.0;
  while (true) {
    for (int i = 0; i < n; ++i)
      stacked.middleCols(static_cast<Eigen::Index>(i) * d, d) =
          c.basis(combo[static_cast<std::size_t>(i)]).m();
    // Rank-revealing QR handles unions whose joint rank falls below n * d.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
    qr.setThreshold(kTol.rank_rtol);
    const auto rank = qr.rank();
    const Eigen::MatrixXd q =
        qr.householderQ() * Eigen::MatrixXd::Identity(D, rank);
    const double energy = (q.transpose() * y).squaredNorm();
    if (energy > best_energy) {
      best_energy = energy;
      best = combo;
    }
    // Next combination in lexicographic order.
    int i = n - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] == c.size() - n + i) --i;
    if (i < 0) break;
    ++combo[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j)
      combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

}  // namespace msd
