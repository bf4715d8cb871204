// Command-line front end for marginal subspace detection: collection
// generation, coherence reports, single-observation unmixing, Monte Carlo
// sweeps, and threshold calibration. All outputs are CSV (or plain text) with
// '#' metadata headers; subspace indices are 1-based in every file.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msd/experiment.hpp"

namespace {

msd::ExperimentConfig load_with_seed(const std::string& path,
                                     const std::optional<std::uint64_t>& seed) {
  msd::ExperimentConfig config = msd::load_config(path);
  if (seed) config.master_seed = *seed;
  return config;
}

int run_generate(const std::string& out_path, int D, int d, int N, std::uint64_t seed,
                 const std::string& instance_out, int n, double sigma, double energy) {
  const msd::SubspaceCollection collection = msd::generate_collection(D, d, N, seed);
  msd::write_basis_file(out_path, collection.bases());
  std::printf("wrote %d bases (D = %d, d = %d) to %s\n", N, D, d, out_path.c_str());

  if (!instance_out.empty()) {
    msd::RngStream rng(msd::derive_seed(seed, msd::kStreamInstance, 0));
    const auto pattern = msd::sample_activity_pattern(N, n, rng);
    const auto energies = msd::allocate_energies(n, energy);
    const auto coeffs = msd::sample_coefficients(energies, d, rng);
    const auto instance = msd::synthesize(collection, pattern, coeffs,
                                          msd::NoiseSpec::gaussian(sigma), rng);
    msd::write_instance(instance_out, instance);
    std::printf("wrote a sample instance (n = %d, sigma = %g, E_A = %g) to %s\n", n, sigma,
                energy, instance_out.c_str());
  }
  return 0;
}

int run_coherence(const std::string& config_path, const std::string& bases_path,
                  const std::optional<std::uint64_t>& seed, const std::string& profile_out,
                  const std::string& hist_out) {
  if (!config_path.empty()) {
    msd::coherence_report(load_with_seed(config_path, seed), profile_out, hist_out);
    std::printf("wrote %s and %s\n", profile_out.c_str(), hist_out.c_str());
    return 0;
  }
  const msd::SubspaceCollection collection(msd::read_basis_file(bases_path));
  const msd::CoherenceProfile profile = msd::compute_profile(collection);
  const double lb = msd::coherence_lower_bound(collection.size(), collection.ambient_dim(),
                                               collection.subspace_dim());
  char meta[160];
  std::snprintf(meta, sizeof meta, "collection: D = %d, d = %d, N = %d, file = %s",
                collection.ambient_dim(), collection.subspace_dim(), collection.size(),
                bases_path.c_str());
  msd::write_profile_csv(profile_out, profile, lb, {meta});
  std::printf("wrote %s\n", profile_out.c_str());
  return 0;
}

int run_unmix(const std::string& bases_path, const std::string& instance_path,
              const std::string& observation_path, int n, double energy_total, double alpha,
              double sigma, double eps_eta, bool bounded, double c1, bool calibrated,
              const std::string& out_path) {
  const msd::SubspaceCollection collection(msd::read_basis_file(bases_path));
  const msd::CoherenceProfile profile = msd::compute_profile(collection);

  Eigen::VectorXd y;
  msd::NoiseSpec noise = bounded ? msd::NoiseSpec::bounded(eps_eta)
                                 : msd::NoiseSpec::gaussian(sigma);
  if (!instance_path.empty()) {
    const msd::UnmixingInstance instance = msd::read_instance(instance_path);
    y = instance.observation;
    noise = instance.noise;
    n = instance.pattern.n();
    energy_total = instance.coeffs.total_energy();
  } else {
    std::ifstream in(observation_path);
    if (!in) {
      std::fprintf(stderr, "cannot open %s\n", observation_path.c_str());
      return 1;
    }
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != collection.ambient_dim()) {
      std::fprintf(stderr, "observation has %zu values, expected D = %d\n", values.size(),
                   collection.ambient_dim());
      return 1;
    }
    y.resize(collection.ambient_dim());
    for (int i = 0; i < collection.ambient_dim(); ++i)
      y(i) = values[static_cast<std::size_t>(i)];
  }

  const msd::ThresholdParams params =
      calibrated ? msd::ThresholdParams::calibrated(alpha, n, collection.size(),
                                                    collection.subspace_dim(), energy_total,
                                                    noise, c1)
                 : msd::ThresholdParams::uncalibrated(alpha, n, collection.size(),
                                                      collection.subspace_dim(), energy_total,
                                                      noise);
  const msd::DetectionResult result = msd::detect(collection, profile, y, params);

  char meta[192];
  std::snprintf(meta, sizeof meta,
                "unmix: n = %d, E_A = %.12g, alpha = %.12g, %s, c1 = %.12g", n, energy_total,
                alpha, calibrated ? "calibrated" : "theorem1", calibrated ? c1 : 1.0);
  msd::write_detection_csv(out_path, result, {meta});

  std::printf("declared active:");
  for (int k : result.estimated_active) std::printf(" %d", k + 1);
  std::printf("\nwrote %s\n", out_path.c_str());
  return 0;
}

int run_experiment(const std::string& config_path, const std::optional<std::uint64_t>& seed) {
  const msd::ExperimentConfig config = load_with_seed(config_path, seed);
  const msd::SweepResult result = msd::run_sweep(config);
  std::printf("n, fwer, ndp_mean, fdp_mean\n");
  for (const auto& row : result.rows)
    std::printf("%d, %.4f, %.4f, %.4f\n", row.n, row.summary.fwer.value,
                row.summary.ndp_mean, row.summary.fdp_mean);
  std::printf("wrote %s\n", config.output_path.c_str());
  return 0;
}

int run_calibrate(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                  double grid_min, double grid_max, int grid_points, int validation_trials,
                  const std::string& table_out) {
  const msd::ExperimentConfig config = load_with_seed(config_path, seed);
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(grid_points));
  if (grid_points == 1) {
    grid.push_back(grid_min);
  } else {
    // Log-spaced grid; c1 acts quadratically, so relative spacing is natural.
    const double ratio = std::pow(grid_max / grid_min, 1.0 / (grid_points - 1));
    double value = grid_min;
    for (int i = 0; i < grid_points; ++i, value *= ratio) grid.push_back(std::min(value, 1.0));
  }
  try {
    const msd::CalibrationResult result =
        msd::calibrate_c1(config, grid, validation_trials);
    if (!table_out.empty()) msd::write_calibration_csv(table_out, result, config);
    std::printf("selected c1 = %.12g\n", result.selected_c1);
    return 0;
  } catch (const msd::CalibrationError& error) {
    if (!table_out.empty()) msd::write_calibration_csv(table_out, error.result, config);
    std::fprintf(stderr, "%s\n", error.what());
    // Point at the best-performing grid value so a retry can re-center the grid.
    double best = 2.0, best_c1 = 0.0;
    for (const auto& cell : error.result.table) {
      if (cell.fwer < best) {
        best = cell.fwer;
        best_c1 = cell.c1;
      }
    }
    std::fprintf(stderr, "closest grid value: c1 = %.6g (best per-n fwer %.4f)\n", best_c1,
                 best);
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marginal subspace detection toolkit"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "sample a Haar collection to a basis file");
  int D = 0, d = 0, N = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_out, instance_out;
  int gen_n = 1;
  double gen_sigma = 0.01, gen_energy = 1.0;
  generate->add_option("--D", D, "ambient dimension")->required();
  generate->add_option("--d", d, "subspace dimension")->required();
  generate->add_option("--N", N, "number of subspaces")->required();
  generate->add_option("--seed", gen_seed, "master seed");
  generate->add_option("--out", gen_out, "output basis file")->required();
  generate->add_option("--instance-out", instance_out,
                       "also synthesize one instance to this path");
  generate->add_option("--n", gen_n, "active subspaces for the sample instance");
  generate->add_option("--sigma", gen_sigma, "noise level for the sample instance");
  generate->add_option("--energy-total", gen_energy, "total energy for the sample instance");

  // coherence
  auto* coherence = app.add_subcommand("coherence", "coherence profile and histograms");
  std::string coh_config, coh_bases, coh_profile = "profile.csv", coh_hist = "histograms.csv";
  std::optional<std::uint64_t> coh_seed;
  coherence->add_option("--config", coh_config, "experiment config file");
  coherence->add_option("--bases", coh_bases, "basis file (alternative to --config)");
  coherence->add_option("--seed", coh_seed, "override the config master_seed");
  coherence->add_option("--profile-out", coh_profile, "per-subspace profile CSV");
  coherence->add_option("--hist-out", coh_hist, "histogram CSV (config mode only)");

  // unmix
  auto* unmix = app.add_subcommand("unmix", "detect active subspaces in one observation");
  std::string unmix_bases, unmix_instance, unmix_obs, unmix_out = "detection.csv";
  int unmix_n = 1;
  double unmix_energy = 1.0, unmix_alpha = 0.1, unmix_sigma = 0.0, unmix_eps = 0.0;
  double unmix_c1 = 1.0;
  bool unmix_bounded = false, unmix_calibrated = false;
  unmix->add_option("--bases", unmix_bases, "basis file")->required();
  unmix->add_option("--instance", unmix_instance,
                    "instance record (supplies y, n, E_A and the noise model)");
  unmix->add_option("--observation", unmix_obs, "whitespace-separated observation vector");
  unmix->add_option("--n", unmix_n, "assumed number of active subspaces");
  unmix->add_option("--energy-total", unmix_energy, "assumed total active energy E_A");
  unmix->add_option("--alpha", unmix_alpha, "FWER target");
  unmix->add_option("--sigma", unmix_sigma, "Gaussian noise level");
  unmix->add_option("--eps-eta", unmix_eps, "bounded noise budget");
  unmix->add_flag("--bounded", unmix_bounded, "use the bounded noise model");
  unmix->add_flag("--calibrated", unmix_calibrated, "use calibrated thresholds (c0 = 1)");
  unmix->add_option("--c1", unmix_c1, "threshold shrink factor for --calibrated");
  unmix->add_option("--out", unmix_out, "detection CSV");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a Monte Carlo sweep");
  std::string exp_config;
  std::optional<std::uint64_t> exp_seed;
  experiment->add_option("--config", exp_config, "experiment config file")->required();
  experiment->add_option("--seed", exp_seed, "override the config master_seed");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "select the threshold shrink factor c1");
  std::string cal_config, cal_table;
  std::optional<std::uint64_t> cal_seed;
  double cal_min = 0.02, cal_max = 1.0;
  int cal_points = 20, cal_trials = 300;
  calibrate->add_option("--config", cal_config, "experiment config file")->required();
  calibrate->add_option("--seed", cal_seed, "override the config master_seed");
  calibrate->add_option("--grid-min", cal_min, "smallest c1 in the grid");
  calibrate->add_option("--grid-max", cal_max, "largest c1 in the grid");
  calibrate->add_option("--grid-points", cal_points, "grid size (log-spaced)");
  calibrate->add_option("--validation-trials", cal_trials, "trials per grid point");
  calibrate->add_option("--table-out", cal_table, "write the grid-vs-FWER/NDP table CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed())
      return run_generate(gen_out, D, d, N, gen_seed, instance_out, gen_n, gen_sigma,
                          gen_energy);
    if (coherence->parsed()) {
      if (coh_config.empty() == coh_bases.empty()) {
        std::fprintf(stderr, "coherence: pass exactly one of --config or --bases\n");
        return 1;
      }
      return run_coherence(coh_config, coh_bases, coh_seed, coh_profile, coh_hist);
    }
    if (unmix->parsed()) {
      if (unmix_instance.empty() == unmix_obs.empty()) {
        std::fprintf(stderr, "unmix: pass exactly one of --instance or --observation\n");
        return 1;
      }
      return run_unmix(unmix_bases, unmix_instance, unmix_obs, unmix_n, unmix_energy,
                       unmix_alpha, unmix_sigma, unmix_eps, unmix_bounded, unmix_c1,
                       unmix_calibrated, unmix_out);
    }
    if (experiment->parsed()) return run_experiment(exp_config, exp_seed);
    if (calibrate->parsed())
      return run_calibrate(cal_config, cal_seed, cal_min, cal_max, cal_points, cal_trials,
                           cal_table);
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 1;
  }
  return 0;
}
