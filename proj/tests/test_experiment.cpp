#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msd/experiment.hpp"
#include "msd/rng.hpp"
#include "oracles.hpp"

using msd::ExperimentConfig;
using msd::RngStream;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.ambient_dim = 40;
  c.subspace_dim = 3;
  c.num_subspaces = 30;
  c.n_sweep = {1, 2};
  c.sigma = 0.01;
  c.alpha = 0.1;
  c.energy_rule = msd::EnergyRule::kProportionalToActive;
  c.trials = 50;
  c.master_seed = 777;
  c.mode = msd::ThresholdMode::kTheorem1;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string s;
  while (std::getline(in, s)) lines.push_back(s);
  return lines;
}

}  // namespace

// ============================================================================
// Seed substreams
// ============================================================================

TEST_CASE("derived substreams do not collide across purposes and coordinates") {
  std::set<std::uint64_t> seen;
  const std::uint64_t master = 20240817;
  for (std::uint64_t purpose = 1; purpose <= 4; ++purpose)
    for (std::uint64_t a = 0; a < 8; ++a)
      for (std::uint64_t b = 0; b < 8; ++b)
        CHECK(seen.insert(msd::derive_seed(master, purpose, a, b)).second);
  CHECK(msd::derive_seed(1, 2, 3, 4) != msd::derive_seed(2, 2, 3, 4));
  CHECK(msd::derive_seed(1, 2, 3, 4) == msd::derive_seed(1, 2, 3, 4));
}

// ============================================================================
// Config parsing
// ============================================================================

TEST_CASE("config parser reads every key, ranges, and comments") {
  std::istringstream in(
      "# full configuration\n"
      "D = 40\n"
      "d= 3\n"
      "N =30\n"
      "n_sweep = 1..3, 5\n"
      "sigma = 0.01   # noise level\n"
      "alpha = 0.1\n"
      "energy_rule = explicit\n"
      "energy_total = 4.5\n"
      "trials = 100\n"
      "master_seed = 12345\n"
      "mode = calibrated\n"
      "c1 = 0.25\n"
      "output_path = out.csv\n");
  const ExperimentConfig c = msd::parse_config(in);
  CHECK(c.ambient_dim == 40);
  CHECK(c.subspace_dim == 3);
  CHECK(c.num_subspaces == 30);
  CHECK(c.n_sweep == std::vector<int>{1, 2, 3, 5});
  CHECK(c.sigma == 0.01);
  CHECK(c.alpha == 0.1);
  CHECK(c.energy_rule == msd::EnergyRule::kExplicitTotal);
  CHECK(c.energy_total == 4.5);
  CHECK(c.trials == 100);
  CHECK(c.master_seed == 12345);
  CHECK(c.mode == msd::ThresholdMode::kCalibrated);
  CHECK(c.c1 == 0.25);
  CHECK(c.output_path == "out.csv");
}

TEST_CASE("config parser rejects malformed input") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return msd::parse_config(in);
  };
  const std::string base =
      "D = 40\nd = 3\nN = 30\nn_sweep = 1\nsigma = 0.01\nalpha = 0.1\ntrials = 10\n";

  CHECK_NOTHROW(parse(base));
  CHECK_THROWS_AS(parse(base + "volume = 11\n"), std::invalid_argument);   // unknown key
  CHECK_THROWS_AS(parse(base + "just a line\n"), std::invalid_argument);   // no '='
  CHECK_THROWS_AS(parse("D = forty\n" + base), std::invalid_argument);     // bad integer
  CHECK_THROWS_AS(parse("sigma = 1e\nD = 4\n"), std::invalid_argument);    // bad number
  CHECK_THROWS_AS(parse(base + "n_sweep = 5..3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "energy_rule = uniform\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse(base + "mode = magic\n"), std::invalid_argument);
}

TEST_CASE("config validation enforces the geometry") {
  ExperimentConfig c = small_config();
  CHECK_NOTHROW(c.validate());

  c = small_config();
  c.n_sweep = {14};  // 14 * 3 >= 40
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.n_sweep = {30};  // n = N
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.num_subspaces = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.sigma = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.alpha = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.energy_rule = msd::EnergyRule::kExplicitTotal;
  c.energy_total = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.mode = msd::ThresholdMode::kCalibrated;
  c.c1 = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config hash tracks semantics, not seed or destination") {
  const ExperimentConfig a = small_config();
  ExperimentConfig b = small_config();
  CHECK(msd::config_hash(a) == msd::config_hash(b));
  CHECK(msd::config_hash(a).size() == 16);

  b.master_seed = 999;
  b.output_path = "elsewhere.csv";
  CHECK(msd::config_hash(a) == msd::config_hash(b));

  b = small_config();
  b.sigma = 0.02;
  CHECK(msd::config_hash(a) != msd::config_hash(b));

  b = small_config();
  b.n_sweep = {1, 3};
  CHECK(msd::config_hash(a) != msd::config_hash(b));
}

// ============================================================================
// Collection generation
// ============================================================================

TEST_CASE("generated collections are deterministic per-basis substreams") {
  const msd::SubspaceCollection a = msd::generate_collection(20, 2, 6, 11);
  const msd::SubspaceCollection b = msd::generate_collection(20, 2, 6, 11);
  const msd::SubspaceCollection c = msd::generate_collection(20, 2, 6, 12);
  REQUIRE(a.size() == 6);
  CHECK(a.ambient_dim() == 20);
  CHECK(a.subspace_dim() == 2);
  for (int i = 0; i < 6; ++i) CHECK(a.basis(i).m() == b.basis(i).m());
  CHECK(a.basis(0).m() != c.basis(0).m());
}

// ============================================================================
// Sweeps
// ============================================================================

TEST_CASE("sweep runs, reports, and reproduces byte for byte") {
  ExperimentConfig config = small_config();
  config.output_path = "msd_test_sweep_a.csv";
  const msd::SweepResult result = msd::run_sweep(config);

  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].n == 1);
  CHECK(result.rows[1].n == 2);
  for (const auto& row : result.rows) {
    CHECK(row.summary.trials == 50);
    CHECK(row.summary.fwer.value >= 0.0);
    CHECK(row.summary.fwer.value <= 1.0);
    CHECK(row.c1 == 1.0);
  }

  const std::vector<std::string> lines = lines_of(slurp(config.output_path));
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] == "# subspace unmixing sweep");
  CHECK(lines[1] == "# seed = 777");
  CHECK(lines[2] == "# config_hash = " + msd::config_hash(config));
  CHECK(lines[3] == "# mode = theorem1");
  CHECK(lines[4] == "n,D,d,N,sigma,alpha,c1,trials,fwer,fwer_se,ndp_mean,fdp_mean");
  CHECK(lines[5].rfind("1,40,3,30,0.01,0.1,1,50,", 0) == 0);
  CHECK(lines[6].rfind("2,40,3,30,", 0) == 0);

  ExperimentConfig again = small_config();
  again.output_path = "msd_test_sweep_b.csv";
  msd::run_sweep(again);
  CHECK(slurp("msd_test_sweep_a.csv") == slurp("msd_test_sweep_b.csv"));

  std::remove("msd_test_sweep_a.csv");
  std::remove("msd_test_sweep_b.csv");
}

TEST_CASE("analytical thresholds control FWER in a mini sweep") {
  ExperimentConfig config = small_config();
  config.trials = 200;
  config.output_path = "msd_test_sweep_fwer.csv";
  const msd::SweepResult result = msd::run_sweep(config);
  for (const auto& row : result.rows) {
    CHECK(row.summary.fwer.value <=
          config.alpha + 3.0 * std::sqrt(config.alpha * (1 - config.alpha) / config.trials));
  }
  std::remove("msd_test_sweep_fwer.csv");
}

TEST_CASE("sweep requires a destination") {
  ExperimentConfig config = small_config();
  config.output_path.clear();
  CHECK_THROWS_AS(msd::run_sweep(config), std::invalid_argument);
}

// ============================================================================
// Calibration
// ============================================================================

TEST_CASE("calibration selects the smallest feasible grid value") {
  ExperimentConfig config;
  config.ambient_dim = 40;
  config.subspace_dim = 2;
  config.num_subspaces = 12;
  config.n_sweep = {2};
  config.sigma = 0.01;
  config.alpha = 0.1;
  config.trials = 10;
  config.master_seed = 4242;

  const std::vector<double> grid{0.05, 0.1, 0.2, 0.4, 0.7, 1.0};
  const msd::CalibrationResult result = msd::calibrate_c1(config, grid, 200);

  REQUIRE(result.table.size() == grid.size());
  CHECK(result.validation_trials == 200);

  // Recompute feasibility from the returned table: the selected value must be
  // the smallest c1 whose FWER stays at or below alpha with one SE of cushion
  // at every n.
  double smallest_feasible = -1.0;
  for (const auto& cell : result.table) {
    if (cell.fwer + cell.fwer_se <= config.alpha && smallest_feasible < 0.0)
      smallest_feasible = cell.c1;
  }
  REQUIRE(smallest_feasible > 0.0);
  CHECK(result.selected_c1 == smallest_feasible);

  // Raising c1 raises every bar, so the missed fraction is nondecreasing
  // along the (ascending) grid.
  for (std::size_t g = 1; g < result.table.size(); ++g)
    CHECK(result.table[g].ndp_mean >= result.table[g - 1].ndp_mean - 1e-12);

  // Determinism: the whole table reproduces.
  const msd::CalibrationResult again = msd::calibrate_c1(config, grid, 200);
  CHECK(again.selected_c1 == result.selected_c1);
  REQUIRE(again.table.size() == result.table.size());
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    CHECK(again.table[i].fwer == result.table[i].fwer);
    CHECK(again.table[i].ndp_mean == result.table[i].ndp_mean);
  }
}

TEST_CASE("a conservative grid point is feasible on its own") {
  ExperimentConfig config;
  config.ambient_dim = 40;
  config.subspace_dim = 2;
  config.num_subspaces = 12;
  config.n_sweep = {2};
  config.sigma = 0.01;
  config.alpha = 0.1;
  config.trials = 10;
  config.master_seed = 31;

  const msd::CalibrationResult result = msd::calibrate_c1(config, {1.0}, 150);
  CHECK(result.selected_c1 == 1.0);
}

TEST_CASE("calibration failure carries the full table") {
  ExperimentConfig config;
  config.ambient_dim = 40;
  config.subspace_dim = 2;
  config.num_subspaces = 12;
  config.n_sweep = {2};
  config.sigma = 0.01;
  config.alpha = 0.1;
  config.trials = 10;
  config.master_seed = 55;

  // c1 = 0.001 shrinks thresholds a million-fold; every trial trips.
  try {
    msd::calibrate_c1(config, {0.001}, 100);
    FAIL("calibrate_c1 accepted an uncontrollable grid");
  } catch (const msd::CalibrationError& e) {
    CHECK(std::string(e.what()).find("no grid value") != std::string::npos);
    REQUIRE(e.result.table.size() == 1);
    CHECK(e.result.table[0].fwer > config.alpha);
    CHECK(e.result.selected_c1 == 0.0);
  }
}

TEST_CASE("calibration validates the grid") {
  const ExperimentConfig config = small_config();
  CHECK_THROWS_AS(msd::calibrate_c1(config, {}, 100), std::invalid_argument);
  CHECK_THROWS_AS(msd::calibrate_c1(config, {0.5, 1.5}, 100), std::invalid_argument);
  CHECK_THROWS_AS(msd::calibrate_c1(config, {0.5}, 0), std::invalid_argument);
}

TEST_CASE("calibration table round-trips through its CSV") {
  ExperimentConfig config;
  config.ambient_dim = 40;
  config.subspace_dim = 2;
  config.num_subspaces = 12;
  config.n_sweep = {1, 2};
  config.sigma = 0.01;
  config.alpha = 0.1;
  config.trials = 10;
  config.master_seed = 60;

  const msd::CalibrationResult result = msd::calibrate_c1(config, {0.3, 1.0}, 50);
  const std::string path = "msd_test_calibration.csv";
  msd::write_calibration_csv(path, result, config);

  const std::vector<std::string> lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 10);  // 5 comments, header, 2 grid x 2 n rows
  CHECK(lines[0] == "# threshold calibration table");
  CHECK(lines[5] == "c1,n,fwer,fwer_se,ndp_mean");
  CHECK(lines[6].rfind("0.3,1,", 0) == 0);
  CHECK(lines[9].rfind("1,2,", 0) == 0);
  std::remove(path.c_str());
}

// ============================================================================
// Missed-detection trend across ambient dimension
// ============================================================================

TEST_CASE("larger ambient dimension never hurts calibrated detection") {
  // Same N, d, and sweep; D = 40 versus D = 120, each with its own
  // calibration. The wider space has weaker coherences, so its missed
  // fraction sits at or below the narrow one (within Monte Carlo slack) at
  // every activity level.
  std::vector<double> grid;
  for (int g = 0; g < 12; ++g)
    grid.push_back(0.02 * std::pow(50.0, g / 11.0));  // log-spaced 0.02 .. 1.0

  auto ndp_curve = [&grid](int D) {
    ExperimentConfig config;
    config.ambient_dim = D;
    config.subspace_dim = 3;
    config.num_subspaces = 60;
    config.n_sweep = {1, 2, 3, 4, 5, 6};
    config.sigma = 0.01;
    config.alpha = 0.1;
    config.trials = 500;
    config.master_seed = 97531;
    const msd::CalibrationResult cal = msd::calibrate_c1(config, grid, 200);
    config.mode = msd::ThresholdMode::kCalibrated;
    config.c1 = cal.selected_c1;
    config.output_path = "msd_test_trend_" + std::to_string(D) + ".csv";
    const msd::SweepResult sweep = msd::run_sweep(config);
    std::remove(config.output_path.c_str());
    std::vector<double> ndp;
    for (const auto& row : sweep.rows) ndp.push_back(row.summary.ndp_mean);
    return ndp;
  };

  const std::vector<double> narrow = ndp_curve(40);
  const std::vector<double> wide = ndp_curve(120);
  REQUIRE(narrow.size() == wide.size());
  const double slack = 3.0 * std::sqrt(0.5 / 500.0);
  for (std::size_t i = 0; i < narrow.size(); ++i) CHECK(wide[i] <= narrow[i] + slack);
}

// ============================================================================
// Coherence report
// ============================================================================

TEST_CASE("histogram bins are equal width with a degenerate zero measure") {
  msd::CoherenceProfile p;
  p.local_two = {0.1, 0.2, 0.4, 0.8};
  p.avg_mixing = {0.0, 0.0, 0.0, 0.0};
  p.avg_subspace = {0.1, 0.1, 0.1, 0.1};
  p.worst_case = 0.4;

  const std::string path = "msd_test_hist.csv";
  msd::write_coherence_histograms(path, p, {"collection: rigged"});

  const std::vector<std::string> lines = lines_of(slurp(path));
  REQUIRE(lines.size() == 3 + 64 + 64);
  CHECK(lines[2] == "measure,bin_index,bin_left,bin_right,count");

  long local_sum = 0, mixing_sum = 0, mixing_first = -1;
  int local_rows = 0, mixing_rows = 0;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string measure, field;
    std::getline(row, measure, ',');
    std::getline(row, field, ',');  // bin_index
    const int bin = std::stoi(field);
    std::getline(row, field, ',');  // bin_left
    std::getline(row, field, ',');  // bin_right
    std::getline(row, field, ',');  // count
    const long count = std::stol(field);
    if (measure == "local_two") {
      ++local_rows;
      local_sum += count;
      if (bin == 64) CHECK(count == 1);  // the max value 0.8 lands in the top bin
    } else if (measure == "avg_mixing") {
      ++mixing_rows;
      mixing_sum += count;
      if (mixing_first < 0) mixing_first = count;
      if (bin > 1) CHECK(count == 0);  // zero-max measure collapses to bin 1
    }
  }
  CHECK(local_rows == 64);
  CHECK(mixing_rows == 64);
  CHECK(local_sum == 4);
  CHECK(mixing_sum == 4);
  CHECK(mixing_first == 4);
  std::remove(path.c_str());
}

TEST_CASE("coherence report writes both files") {
  ExperimentConfig config;
  config.ambient_dim = 20;
  config.subspace_dim = 2;
  config.num_subspaces = 10;
  config.n_sweep = {1};
  config.sigma = 0.01;
  config.alpha = 0.1;
  config.trials = 1;
  config.master_seed = 2020;

  msd::coherence_report(config, "msd_test_profile_report.csv", "msd_test_hist_report.csv");
  const std::vector<std::string> profile = lines_of(slurp("msd_test_profile_report.csv"));
  CHECK(profile.size() == 4 + 10);  // 3 comments + header + N rows
  const std::vector<std::string> hist = lines_of(slurp("msd_test_hist_report.csv"));
  CHECK(hist.size() == 3 + 128);
  std::remove("msd_test_profile_report.csv");
  std::remove("msd_test_hist_report.csv");
}

// ============================================================================
// Exhaustive reference detector
// ============================================================================

TEST_CASE("exhaustive detector recovers orthogonal patterns exactly") {
  Eigen::MatrixXd ei = Eigen::MatrixXd::Identity(12, 12);
  std::vector<msd::BasisMatrix> bases;
  for (int k = 0; k < 6; ++k)
    bases.push_back(msd::BasisMatrix::adopt(ei.middleCols(2 * k, 2)));
  const msd::SubspaceCollection c(std::move(bases));

  Eigen::VectorXd y = Eigen::VectorXd::Zero(12);
  y(0) = 1.0;   // subspace 0
  y(7) = -2.0;  // subspace 3
  CHECK(msd::ml_oracle_detect(c, y, 2) == std::vector<int>{0, 3});

  // A zero observation ties every pattern; the lexicographically first wins.
  CHECK(msd::ml_oracle_detect(c, Eigen::VectorXd::Zero(12), 2) == std::vector<int>{0, 1});
}

TEST_CASE("exhaustive detector agrees with thresholding in a favorable regime") {
  Eigen::MatrixXd ei = Eigen::MatrixXd::Identity(12, 12);
  std::vector<msd::BasisMatrix> bases;
  for (int k = 0; k < 6; ++k)
    bases.push_back(msd::BasisMatrix::adopt(ei.middleCols(2 * k, 2)));
  const msd::SubspaceCollection c(std::move(bases));
  const msd::CoherenceProfile profile = msd::compute_profile(c);

  RngStream rng(8822);
  const msd::ThresholdParams params = msd::ThresholdParams::uncalibrated(
      0.1, 2, 6, 2, 2.0, msd::NoiseSpec::bounded(0.0));
  for (int t = 0; t < 20; ++t) {
    const msd::ActivityPattern pattern = msd::sample_activity_pattern(6, 2, rng);
    const msd::MixingCoefficients coeffs =
        msd::sample_coefficients(msd::allocate_energies(2, 2.0), 2, rng);
    const msd::UnmixingInstance inst =
        msd::synthesize(c, pattern, coeffs, msd::NoiseSpec::bounded(0.0), rng);
    const msd::DetectionResult det = msd::detect(c, profile, inst.observation, params);
    CHECK(det.estimated_active == pattern.indices);
    CHECK(msd::ml_oracle_detect(c, inst.observation, 2) == pattern.indices);
  }
}

TEST_CASE("exhaustive detector enforces its budget and shapes") {
  const msd::SubspaceCollection c = msd::generate_collection(45, 1, 40, 7);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(45);
  CHECK_THROWS_AS(msd::ml_oracle_detect(c, y, 20), std::invalid_argument);  // C(40,20)
  CHECK_THROWS_AS(msd::ml_oracle_detect(c, y, 0), std::invalid_argument);
  CHECK_THROWS_AS(msd::ml_oracle_detect(c, y, 40), std::invalid_argument);
  CHECK_THROWS_AS(msd::ml_oracle_detect(c, Eigen::VectorXd::Zero(44), 2),
                  std::invalid_argument);
}
