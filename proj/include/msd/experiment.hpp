#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "msd/detector.hpp"
#include "msd/metrics.hpp"

namespace msd {

enum class EnergyRule {
  kProportionalToActive,  // E_A = n, equal split
  kExplicitTotal,         // E_A = energy_total, equal split
};

enum class ThresholdMode { kTheorem1, kCalibrated };

// A full Monte Carlo sweep: one Haar collection held fixed, Gaussian noise,
// a list of activity levels n, a trial count per level, one random seed.
struct ExperimentConfig {
  int ambient_dim = 0;    // D
  int subspace_dim = 0;   // d
  int num_subspaces = 0;  // N
  std::vector<int> n_sweep;
  double sigma = 0.0;
  double alpha = 0.1;
  EnergyRule energy_rule = EnergyRule::kProportionalToActive;
  double energy_total = 0.0;  // used by kExplicitTotal
  int trials = 0;
  std::uint64_t master_seed = 0;
  ThresholdMode mode = ThresholdMode::kTheorem1;
  double c1 = 1.0;  // used by kCalibrated
  std::string output_path;

  void validate() const;
};

// key = value text format; '#' starts a comment, n_sweep accepts comma lists
// and "a..b" inclusive ranges.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// FNV-1a hash (hex) of the canonical semantic fields; master_seed and
// output_path are reported separately and stay out of the hash.
std::string config_hash(const ExperimentConfig& config);

// N Haar subspaces, one seed substream per basis, all derived from master_seed.
SubspaceCollection generate_collection(int ambient_dim, int subspace_dim,
                                       int num_subspaces, std::uint64_t master_seed);

struct SweepRow {
  int n = 0;
  double c1 = 1.0;
  BatchSummary summary;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  CoherenceProfile profile;
};

// Runs the sweep and writes the results CSV to config.output_path with the
// seed and config hash in '#' metadata lines. Output bytes are a pure
// function of (config, master_seed).
SweepResult run_sweep(const ExperimentConfig& config);

struct CalibrationCell {
  double c1 = 0.0;
  int n = 0;
  double fwer = 0.0;
  double fwer_se = 0.0;
  double ndp_mean = 0.0;
};

struct CalibrationResult {
  double selected_c1 = 0.0;
  int validation_trials = 0;
  std::vector<CalibrationCell> table;  // grid-major, then sweep order
};

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(std::string message, CalibrationResult result)
      : std::runtime_error(std::move(message)), result(std::move(result)) {}
  CalibrationResult result;  // full table, selected_c1 unset
};

// Tunes the threshold shrink factor on trials seeded disjointly from
// run_sweep's. A grid value is feasible when its empirical FWER stays at or
// below alpha with one binomial standard error of cushion at every n in the
// sweep; the smallest feasible value is selected, which drives missed
// detections as low as FWER control allows. Throws CalibrationError (with the
// full table attached) when no grid value is feasible.
CalibrationResult calibrate_c1(const ExperimentConfig& config,
                               const std::vector<double>& c1_grid, int validation_trials);

void write_calibration_csv(const std::string& path, const CalibrationResult& result,
                           const ExperimentConfig& config);

// Histogram CSV for the local two-subspace and average mixing coherences:
// 64 equal-width bins from 0 to each measure's observed max (an all-zero
// measure puts every count in the first bin).
void write_coherence_histograms(const std::string& path, const CoherenceProfile& profile,
                                const std::vector<std::string>& comments = {});

// Generates the configured collection, then writes the per-subspace profile
// CSV and the histogram CSV.
void coherence_report(const ExperimentConfig& config, const std::string& profile_csv,
                      const std::string& histogram_csv);

// Exhaustive maximum-energy reference detector: scans all C(N, n) activity
// patterns (budget-capped at 10^6), scoring each by the energy y keeps after
// projection onto the span of the pattern's concatenated bases. Ties resolve
// to the lexicographically first pattern.
std::vector<int> ml_oracle_detect(const SubspaceCollection& c, const Eigen::VectorXd& y,
                                  int n);

}  // namespace msd
