#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "msd/coherence.hpp"
#include "msd/model.hpp"

namespace msd {

// Baseline exponent constant in the tail bounds and thresholds.
inline const double kDefaultC0 = std::exp(-1.0) / 256.0;

// Everything the threshold formulas need besides the coherence profile.
// Uncalibrated: c0 = exp(-1)/256, c1 = 1 (the analytical guarantee).
// Calibrated: c0 = 1 and thresholds scaled by c1^2 (empirical operating point).
struct ThresholdParams {
  double alpha = 0.1;       // FWER target, in (0, 1]
  int n = 1;                // number of active subspaces, 1 <= n < N
  int num_subspaces = 2;    // N
  int subspace_dim = 1;     // d
  double energy_total = 1;  // E_A
  NoiseSpec noise;
  double c0 = kDefaultC0;
  double c1 = 1.0;

  static ThresholdParams uncalibrated(double alpha, int n, int num_subspaces,
                                      int subspace_dim, double energy_total,
                                      const NoiseSpec& noise);
  static ThresholdParams calibrated(double alpha, int n, int num_subspaces,
                                    int subspace_dim, double energy_total,
                                    const NoiseSpec& noise, double c1);
  void validate() const;
};

// T_k = |Phi_k^T y|^2 for every subspace in the collection.
std::vector<double> test_statistics(const SubspaceCollection& c, const Eigen::VectorXd& y);

// sigma * sqrt(d + 2 delta + 2 sqrt(d delta)): high-probability norm cap for
// iid Gaussian noise restricted to a d-dimensional subspace.
double gaussian_epsilon(double sigma, int subspace_dim, double delta);

// Per-subspace detection thresholds, already scaled by c1^2. The Gaussian
// variant fixes the tail parameter delta = log(2 N / alpha).
double threshold_deterministic(const ThresholdParams& params, double rho_k, double gamma2_k);
double threshold_gaussian(const ThresholdParams& params, double rho_k, double gamma2_k);

// Dispatches on params.noise.kind; one threshold per subspace.
std::vector<double> thresholds(const ThresholdParams& params, const CoherenceProfile& profile);

struct DetectionResult {
  std::vector<double> statistics;
  std::vector<double> thresholds;
  std::vector<int> estimated_active;  // exactly { k : statistics[k] > thresholds[k] }
};

DetectionResult detect(const SubspaceCollection& c, const CoherenceProfile& profile,
                       const Eigen::VectorXd& y, const ThresholdParams& params);

// Subset of the true pattern whose detection is guaranteed at the stated
// confidence: active i stays if E_i clears the energy bound built from its
// coherences. Uses params.c0; the c1 calibration plays no role here.
std::vector<int> guaranteed_set(const ActivityPattern& pattern,
                                const std::vector<double>& active_energies,
                                const CoherenceProfile& profile,
                                const ThresholdParams& params);

// Tail-bound evaluation. When a validity precondition fails the bound is
// vacuous: value 1 with condition_violated set, never an exception.
struct TailBound {
  double value = 1.0;
  bool condition_violated = false;
};

// Right tail of T_k for an inactive subspace: Pr(T_k >= tau) bound.
TailBound lemma1_bound(const ThresholdParams& params, double rho_k, double gamma2_k,
                       double tau);

// Left tail of T_k for an active subspace with energy E_k: Pr(T_k <= tau) bound.
TailBound lemma2_bound(const ThresholdParams& params, double rho_k, double gamma2_k,
                       double energy_k, double tau);

// CSV: '#' metadata lines, then rows k (1-based), T_k, tau_k, active flag.
void write_detection_csv(const std::string& path, const DetectionResult& result,
                         const std::vector<std::string>& comments = {});

}  // namespace msd
