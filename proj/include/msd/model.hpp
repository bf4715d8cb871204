#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "msd/coherence.hpp"
#include "msd/rng.hpp"

namespace msd {

// Set of active subspace indices: sorted, distinct, 0-based internally.
// All file and CSV I/O uses 1-based indices.
struct ActivityPattern {
  std::vector<int> indices;

  int n() const { return static_cast<int>(indices.size()); }

  // Validates 1 <= n < num_subspaces, distinctness and range, and sorts.
  static ActivityPattern checked(std::vector<int> idx, int num_subspaces);
};

enum class NoiseKind { kBoundedDeterministic, kGaussianIid };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kGaussianIid;
  double epsilon_eta = 0.0;  // norm budget for bounded noise
  double sigma = 0.0;        // per-coordinate deviation for Gaussian noise

  static NoiseSpec bounded(double epsilon_eta);
  static NoiseSpec gaussian(double sigma);
};

// One coefficient vector per active subspace plus its energy; |theta_j|^2
// matches energies[j] within kTol.energy_match by construction.
struct MixingCoefficients {
  std::vector<Eigen::VectorXd> theta;
  std::vector<double> energies;

  double total_energy() const;

  // Derives energies from the vectors themselves (deterministic test mode).
  static MixingCoefficients from_vectors(std::vector<Eigen::VectorXd> theta);
};

struct UnmixingInstance {
  ActivityPattern pattern;
  MixingCoefficients coeffs;
  NoiseSpec noise;
  Eigen::VectorXd noiseless;    // empty when the instance was read from a file
  Eigen::VectorXd observation;
};

// Uniform n-subset of {0, ..., num_subspaces - 1}, returned sorted.
ActivityPattern sample_activity_pattern(int num_subspaces, int n, RngStream& rng);

// Equal split of total_energy over n slots.
std::vector<double> allocate_energies(int n, double total_energy);

// Custom split; entries must be nonnegative and sum to total_energy within
// kTol.energy_sum (absolute, relative above 1).
std::vector<double> allocate_energies(int n, double total_energy,
                                      const std::vector<double>& custom);

// theta_j uniform on the sphere of radius sqrt(E_j) in R^d; E_j = 0 gives the
// zero vector.
MixingCoefficients sample_coefficients(const std::vector<double>& energies,
                                       int subspace_dim, RngStream& rng);

// y = sum_j Phi_{i_j} theta_j + eta. Gaussian noise is iid N(0, sigma^2);
// bounded noise is a uniform direction scaled to 0.99 * epsilon_eta.
UnmixingInstance synthesize(const SubspaceCollection& c, const ActivityPattern& pattern,
                            const MixingCoefficients& coeffs, const NoiseSpec& noise,
                            RngStream& rng);

// Text record: pattern (1-based), energies, theta rows, noise line, then the
// observation, one coordinate per line. read_instance leaves noiseless empty.
void write_instance(const std::string& path, const UnmixingInstance& instance);
UnmixingInstance read_instance(const std::string& path);

}  // namespace msd
