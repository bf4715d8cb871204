#pragma once

namespace msd {

// Library-wide numeric tolerances and iteration limits, collected in one record
// so tests and callers see a single source of truth.
struct ToleranceConfig {
  double orthonormality;    // max |(U^T U - I)_{ij}| allowed for a basis matrix
  double disjointness_gap;  // pairwise coherence must stay below 1 - this gap
  double rank_rtol;         // smallest/largest singular value ratio counted as full rank
  int svd_max_dim;          // largest matrix dimension still sent to a full SVD
  double power_iter_tol;    // relative-change stopping rule for power iteration
  int power_iter_max;       // iteration cap for power iteration
  double energy_match;      // |theta_j|^2 must match E_j this tightly
  double energy_sum;        // sum of E_j must match total energy this tightly
};

inline constexpr ToleranceConfig kTol{
    1e-10,  // orthonormality
    1e-12,  // disjointness_gap
    1e-12,  // rank_rtol
    64,     // svd_max_dim
    1e-12,  // power_iter_tol
    10000,  // power_iter_max
    1e-10,  // energy_match
    1e-8,   // energy_sum
};

}  // namespace msd
