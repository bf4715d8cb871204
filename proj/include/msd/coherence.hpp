#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "msd/linalg.hpp"

namespace msd {

// Thrown when a pair of subspaces is (numerically) identical: pairwise
// coherence at or above 1 - kTol.disjointness_gap.
class DegenerateCollectionError : public std::runtime_error {
 public:
  DegenerateCollectionError(int i, int j, double coherence)
      : std::runtime_error("degenerate collection: subspaces " + std::to_string(i + 1) +
                           " and " + std::to_string(j + 1) + " have coherence " +
                           std::to_string(coherence)),
        first(i),
        second(j) {}
  int first;   // 0-based pair
  int second;
};

// N subspaces of a shared ambient space, each given by the basis that also
// mixes its coefficients into observations. Immutable after construction;
// pairwise disjointness is enforced wherever pairwise coherences are realized.
class SubspaceCollection {
 public:
  explicit SubspaceCollection(std::vector<BasisMatrix> bases);

  int size() const { return static_cast<int>(bases_.size()); }
  int ambient_dim() const { return bases_[0].ambient_dim(); }
  int subspace_dim() const { return bases_[0].subspace_dim(); }
  const BasisMatrix& basis(int i) const { return bases_.at(static_cast<std::size_t>(i)); }
  const std::vector<BasisMatrix>& bases() const { return bases_; }

 private:
  std::vector<BasisMatrix> bases_;
};

// Per-subspace coherence geometry plus the collection-level worst case.
struct CoherenceProfile {
  std::vector<double> local_two;     // gamma_{2,i}: sum of the two largest pairwise coherences
  std::vector<double> avg_mixing;    // rho_i: norm of the averaged cross-Gram sum
  std::vector<double> avg_subspace;  // mean pairwise coherence seen by subspace i
  double worst_case = 0.0;           // mu: largest pairwise coherence in the collection

  int size() const { return static_cast<int>(local_two.size()); }
};

// Largest singular value of a^T b; basis-invariant, symmetric, in [0, 1].
double subspace_coherence(const BasisMatrix& a, const BasisMatrix& b);

// Sum of the two largest coherences between subspace i and the others (N >= 3).
double local_two_subspace_coherence(const SubspaceCollection& c, int i);

// |sum_{j != i} Phi_i^T Phi_j|_2 / (N - 1). Depends on the stored bases, not
// just the subspaces they span.
double average_mixing_coherence(const SubspaceCollection& c, int i);

// Mean of the pairwise coherences between subspace i and the others.
double average_subspace_coherence(const SubspaceCollection& c, int i);

// Largest pairwise coherence over the collection.
double worst_case_coherence(const SubspaceCollection& c);

// sqrt(max(N d - D, 0) / (D (N - 1))): universal packing floor for mu.
double coherence_lower_bound(int num_subspaces, int ambient_dim, int subspace_dim);

// Full profile in one pass; requires N >= 3. The pairwise matrix is held in
// memory up to kPairCacheMaxN subspaces and streamed row by row above that.
inline constexpr int kPairCacheMaxN = 4096;
CoherenceProfile compute_profile(const SubspaceCollection& c);

// Sufficient-condition check: per subspace i,
//   rho_i      <= c_rho   / sqrt(n * energy_total)
//   gamma_{2,i} <= c_gamma / sqrt(energy_total * log(N / alpha))
// Margins are right-hand side minus left-hand side; the boundary passes.
struct ConditionMargins {
  bool mixing_ok;
  bool local_two_ok;
  double mixing_margin;
  double local_two_margin;
};
struct CoherenceConditionReport {
  std::vector<ConditionMargins> per_subspace;
  bool all_pass = false;
};
CoherenceConditionReport check_coherence_conditions(const CoherenceProfile& profile, int n,
                                                    double energy_total, int num_subspaces,
                                                    double alpha, double c_rho = 1.0,
                                                    double c_gamma = 1.0);

// CSV: commented worst-case / lower-bound lines, then one row per subspace
// with columns subspace_index (1-based), local_two, avg_mixing, avg_subspace.
void write_profile_csv(const std::string& path, const CoherenceProfile& profile,
                       double lower_bound, const std::vector<std::string>& extra_comments = {});

}  // namespace msd
