#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "msd/rng.hpp"
#include "msd/tolerances.hpp"

namespace msd {

// Max abs entry of U^T U - I; the orthonormality defect checked on adoption.
double orthonormality_defect(const Eigen::MatrixXd& m);

// Column-orthonormal D x d matrix. Construction goes through adopt(), which
// rejects anything with D < d, d < 1, non-finite entries, or a defect above
// kTol.orthonormality, so holding a BasisMatrix is holding the invariant.
class BasisMatrix {
 public:
  static BasisMatrix adopt(Eigen::MatrixXd m);

  int ambient_dim() const { return static_cast<int>(m_.rows()); }
  int subspace_dim() const { return static_cast<int>(m_.cols()); }
  const Eigen::MatrixXd& m() const { return m_; }

 private:
  explicit BasisMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

// Uniform (Haar) draw from the Stiefel manifold of D x d orthonormal frames:
// iid standard Gaussian fill, thin QR, then column j is multiplied by the sign
// of R_jj so the factorization (and hence the draw) is unique.
BasisMatrix haar_stiefel_sample(int ambient_dim, int subspace_dim, RngStream& rng);

// Orthonormal basis for the column span of raw, computed by thin Householder
// QR after a singular-value rank check (smallest/largest must exceed
// kTol.rank_rtol). Sign convention: the largest-magnitude entry of each output
// column is made positive, ties broken by the lowest row index.
BasisMatrix orthonormalize(const Eigen::MatrixXd& raw);

// Largest singular value. Full SVD when both dimensions are at most
// kTol.svd_max_dim, deterministic power iteration on the Gram matrix above
// that (relative tolerance kTol.power_iter_tol, at most kTol.power_iter_max
// iterations).
double operator_norm_2(const Eigen::MatrixXd& m);

// |U^T y|^2, the energy of y captured by the subspace spanned by basis.
double projection_energy(const BasisMatrix& basis, const Eigen::VectorXd& y);

// Basis-collection text format: one header line "D d N", then N blocks of D
// rows with d whitespace-separated values at 17 significant digits, which
// round-trips IEEE doubles exactly.
void write_basis_file(const std::string& path, const std::vector<BasisMatrix>& bases);
std::vector<BasisMatrix> read_basis_file(const std::string& path);

}  // namespace msd
