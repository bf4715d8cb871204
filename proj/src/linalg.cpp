#include "msd/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msd {

double orthonormality_defect(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd gram = m.transpose() * m;
  const auto d = gram.cols();
  return (gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
}

BasisMatrix BasisMatrix::adopt(Eigen::MatrixXd m) {
  if (m.cols() < 1 || m.rows() < m.cols())
    throw std::invalid_argument("BasisMatrix: need D >= d >= 1, got " +
                                std::to_string(m.rows()) + " x " + std::to_string(m.cols()));
  if (!m.allFinite())
    throw std::invalid_argument("BasisMatrix: entries must be finite");
  const double defect = orthonormality_defect(m);
  if (defect > kTol.orthonormality)
    throw std::invalid_argument("BasisMatrix: orthonormality defect " +
                                std::to_string(defect) + " exceeds tolerance");
  return BasisMatrix(std::move(m));
}

BasisMatrix haar_stiefel_sample(int ambient_dim, int subspace_dim, RngStream& rng) {
  if (subspace_dim < 1 || ambient_dim < subspace_dim)
    throw std::invalid_argument("haar_stiefel_sample: need D >= d >= 1");
  Eigen::MatrixXd g(ambient_dim, subspace_dim);
  for (int i = 0; i < ambient_dim; ++i)
    for (int j = 0; j < subspace_dim; ++j) g(i, j) = rng.gaussian();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim, subspace_dim);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (int j = 0; j < subspace_dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return BasisMatrix::adopt(std::move(q));
}

BasisMatrix orthonormalize(const Eigen::MatrixXd& raw) {
  if (raw.cols() < 1 || raw.rows() < raw.cols())
    throw std::invalid_argument("orthonormalize: need D >= d >= 1");
  if (!raw.allFinite())
    throw std::invalid_argument("orthonormalize: entries must be finite");

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(raw);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(sv.size() - 1) <= kTol.rank_rtol * sv(0))
    throw std::invalid_argument(
        "orthonormalize: numerically rank-deficient input (singular value ratio below tolerance)");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(raw.rows(), raw.cols());

  // Largest-magnitude entry of each column positive; ties to the lowest row.
  for (int j = 0; j < q.cols(); ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < q.rows(); ++i) {
      const double a = std::abs(q(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (q(arg, j) < 0.0) q.col(j) = -q.col(j);
  }
  return BasisMatrix::adopt(std::move(q));
}

namespace {

double power_iteration_norm(const Eigen::MatrixXd& m) {
  // Iterate on the smaller Gram matrix; deterministic seeded start vector.
  const bool tall = m.rows() >= m.cols();
  const Eigen::MatrixXd gram = tall ? Eigen::MatrixXd(m.transpose() * m)
                                    : Eigen::MatrixXd(m * m.transpose());
  const auto dim = gram.rows();
  RngStream rng(0x5D2E1F87C3B4A690ULL);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.gaussian();
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < kTol.power_iter_max; ++it) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(gram * v);
    if (std::abs(next - lambda) <= kTol.power_iter_tol * std::max(next, 1.0)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace

double operator_norm_2(const Eigen::MatrixXd& m) {
  if (m.size() == 0) throw std::invalid_argument("operator_norm_2: empty matrix");
  if (!m.allFinite()) throw std::invalid_argument("operator_norm_2: entries must be finite");
  if (m.rows() <= kTol.svd_max_dim && m.cols() <= kTol.svd_max_dim) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  }
  return power_iteration_norm(m);
}

double projection_energy(const BasisMatrix& basis, const Eigen::VectorXd& y) {
  if (y.size() != basis.ambient_dim())
    throw std::invalid_argument("projection_energy: vector length " +
                                std::to_string(y.size()) + " does not match ambient dimension " +
                                std::to_string(basis.ambient_dim()));
  return (basis.m().transpose() * y).squaredNorm();
}

void write_basis_file(const std::string& path, const std::vector<BasisMatrix>& bases) {
  if (bases.empty()) throw std::invalid_argument("write_basis_file: empty collection");
  const int D = bases[0].ambient_dim();
  const int d = bases[0].subspace_dim();
  for (const auto& b : bases)
    if (b.ambient_dim() != D || b.subspace_dim() != d)
      throw std::invalid_argument("write_basis_file: bases must share dimensions");

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_basis_file: cannot open " + path);
  out << D << " " << d << " " << bases.size() << "\n";
  char buf[64];
  for (const auto& b : bases) {
    for (int i = 0; i < D; ++i) {
      for (int j = 0; j < d; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", b.m()(i, j));
        out << buf << (j + 1 == d ? "" : " ");
      }
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("write_basis_file: write failed for " + path);
}

std::vector<BasisMatrix> read_basis_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_basis_file: cannot open " + path);
  int D = 0, d = 0;
  long long N = 0;
  if (!(in >> D >> d >> N) || D < 1 || d < 1 || N < 1)
    throw std::runtime_error("read_basis_file: malformed header in " + path);
  std::vector<BasisMatrix> bases;
  bases.reserve(static_cast<std::size_t>(N));
  for (long long k = 0; k < N; ++k) {
    Eigen::MatrixXd m(D, d);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < d; ++j)
        if (!(in >> m(i, j)))
          throw std::runtime_error("read_basis_file: truncated data in " + path);
    bases.push_back(BasisMatrix::adopt(std::move(m)));
  }
  return bases;
}

}  // namespace msd
