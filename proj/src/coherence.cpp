#include "msd/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace msd {

namespace {

void require_index(const SubspaceCollection& c, int i) {
  if (i < 0 || i >= c.size())
    throw std::invalid_argument("subspace index " + std::to_string(i) + " out of range");
}

void require_disjoint(int i, int j, double coherence) {
  if (coherence >= 1.0 - kTol.disjointness_gap)
    throw DegenerateCollectionError(i, j, coherence);
}

// Adds x into the running (top-two, mean, max) reduction for one row.
struct RowReduce {
  double top1 = 0.0, top2 = 0.0, sum = 0.0;
  void add(double x) {
    sum += x;
    if (x > top1) {
      top2 = top1;
      top1 = x;
    } else if (x > top2) {
      top2 = x;
    }
  }
};

}  // namespace

SubspaceCollection::SubspaceCollection(std::vector<BasisMatrix> bases)
    : bases_(std::move(bases)) {
  if (bases_.size() < 2)
    throw std::invalid_argument("SubspaceCollection: need at least 2 subspaces");
  const int D = bases_[0].ambient_dim();
  const int d = bases_[0].subspace_dim();
  for (const auto& b : bases_)
    if (b.ambient_dim() != D || b.subspace_dim() != d)
      throw std::invalid_argument("SubspaceCollection: all bases must share D and d");
}

double subspace_coherence(const BasisMatrix& a, const BasisMatrix& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw std::invalid_argument("subspace_coherence: ambient dimensions differ");
  return operator_norm_2(a.m().transpose() * b.m());
}

double local_two_subspace_coherence(const SubspaceCollection& c, int i) {
  require_index(c, i);
  if (c.size() < 3)
    throw std::invalid_argument(
        "local_two_subspace_coherence: needs at least 3 subspaces");
  RowReduce row;
  for (int j = 0; j < c.size(); ++j) {
    if (j == i) continue;
    const double g = subspace_coherence(c.basis(i), c.basis(j));
    require_disjoint(i, j, g);
    row.add(g);
  }
  return row.top1 + row.top2;
}

double average_mixing_coherence(const SubspaceCollection& c, int i) {
  require_index(c, i);
  const int d = c.subspace_dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < c.size(); ++j) {
    if (j == i) continue;
    acc += c.basis(i).m().transpose() * c.basis(j).m();
  }
  return operator_norm_2(acc) / static_cast<double>(c.size() - 1);
}

double average_subspace_coherence(const SubspaceCollection& c, int i) {
  require_index(c, i);
  double sum = 0.0;
  for (int j = 0; j < c.size(); ++j) {
    if (j == i) continue;
    const double g = subspace_coherence(c.basis(i), c.basis(j));
    require_disjoint(i, j, g);
    sum += g;
  }
  return sum / static_cast<double>(c.size() - 1);
}

double worst_case_coherence(const SubspaceCollection& c) {
  double mu = 0.0;
  int bad_i = -1, bad_j = -1;
  for (int i = 0; i < c.size(); ++i)
    for (int j = i + 1; j < c.size(); ++j) {
      const double g = subspace_coherence(c.basis(i), c.basis(j));
      if (g > mu) {
        mu = g;
        bad_i = i;
        bad_j = j;
      }
    }
  if (bad_i >= 0) require_disjoint(bad_i, bad_j, mu);
  return mu;
}

double coherence_lower_bound(int num_subspaces, int ambient_dim, int subspace_dim) {
  if (num_subspaces < 2 || ambient_dim < 1 || subspace_dim < 1 ||
      subspace_dim > ambient_dim)
    throw std::invalid_argument("coherence_lower_bound: invalid dimensions");
  const double excess =
      std::max(static_cast<double>(num_subspaces) * subspace_dim - ambient_dim, 0.0);
  return std::sqrt(excess /
                   (static_cast<double>(ambient_dim) * (num_subspaces - 1)));
}

CoherenceProfile compute_profile(const SubspaceCollection& c) {
  const int N = c.size();
  if (N < 3) throw std::invalid_argument("compute_profile: needs at least 3 subspaces");
  const int d = c.subspace_dim();

  CoherenceProfile p;
  p.local_two.resize(N);
  p.avg_mixing.resize(N);
  p.avg_subspace.resize(N);

  int bad_i = -1, bad_j = -1;
  double bad_g = 0.0;

  if (N <= kPairCacheMaxN) {
    // Materialize the symmetric pairwise matrix, each pair computed once.
    std::vector<double> gamma(static_cast<std::size_t>(N) * N, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < N; ++i) {
      for (int j = i + 1; j < N; ++j) {
        const double g = subspace_coherence(c.basis(i), c.basis(j));
        gamma[static_cast<std::size_t>(i) * N + j] = g;
        gamma[static_cast<std::size_t>(j) * N + i] = g;
      }
    }
    double mu = 0.0;
    for (int i = 0; i < N; ++i) {
      RowReduce row;
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        const double g = gamma[static_cast<std::size_t>(i) * N + j];
        if (g >= 1.0 - kTol.disjointness_gap && bad_i < 0 && j > i) {
          bad_i = i;
          bad_j = j;
          bad_g = g;
        }
        row.add(g);
      }
      p.local_two[i] = row.top1 + row.top2;
      p.avg_subspace[i] = row.sum / (N - 1);
      mu = std::max(mu, row.top1);
    }
    p.worst_case = mu;
  } else {
    // Streaming per row: each pair is computed twice, nothing is stored.
    std::vector<double> row_max(N, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < N; ++i) {
      RowReduce row;
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        row.add(subspace_coherence(c.basis(i), c.basis(j)));
      }
      p.local_two[i] = row.top1 + row.top2;
      p.avg_subspace[i] = row.sum / (N - 1);
      row_max[i] = row.top1;
    }
    double mu = 0.0;
    for (int i = 0; i < N; ++i) mu = std::max(mu, row_max[i]);
    p.worst_case = mu;
    if (mu >= 1.0 - kTol.disjointness_gap) {
      bad_g = mu;
      for (int i = 0; i < N && bad_i < 0; ++i)
        if (row_max[i] == mu) bad_i = i;
      bad_j = bad_i;  // exact pair is recoverable but not tracked in streaming mode
    }
  }
  if (bad_i >= 0) throw DegenerateCollectionError(bad_i, bad_j, bad_g);

  // rho_i via the summed frame: sum_{j != i} Phi_i^T Phi_j = Phi_i^T S - I.
  Eigen::MatrixXd frame_sum = Eigen::MatrixXd::Zero(c.ambient_dim(), d);
  for (int j = 0; j < N; ++j) frame_sum += c.basis(j).m();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < N; ++i) {
    const Eigen::MatrixXd acc = c.basis(i).m().transpose() * frame_sum - eye;
    p.avg_mixing[i] = operator_norm_2(acc) / static_cast<double>(N - 1);
  }
  return p;
}

CoherenceConditionReport check_coherence_conditions(const CoherenceProfile& profile, int n,
                                                    double energy_total, int num_subspaces,
                                                    double alpha, double c_rho,
                                                    double c_gamma) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("check_coherence_conditions: alpha must be in (0, 1]");
  if (n < 1) throw std::invalid_argument("check_coherence_conditions: n must be positive");
  if (energy_total <= 0.0)
    throw std::invalid_argument("check_coherence_conditions: energy_total must be positive");
  if (num_subspaces != profile.size())
    throw std::invalid_argument(
        "check_coherence_conditions: num_subspaces does not match profile size");
  if (c_rho <= 0.0 || c_gamma <= 0.0)
    throw std::invalid_argument("check_coherence_conditions: constants must be positive");
  const double log_ratio = std::log(static_cast<double>(num_subspaces) / alpha);
  if (log_ratio <= 0.0)
    throw std::invalid_argument("check_coherence_conditions: N / alpha must exceed 1");

  const double rho_cap = c_rho / std::sqrt(n * energy_total);
  const double gamma_cap = c_gamma / std::sqrt(energy_total * log_ratio);

  CoherenceConditionReport report;
  report.per_subspace.resize(profile.local_two.size());
  report.all_pass = true;
  for (std::size_t i = 0; i < report.per_subspace.size(); ++i) {
    auto& m = report.per_subspace[i];
    m.mixing_margin = rho_cap - profile.avg_mixing[i];
    m.local_two_margin = gamma_cap - profile.local_two[i];
    m.mixing_ok = m.mixing_margin >= 0.0;
    m.local_two_ok = m.local_two_margin >= 0.0;
    if (!m.mixing_ok || !m.local_two_ok) report.all_pass = false;
  }
  return report;
}

void write_profile_csv(const std::string& path, const CoherenceProfile& profile,
                       double lower_bound, const std::vector<std::string>& extra_comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_profile_csv: cannot open " + path);
  char buf[128];
  for (const auto& line : extra_comments) out << "# " << line << "\n";
  std::snprintf(buf, sizeof buf, "# worst_case = %.12g\n", profile.worst_case);
  out << buf;
  std::snprintf(buf, sizeof buf, "# coherence_lower_bound = %.12g\n", lower_bound);
  out << buf;
  out << "subspace_index,local_two,avg_mixing,avg_subspace\n";
  for (int i = 0; i < profile.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g\n", i + 1, profile.local_two[i],
                  profile.avg_mixing[i], profile.avg_subspace[i]);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_profile_csv: write failed for " + path);
}

}  // namespace msd
