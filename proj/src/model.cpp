#include "msd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "msd/tolerances.hpp"

namespace msd {

ActivityPattern ActivityPattern::checked(std::vector<int> idx, int num_subspaces) {
  const int n = static_cast<int>(idx.size());
  if (n < 1 || n >= num_subspaces)
    throw std::invalid_argument("ActivityPattern: need 1 <= n < N, got n = " +
                                std::to_string(n) + ", N = " + std::to_string(num_subspaces));
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw std::invalid_argument("ActivityPattern: indices must be distinct");
  if (idx.front() < 0 || idx.back() >= num_subspaces)
    throw std::invalid_argument("ActivityPattern: index out of range");
  return ActivityPattern{std::move(idx)};
}

NoiseSpec NoiseSpec::bounded(double epsilon_eta) {
  if (epsilon_eta < 0.0)
    throw std::invalid_argument("NoiseSpec: epsilon_eta must be nonnegative");
  return NoiseSpec{NoiseKind::kBoundedDeterministic, epsilon_eta, 0.0};
}

NoiseSpec NoiseSpec::gaussian(double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("NoiseSpec: sigma must be nonnegative");
  return NoiseSpec{NoiseKind::kGaussianIid, 0.0, sigma};
}

double MixingCoefficients::total_energy() const {
  double sum = 0.0;
  for (double e : energies) sum += e;
  return sum;
}

MixingCoefficients MixingCoefficients::from_vectors(std::vector<Eigen::VectorXd> theta) {
  if (theta.empty())
    throw std::invalid_argument("MixingCoefficients: need at least one vector");
  MixingCoefficients out;
  out.energies.reserve(theta.size());
  for (const auto& t : theta) out.energies.push_back(t.squaredNorm());
  out.theta = std::move(theta);
  return out;
}

ActivityPattern sample_activity_pattern(int num_subspaces, int n, RngStream& rng) {
  if (n < 1 || n >= num_subspaces)
    throw std::invalid_argument("sample_activity_pattern: need 1 <= n < N");
  // Partial Fisher-Yates over an index pool; uniform over n-subsets.
  std::vector<int> pool(static_cast<std::size_t>(num_subspaces));
  for (int i = 0; i < num_subspaces; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::vector<int> picked(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto j =
        k + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(num_subspaces - k)));
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
    picked[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
  }
  std::sort(picked.begin(), picked.end());
  return ActivityPattern{std::move(picked)};
}

std::vector<double> allocate_energies(int n, double total_energy) {
  if (n < 1) throw std::invalid_argument("allocate_energies: n must be positive");
  if (total_energy <= 0.0)
    throw std::invalid_argument("allocate_energies: total_energy must be positive");
  return std::vector<double>(static_cast<std::size_t>(n), total_energy / n);
}

std::vector<double> allocate_energies(int n, double total_energy,
                                      const std::vector<double>& custom) {
  if (n < 1) throw std::invalid_argument("allocate_energies: n must be positive");
  if (static_cast<int>(custom.size()) != n)
    throw std::invalid_argument("allocate_energies: custom list must have n entries");
  double sum = 0.0;
  for (double e : custom) {
    if (e < 0.0) throw std::invalid_argument("allocate_energies: energies must be nonnegative");
    sum += e;
  }
  if (std::abs(sum - total_energy) > kTol.energy_sum * std::max(1.0, std::abs(total_energy)))
    throw std::invalid_argument("allocate_energies: custom energies sum to " +
                                std::to_string(sum) + ", expected " +
                                std::to_string(total_energy));
  return custom;
}

MixingCoefficients sample_coefficients(const std::vector<double>& energies,
                                       int subspace_dim, RngStream& rng) {
  if (energies.empty())
    throw std::invalid_argument("sample_coefficients: need at least one energy");
  if (subspace_dim < 1)
    throw std::invalid_argument("sample_coefficients: subspace_dim must be positive");
  MixingCoefficients out;
  out.energies = energies;
  out.theta.reserve(energies.size());
  for (double e : energies) {
    if (e < 0.0)
      throw std::invalid_argument("sample_coefficients: energies must be nonnegative");
    Eigen::VectorXd t(subspace_dim);
    if (e == 0.0) {
      t.setZero();
    } else {
      double norm = 0.0;
      do {
        for (int i = 0; i < subspace_dim; ++i) t(i) = rng.gaussian();
        norm = t.norm();
      } while (norm == 0.0);
      t *= std::sqrt(e) / norm;
    }
    out.theta.push_back(std::move(t));
  }
  return out;
}

UnmixingInstance synthesize(const SubspaceCollection& c, const ActivityPattern& pattern,
                            const MixingCoefficients& coeffs, const NoiseSpec& noise,
                            RngStream& rng) {
  if (pattern.n() < 1 || pattern.indices.back() >= c.size())
    throw std::invalid_argument("synthesize: pattern does not fit the collection");
  if (coeffs.theta.size() != pattern.indices.size())
    throw std::invalid_argument("synthesize: one coefficient vector per active subspace");
  const int D = c.ambient_dim();
  Eigen::VectorXd clean = Eigen::VectorXd::Zero(D);
  for (std::size_t j = 0; j < coeffs.theta.size(); ++j) {
    if (coeffs.theta[j].size() != c.subspace_dim())
      throw std::invalid_argument("synthesize: coefficient dimension mismatch");
    clean += c.basis(pattern.indices[j]).m() * coeffs.theta[j];
  }

  Eigen::VectorXd eta(D);
  if (noise.kind == NoiseKind::kGaussianIid) {
    for (int i = 0; i < D; ++i) eta(i) = noise.sigma * rng.gaussian();
  } else {
    // Uniform direction at fixed magnitude 0.99 * epsilon_eta, safely inside
    // the norm budget.
    double norm = 0.0;
    do {
      for (int i = 0; i < D; ++i) eta(i) = rng.gaussian();
      norm = eta.norm();
    } while (norm == 0.0);
    eta *= 0.99 * noise.epsilon_eta / norm;
  }

  UnmixingInstance inst;
  inst.pattern = pattern;
  inst.coeffs = coeffs;
  inst.noise = noise;
  inst.noiseless = clean;
  inst.observation = clean + eta;
  return inst;
}

void write_instance(const std::string& path, const UnmixingInstance& instance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_instance: cannot open " + path);
  char buf[64];
  out << "pattern";
  for (int idx : instance.pattern.indices) out << " " << idx + 1;
  out << "\nenergies";
  for (double e : instance.coeffs.energies) {
    std::snprintf(buf, sizeof buf, " %.17g", e);
    out << buf;
  }
  out << "\n";
  for (const auto& t : instance.coeffs.theta) {
    out << "theta";
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %.17g", t(i));
      out << buf;
    }
    out << "\n";
  }
  if (instance.noise.kind == NoiseKind::kGaussianIid) {
    std::snprintf(buf, sizeof buf, "%.17g", instance.noise.sigma);
    out << "noise gaussian " << buf << "\n";
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", instance.noise.epsilon_eta);
    out << "noise bounded " << buf << "\n";
  }
  out << "y\n";
  for (Eigen::Index i = 0; i < instance.observation.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", instance.observation(i));
    out << buf;
  }
  if (!out) throw std::runtime_error("write_instance: write failed for " + path);
}

UnmixingInstance read_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_instance: cannot open " + path);

  UnmixingInstance inst;
  std::string line, key;
  bool have_pattern = false, have_noise = false;
  std::vector<double> y_values;
  bool in_y = false;

  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (in_y) {
      std::istringstream row(line);
      double v;
      while (row >> v) y_values.push_back(v);
      continue;
    }
    std::istringstream ls(line);
    ls >> key;
    if (key == "pattern") {
      int idx;
      std::vector<int> indices;
      while (ls >> idx) indices.push_back(idx - 1);
      if (indices.empty()) throw std::runtime_error("read_instance: empty pattern");
      inst.pattern.indices = std::move(indices);
      std::sort(inst.pattern.indices.begin(), inst.pattern.indices.end());
      have_pattern = true;
    } else if (key == "energies") {
      double e;
      while (ls >> e) inst.coeffs.energies.push_back(e);
    } else if (key == "theta") {
      std::vector<double> vals;
      double v;
      while (ls >> v) vals.push_back(v);
      Eigen::VectorXd t(static_cast<Eigen::Index>(vals.size()));
      for (std::size_t i = 0; i < vals.size(); ++i)
        t(static_cast<Eigen::Index>(i)) = vals[i];
      inst.coeffs.theta.push_back(std::move(t));
    } else if (key == "noise") {
      std::string kind;
      double value;
      if (!(ls >> kind >> value))
        throw std::runtime_error("read_instance: malformed noise line");
      if (kind == "gaussian")
        inst.noise = NoiseSpec::gaussian(value);
      else if (kind == "bounded")
        inst.noise = NoiseSpec::bounded(value);
      else
        throw std::runtime_error("read_instance: unknown noise kind " + kind);
      have_noise = true;
    } else if (key == "y") {
      in_y = true;
    } else {
      throw std::runtime_error("read_instance: unknown record key " + key);
    }
  }
  if (!have_pattern || !have_noise || y_values.empty())
    throw std::runtime_error("read_instance: incomplete record in " + path);
  inst.observation.resize(static_cast<Eigen::Index>(y_values.size()));
  for (std::size_t i = 0; i < y_values.size(); ++i)
    inst.observation(static_cast<Eigen::Index>(i)) = y_values[i];
  inst.noiseless.resize(0);
  return inst;
}

}  // namespace msd
