#include "msd/detector.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace msd {

namespace {

const double kE2 = std::exp(2.0);

// delta for the Gaussian noise cap is pinned to the value the FWER guarantee
// uses; it is not a tuning knob.
double gaussian_delta(const ThresholdParams& p) {
  return std::log(2.0 * p.num_subspaces / p.alpha);
}

double noise_cap(const ThresholdParams& p) {
  if (p.noise.kind == NoiseKind::kGaussianIid)
    return gaussian_epsilon(p.noise.sigma, p.subspace_dim, gaussian_delta(p));
  return p.noise.epsilon_eta;
}

// exp(-num/den) with the den -> 0 limit: 0 when the numerator is positive,
// 1 when both vanish.
double exp_ratio_limit(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? 0.0 : 1.0;
  return std::exp(-num / den);
}

}  // namespace

ThresholdParams ThresholdParams::uncalibrated(double alpha, int n, int num_subspaces,
                                              int subspace_dim, double energy_total,
                                              const NoiseSpec& noise) {
  ThresholdParams p{alpha, n, num_subspaces, subspace_dim, energy_total, noise,
                    kDefaultC0, 1.0};
  p.validate();
  return p;
}

ThresholdParams ThresholdParams::calibrated(double alpha, int n, int num_subspaces,
                                            int subspace_dim, double energy_total,
                                            const NoiseSpec& noise, double c1) {
  ThresholdParams p{alpha, n, num_subspaces, subspace_dim, energy_total, noise, 1.0, c1};
  p.validate();
  return p;
}

void ThresholdParams::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("ThresholdParams: alpha must be in (0, 1]");
  if (n < 1 || n >= num_subspaces)
    throw std::invalid_argument("ThresholdParams: need 1 <= n < N");
  if (subspace_dim < 1)
    throw std::invalid_argument("ThresholdParams: subspace_dim must be positive");
  if (!(energy_total > 0.0))
    throw std::invalid_argument("ThresholdParams: energy_total must be positive");
  if (!(c0 > 0.0)) throw std::invalid_argument("ThresholdParams: c0 must be positive");
  if (!(c1 > 0.0) || c1 > 1.0)
    throw std::invalid_argument("ThresholdParams: c1 must be in (0, 1]");
  if (noise.kind == NoiseKind::kGaussianIid ? noise.sigma < 0.0 : noise.epsilon_eta < 0.0)
    throw std::invalid_argument("ThresholdParams: noise level must be nonnegative");
}

std::vector<double> test_statistics(const SubspaceCollection& c, const Eigen::VectorXd& y) {
  if (y.size() != c.ambient_dim())
    throw std::invalid_argument("test_statistics: observation length does not match D");
  std::vector<double> stats(static_cast<std::size_t>(c.size()));
  for (int k = 0; k < c.size(); ++k)
    stats[static_cast<std::size_t>(k)] = projection_energy(c.basis(k), y);
  return stats;
}

double gaussian_epsilon(double sigma, int subspace_dim, double delta) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_epsilon: sigma must be nonnegative");
  if (subspace_dim < 1)
    throw std::invalid_argument("gaussian_epsilon: subspace_dim must be positive");
  if (delta < 0.0) throw std::invalid_argument("gaussian_epsilon: delta must be nonnegative");
  const double d = subspace_dim;
  return sigma * std::sqrt(d + 2.0 * delta + 2.0 * std::sqrt(d * delta));
}

namespace {

double threshold_core(const ThresholdParams& p, double rho_k, double gamma2_k,
                      double eps, double log_arg) {
  if (rho_k < 0.0 || gamma2_k < 0.0)
    throw std::invalid_argument("threshold: coherences must be nonnegative");
  const double N = p.num_subspaces;
  const double base = eps + rho_k * std::sqrt(p.n * p.energy_total) +
                      gamma2_k * N / (N - p.n) *
                          std::sqrt(p.energy_total * std::log(log_arg) / p.c0);
  return p.c1 * p.c1 * base * base;
}

}  // namespace

double threshold_deterministic(const ThresholdParams& params, double rho_k, double gamma2_k) {
  params.validate();
  if (params.noise.kind != NoiseKind::kBoundedDeterministic)
    throw std::invalid_argument("threshold_deterministic: params carry Gaussian noise");
  const double log_arg = kE2 * params.num_subspaces / params.alpha;
  return threshold_core(params, rho_k, gamma2_k, params.noise.epsilon_eta, log_arg);
}

double threshold_gaussian(const ThresholdParams& params, double rho_k, double gamma2_k) {
  params.validate();
  if (params.noise.kind != NoiseKind::kGaussianIid)
    throw std::invalid_argument("threshold_gaussian: params carry bounded noise");
  const double eps =
      gaussian_epsilon(params.noise.sigma, params.subspace_dim, gaussian_delta(params));
  const double log_arg = 2.0 * kE2 * params.num_subspaces / params.alpha;
  return threshold_core(params, rho_k, gamma2_k, eps, log_arg);
}

std::vector<double> thresholds(const ThresholdParams& params, const CoherenceProfile& profile) {
  if (profile.size() != params.num_subspaces)
    throw std::invalid_argument("thresholds: profile size does not match num_subspaces");
  std::vector<double> taus(static_cast<std::size_t>(profile.size()));
  for (int k = 0; k < profile.size(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    taus[ku] = params.noise.kind == NoiseKind::kGaussianIid
                   ? threshold_gaussian(params, profile.avg_mixing[ku], profile.local_two[ku])
                   : threshold_deterministic(params, profile.avg_mixing[ku],
                                             profile.local_two[ku]);
  }
  return taus;
}

DetectionResult detect(const SubspaceCollection& c, const CoherenceProfile& profile,
                       const Eigen::VectorXd& y, const ThresholdParams& params) {
  if (profile.size() != c.size())
    throw std::invalid_argument("detect: profile size does not match the collection");
  DetectionResult result;
  result.statistics = test_statistics(c, y);
  result.thresholds = thresholds(params, profile);
  for (int k = 0; k < c.size(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (result.statistics[ku] > result.thresholds[ku]) result.estimated_active.push_back(k);
  }
  return result;
}

std::vector<int> guaranteed_set(const ActivityPattern& pattern,
                                const std::vector<double>& active_energies,
                                const CoherenceProfile& profile,
                                const ThresholdParams& params) {
  params.validate();
  if (active_energies.size() != pattern.indices.size())
    throw std::invalid_argument("guaranteed_set: one energy per active subspace");
  if (profile.size() != params.num_subspaces)
    throw std::invalid_argument("guaranteed_set: profile size does not match num_subspaces");
  const double N = params.num_subspaces;
  const double EA = params.energy_total;
  const bool gaussian = params.noise.kind == NoiseKind::kGaussianIid;
  const double eps = noise_cap(params);
  const double log_front = gaussian ? std::log(2.0 * kE2 * N / params.alpha)
                                    : std::log(kE2 * N / params.alpha);
  const double log_rest = std::log(std::exp(1.0) * N);

  std::vector<int> kept;
  for (std::size_t j = 0; j < pattern.indices.size(); ++j) {
    const int i = pattern.indices[j];
    const double Ei = active_energies[j];
    if (Ei < 0.0 || Ei > EA + kTol.energy_sum)
      throw std::invalid_argument("guaranteed_set: active energy outside [0, E_A]");
    const double slack = std::max(EA - Ei, 0.0);
    const double e1 = std::pow(std::sqrt(EA) + std::sqrt(slack), 2.0);
    const double e2 =
        std::pow(std::sqrt(EA * log_front) +
                     (2.0 - params.n / N) * std::sqrt(2.0 * slack * log_rest),
                 2.0);
    const auto iu = static_cast<std::size_t>(i);
    const double rhs = 2.0 * eps + profile.avg_mixing[iu] * std::sqrt(params.n * e1) +
                       profile.local_two[iu] * N / (N - params.n) * std::sqrt(e2 / params.c0);
    if (Ei > rhs * rhs) kept.push_back(i);
  }
  return kept;
}

TailBound lemma1_bound(const ThresholdParams& params, double rho_k, double gamma2_k,
                       double tau) {
  params.validate();
  if (rho_k < 0.0 || gamma2_k < 0.0)
    throw std::invalid_argument("lemma1_bound: coherences must be nonnegative");
  if (!(tau > 0.0)) throw std::invalid_argument("lemma1_bound: tau must be positive");

  const bool gaussian = params.noise.kind == NoiseKind::kGaussianIid;
  const double eps = noise_cap(params);
  const double N = params.num_subspaces;
  const double EA = params.energy_total;
  const double floor = eps + rho_k * std::sqrt(params.n * EA);
  if (!(tau > floor * floor)) return TailBound{1.0, true};

  const double gap = std::sqrt(tau) - floor;
  const double num = params.c0 * (N - params.n) * (N - params.n) * gap * gap;
  const double den = N * N * gamma2_k * gamma2_k * EA;
  double value = kE2 * exp_ratio_limit(num, den);
  if (gaussian) value += std::exp(-gaussian_delta(params));
  return TailBound{value, false};
}

TailBound lemma2_bound(const ThresholdParams& params, double rho_k, double gamma2_k,
                       double energy_k, double tau) {
  params.validate();
  if (rho_k < 0.0 || gamma2_k < 0.0)
    throw std::invalid_argument("lemma2_bound: coherences must be nonnegative");
  if (!(tau > 0.0)) throw std::invalid_argument("lemma2_bound: tau must be positive");
  if (!(energy_k > 0.0))
    throw std::invalid_argument("lemma2_bound: energy_k must be positive");
  if (energy_k > params.energy_total + kTol.energy_sum)
    throw std::invalid_argument("lemma2_bound: energy_k exceeds energy_total");

  const bool gaussian = params.noise.kind == NoiseKind::kGaussianIid;
  const double eps = noise_cap(params);
  const double N = params.num_subspaces;
  const double slack = std::max(params.energy_total - energy_k, 0.0);
  const double drag = eps + rho_k * std::sqrt(params.n * slack);
  const bool energy_ok = energy_k > drag * drag;
  const double reach = std::sqrt(energy_k) - drag;
  const bool tau_ok = energy_ok && tau < reach * reach;
  if (!energy_ok || !tau_ok) return TailBound{1.0, true};

  const double gap = reach - std::sqrt(tau);
  const double num = params.c0 * (N - params.n) * (N - params.n) * gap * gap;
  const double den =
      (2.0 * N - params.n) * (2.0 * N - params.n) * gamma2_k * gamma2_k * slack;
  double value = kE2 * exp_ratio_limit(num, den);
  if (gaussian) value += std::exp(-gaussian_delta(params));
  return TailBound{value, false};
}

void write_detection_csv(const std::string& path, const DetectionResult& result,
                         const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_detection_csv: cannot open " + path);
  for (const auto& line : comments) out << "# " << line << "\n";
  out << "k,T_k,tau_k,active\n";
  char buf[128];
  std::size_t next = 0;
  for (std::size_t k = 0; k < result.statistics.size(); ++k) {
    const bool active = next < result.estimated_active.size() &&
                        result.estimated_active[next] == static_cast<int>(k);
    if (active) ++next;
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%d\n", k + 1, result.statistics[k],
                  result.thresholds[k], active ? 1 : 0);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_detection_csv: write failed for " + path);
}

}  // namespace msd
