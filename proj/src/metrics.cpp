#include "msd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msd {

namespace {

// Both sets are sorted; count elements of a missing from b.
int count_missing(const std::vector<int>& a, const std::vector<int>& b) {
  int missing = 0;
  auto it = b.begin();
  for (int x : a) {
    it = std::lower_bound(it, b.end(), x);
    if (it == b.end() || *it != x) ++missing;
  }
  return missing;
}

}  // namespace

bool family_wise_error(const TrialRecord& record) {
  return count_missing(record.estimated_active, record.true_active) > 0;
}

Estimate fwer_estimate(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw std::invalid_argument("fwer_estimate: no trials");
  const double trials = static_cast<double>(records.size());
  double errors = 0.0;
  for (const auto& r : records) errors += family_wise_error(r) ? 1.0 : 0.0;
  const double p = errors / trials;
  return Estimate{p, std::sqrt(p * (1.0 - p) / trials)};
}

double ndp(const TrialRecord& record) {
  if (record.true_active.empty())
    throw std::invalid_argument("ndp: true active set must be nonempty");
  return static_cast<double>(count_missing(record.true_active, record.estimated_active)) /
         static_cast<double>(record.true_active.size());
}

double fdp(const TrialRecord& record) {
  if (record.estimated_active.empty()) return 0.0;
  return static_cast<double>(count_missing(record.estimated_active, record.true_active)) /
         static_cast<double>(record.estimated_active.size());
}

BatchSummary summarize(const std::vector<TrialRecord>& records) {
  BatchSummary s;
  s.trials = static_cast<int>(records.size());
  s.fwer = fwer_estimate(records);
  double ndp_sum = 0.0, fdp_sum = 0.0;
  for (const auto& r : records) {
    ndp_sum += ndp(r);
    fdp_sum += fdp(r);
  }
  s.ndp_mean = ndp_sum / s.trials;
  s.fdp_mean = fdp_sum / s.trials;
  return s;
}

}  // namespace msd
