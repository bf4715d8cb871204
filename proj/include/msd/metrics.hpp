#pragma once

#include <vector>

namespace msd {

// One Monte Carlo trial: true pattern and the detector's estimate, both
// sorted 0-based index sets.
struct TrialRecord {
  std::vector<int> true_active;
  std::vector<int> estimated_active;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;  // binomial standard error sqrt(p (1 - p) / trials)
};

// Family-wise error event: the estimate is not a subset of the truth.
bool family_wise_error(const TrialRecord& record);

// Fraction of trials with a family-wise error, with its standard error.
Estimate fwer_estimate(const std::vector<TrialRecord>& records);

// |true \ estimated| / |true|; the true set must be nonempty.
double ndp(const TrialRecord& record);

// |estimated \ true| / |estimated|; defined as 0 when the estimate is empty.
double fdp(const TrialRecord& record);

struct BatchSummary {
  int trials = 0;
  Estimate fwer;
  double ndp_mean = 0.0;
  double fdp_mean = 0.0;
};

BatchSummary summarize(const std::vector<TrialRecord>& records);

}  // namespace msd
