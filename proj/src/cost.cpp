#include "cascadegate/cost.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cascadegate {

namespace {

[[noreturn]] void out_of_range(double budget, double lo, double hi) {
  throw Error(ErrorCode::budget_range, "budget " + std::to_string(budget) + " outside [" + std::to_string(lo) +
                                           ", " + std::to_string(hi) + "]");
}

}  // namespace

double routing_probability(double budget, const CostScheme& scheme) {
  if (!std::isfinite(budget) || budget < scheme.avg_small || budget > scheme.avg_large) {
    out_of_range(budget, scheme.avg_small, scheme.avg_large);
  }
  return std::clamp((budget - scheme.avg_small) / (scheme.avg_large - scheme.avg_small), 0.0, 1.0);
}

double cascade_probability(double budget, const CostScheme& scheme, int small_calls) {
  if (small_calls < 1) throw Error(ErrorCode::parameter, "small_calls must be >= 1");
  const double floor_cost = small_calls * scheme.avg_small;
  if (!std::isfinite(budget) || budget < floor_cost || budget > floor_cost + scheme.avg_large) {
    out_of_range(budget, floor_cost, floor_cost + scheme.avg_large);
  }
  return std::clamp((budget - floor_cost) / scheme.avg_large, 0.0, 1.0);
}

double probability_for(const BudgetTarget& target, const CostScheme& scheme, int small_calls) {
  return target.family == Family::routing ? routing_probability(target.target_avg_cost, scheme)
                                          : cascade_probability(target.target_avg_cost, scheme, small_calls);
}

CostScheme measure_averages(std::span<const ReplayRecord> records) {
  if (records.empty()) throw Error(ErrorCode::empty_dataset, "cannot measure costs of an empty dataset");
  double small = 0.0;
  double large = 0.0;
  for (const auto& r : records) {
    small += r.small_cost;
    large += r.large_cost;
  }
  const auto n = static_cast<double>(records.size());
  return CostScheme::measured(small / n, large / n);
}

}  // namespace cascadegate
