#pragma once

#include <span>

#include "cascadegate/core.hpp"

namespace cascadegate {

enum class Family { routing, cascading };

struct BudgetTarget {
  double target_avg_cost = 0.0;
  Family family = Family::routing;
};

/// Probability of calling the large model so that routing averages `budget`:
/// budget = (1 - p) * avg_small + p * avg_large. Requires
/// avg_small <= budget <= avg_large, else Error{budget_range}.
double routing_probability(double budget, const CostScheme& scheme);

/// Escalation probability so that cascading averages `budget`:
/// budget = small_calls * avg_small + p * avg_large. `small_calls` is the
/// number of small-model calls per query (5 for the committee strategy).
/// Requires small_calls * avg_small <= budget <= small_calls * avg_small + avg_large.
double cascade_probability(double budget, const CostScheme& scheme, int small_calls = 1);

double probability_for(const BudgetTarget& target, const CostScheme& scheme, int small_calls = 1);

/// Means of the per-record small and large costs.
CostScheme measure_averages(std::span<const ReplayRecord> records);

/// Running totals of realized spend.
class CostMeter {
 public:
  void charge(double cost) {
    total_ += cost;
    ++queries_;
  }
  double total() const { return total_; }
  std::size_t queries() const { return queries_; }
  double average() const { return queries_ == 0 ? 0.0 : total_ / static_cast<double>(queries_); }

 private:
  double total_ = 0.0;
  std::size_t queries_ = 0;
};

}  // namespace cascadegate
