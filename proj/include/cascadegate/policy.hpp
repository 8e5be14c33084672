#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "cascadegate/core.hpp"
#include "cascadegate/cost.hpp"

namespace cascadegate {

enum class Strategy {
  random_routing,
  score_routing,
  hybrid_routing,
  frugal_cascade,
  margin_cascade,
  committee_cascade,
};

inline constexpr Strategy kAllStrategies[] = {
    Strategy::random_routing, Strategy::score_routing,  Strategy::hybrid_routing,
    Strategy::frugal_cascade, Strategy::margin_cascade, Strategy::committee_cascade,
};

/// Number of small-model samples drawn by the committee strategy.
inline constexpr int kCommitteeCalls = 5;

inline constexpr std::size_t kDefaultWarmup = 10;

std::string_view to_string(Strategy strategy);
/// Accepts the full name ("margin_cascade") or its short form ("margin").
std::optional<Strategy> parse_strategy(std::string_view name);
Family family_of(Strategy strategy);
/// Small-model calls charged per query.
int small_calls_of(Strategy strategy);
/// True when `record` carries the signal `strategy` consumes.
bool has_signal(Strategy strategy, const ReplayRecord& record);

struct PolicyConfig {
  Strategy strategy = Strategy::margin_cascade;
  double probability = 0.0;  // p_r for routing, p_c for cascading
  std::uint64_t seed = 0;
  std::size_t warmup_target = kDefaultWarmup;
  std::size_t reservoir_cap = 0;  // 0 keeps every score
};

/// Linear interpolation between closest ranks: with the values sorted and
/// h = p (n - 1), returns v[floor h] + frac(h) (v[floor h + 1] - v[floor h]).
double quantile_linear(std::span<const double> values, double p);

/// Running p-quantile of every observed score. Undefined until
/// `warmup_target` scores have been observed.
class DynamicThreshold {
 public:
  explicit DynamicThreshold(double quantile_p, std::size_t warmup_target = kDefaultWarmup,
                            std::size_t reservoir_cap = 0, std::uint64_t reservoir_seed = 0);

  void observe(double score);

  std::optional<double> threshold() const { return threshold_; }
  bool warming_up() const { return observed_ < warmup_target_; }
  std::size_t observed() const { return observed_; }
  std::size_t warmup_target() const { return warmup_target_; }
  double quantile_p() const { return quantile_p_; }
  /// Retained scores in ascending order (all scores unless a reservoir cap is set).
  std::span<const double> sample() const { return sorted_; }

 private:
  double quantile_p_;
  std::size_t warmup_target_;
  std::size_t reservoir_cap_;
  std::vector<double> sorted_;
  std::size_t observed_ = 0;
  std::optional<double> threshold_;
  std::mt19937_64 reservoir_rng_;
};

/// Value-returning form of DynamicThreshold::observe.
DynamicThreshold threshold_update(DynamicThreshold state, double new_score);

/// Escalation rule shared by every threshold strategy and the gateway:
/// strictly below the threshold escalates; ties keep the small model.
inline bool below_threshold(double score, const std::optional<double>& threshold) {
  return threshold.has_value() && score < *threshold;
}

/// Post-warm-up decision for call probability `p`. The endpoints are exact:
/// p = 0 never escalates and p = 1 always does; in between the threshold
/// rule applies.
inline bool should_escalate(double score, const std::optional<double>& threshold, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return below_threshold(score, threshold);
}

struct ThresholdStep {
  bool warmup = false;
  std::optional<double> threshold;  // value compared against, before this score is observed
  bool escalate = false;
};

/// Runs the dynamic-threshold decision rule over a score sequence.
std::vector<ThresholdStep> simulate_threshold_decisions(std::span<const double> scores, double quantile_p,
                                                        std::size_t warmup_target = kDefaultWarmup);

/// Stateful calling strategy. With a fixed cost scheme every query is
/// charged the scheme constants; with a measured scheme the record's own
/// costs are charged.
class Policy {
 public:
  Policy(PolicyConfig config, CostScheme scheme);

  Decision decide(const ReplayRecord& record);

  const PolicyConfig& config() const { return config_; }
  const DynamicThreshold& threshold_state() const { return threshold_; }

 private:
  double signal(const ReplayRecord& record) const;

  PolicyConfig config_;
  CostScheme scheme_;
  DynamicThreshold threshold_;
  std::mt19937_64 rng_;
  std::size_t seen_ = 0;
};

}  // namespace cascadegate
