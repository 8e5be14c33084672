#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascadegate/error.hpp"

namespace cascadegate {

struct TokenProb {
  std::string token;
  double prob = 0.0;

  bool operator==(const TokenProb&) const = default;
};

/// Probability distribution of the small model at one generated position,
/// possibly truncated to its top-k entries. Entries are kept sorted by
/// non-increasing probability.
class TokenDistribution {
 public:
  /// Empty placeholder; only from_entries() yields a valid distribution.
  TokenDistribution() = default;

  /// Validates and sorts. Throws Error{empty_distribution} when `entries` is
  /// empty and Error{range} for probabilities outside [0,1] or a total mass
  /// above 1 + 1e-6.
  static TokenDistribution from_entries(std::vector<TokenProb> entries, int position = 1);

  const std::vector<TokenProb>& entries() const { return entries_; }
  int position() const { return position_; }
  double top() const { return entries_.empty() ? 0.0 : entries_.front().prob; }
  /// Second largest probability, 0 when only one entry is listed.
  double second() const { return entries_.size() > 1 ? entries_[1].prob : 0.0; }

  bool operator==(const TokenDistribution&) const = default;

 private:
  std::vector<TokenProb> entries_;
  int position_ = 1;
};

/// One query's offline trace.
struct ReplayRecord {
  std::string id;
  std::string task;
  TokenDistribution small_first_token;
  std::string small_answer;
  bool small_correct = false;
  std::string large_answer;
  bool large_correct = false;
  double small_cost = 1.0;
  double large_cost = 1.0;
  std::optional<double> router_score;
  std::optional<double> hybrid_score;
  std::optional<double> frugal_score;
  std::optional<std::vector<std::string>> committee_answers;

  bool operator==(const ReplayRecord&) const = default;
};

/// Parses and validates one dataset object. Errors name the offending field.
ReplayRecord validate_record(const nlohmann::json& raw);

/// Re-checks every invariant of an in-memory record; the only normalization
/// applied is sorting of the token distribution.
ReplayRecord validate_record(ReplayRecord record);

enum class CostSource { fixed, measured };

/// Average per-query costs of the two models. Always satisfies
/// 0 < avg_small < avg_large.
struct CostScheme {
  double avg_small = 1.0;
  double avg_large = 10.0;
  CostSource source = CostSource::fixed;

  static CostScheme fixed(double small_cost, double large_cost);
  static CostScheme measured(double avg_small, double avg_large);

  /// Compact tag such as "cs=1;cl=10" used in output tables.
  std::string label() const;
};

struct Decision {
  std::string record_id;
  bool called_large = false;
  bool answered_correctly = false;
  double incurred_cost = 0.0;
  bool warmup = false;
  std::optional<double> score;
  std::optional<double> threshold;
};

struct RunTrace {
  std::vector<Decision> decisions;  // every row, warm-up rows flagged
  std::size_t warmup_count = 0;
  std::size_t evaluated_queries = 0;
  std::size_t escalations = 0;      // post-warm-up large calls
  std::size_t correct = 0;          // post-warm-up correct answers
  double total_cost = 0.0;
  std::size_t cost_rows = 0;        // rows aggregated into total_cost
  double accuracy = 0.0;

  double average_cost() const { return cost_rows == 0 ? 0.0 : total_cost / static_cast<double>(cost_rows); }
  double escalation_rate() const {
    return evaluated_queries == 0 ? 0.0 : static_cast<double>(escalations) / static_cast<double>(evaluated_queries);
  }
};

struct CurvePoint {
  double target_budget = 0.0;
  double realized_budget = 0.0;
  double accuracy = 0.0;
  double accuracy_std = 0.0;
};

struct BudgetCurve {
  std::vector<CurvePoint> points;
  double normalized_auc = 0.0;
  // Cascading points above avg_large, up to avg_small + avg_large. Reported
  // only; never part of the AUC.
  std::vector<CurvePoint> extended;
};

}  // namespace cascadegate
