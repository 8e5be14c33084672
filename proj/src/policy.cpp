#include "cascadegate/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "cascadegate/uncertainty.hpp"

namespace cascadegate {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::random_routing: return "random_routing";
    case Strategy::score_routing: return "score_routing";
    case Strategy::hybrid_routing: return "hybrid_routing";
    case Strategy::frugal_cascade: return "frugal_cascade";
    case Strategy::margin_cascade: return "margin_cascade";
    case Strategy::committee_cascade: return "committee_cascade";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies) {
    const auto full = to_string(s);
    if (name == full || name == full.substr(0, full.find('_'))) return s;
  }
  if (name == "router" || name == "routing") return Strategy::score_routing;
  return std::nullopt;
}

Family family_of(Strategy strategy) {
  switch (strategy) {
    case Strategy::random_routing:
    case Strategy::score_routing:
    case Strategy::hybrid_routing: return Family::routing;
    default: return Family::cascading;
  }
}

int small_calls_of(Strategy strategy) { return strategy == Strategy::committee_cascade ? kCommitteeCalls : 1; }

namespace {

const char* signal_field(Strategy strategy) {
  switch (strategy) {
    case Strategy::score_routing: return "router_score";
    case Strategy::hybrid_routing: return "hybrid_score";
    case Strategy::frugal_cascade: return "frugal_score";
    case Strategy::margin_cascade: return "small_first_token";
    case Strategy::committee_cascade: return "committee_answers";
    case Strategy::random_routing: break;
  }
  return nullptr;
}

// Expects `sorted` ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::range, "quantile/probability " + std::to_string(p) + " outside [0,1]");
}

}  // namespace

bool has_signal(Strategy strategy, const ReplayRecord& record) {
  switch (strategy) {
    case Strategy::score_routing: return record.router_score.has_value();
    case Strategy::hybrid_routing: return record.hybrid_score.has_value();
    case Strategy::frugal_cascade: return record.frugal_score.has_value();
    case Strategy::committee_cascade: return record.committee_answers.has_value();
    case Strategy::margin_cascade:
    case Strategy::random_routing: return true;
  }
  return false;
}

double quantile_linear(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::empty_sample, "quantile of an empty sample");
  check_p(p);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

DynamicThreshold::DynamicThreshold(double quantile_p, std::size_t warmup_target, std::size_t reservoir_cap,
                                   std::uint64_t reservoir_seed)
    : quantile_p_(quantile_p),
      warmup_target_(warmup_target),
      reservoir_cap_(reservoir_cap),
      reservoir_rng_(reservoir_seed) {
  check_p(quantile_p);
}

void DynamicThreshold::observe(double score) {
  if (!std::isfinite(score)) throw Error(ErrorCode::range, "non-finite score");
  ++observed_;
  if (reservoir_cap_ == 0 || sorted_.size() < reservoir_cap_) {
    sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), score), score);
  } else {
    // Algorithm R: keep the new score with probability cap / observed.
    boost::random::uniform_int_distribution<std::size_t> pick(0, observed_ - 1);
    const auto slot = pick(reservoir_rng_);
    if (slot < reservoir_cap_) {
      sorted_.erase(sorted_.begin() + static_cast<std::ptrdiff_t>(slot));
      sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), score), score);
    }
  }
  if (observed_ >= std::max<std::size_t>(warmup_target_, 1)) threshold_ = quantile_sorted(sorted_, quantile_p_);
}

DynamicThreshold threshold_update(DynamicThreshold state, double new_score) {
  state.observe(new_score);
  return state;
}

std::vector<ThresholdStep> simulate_threshold_decisions(std::span<const double> scores, double quantile_p,
                                                        std::size_t warmup_target) {
  DynamicThreshold state(quantile_p, warmup_target);
  std::vector<ThresholdStep> steps;
  steps.reserve(scores.size());
  for (double s : scores) {
    ThresholdStep step;
    step.warmup = state.warming_up();
    step.threshold = state.threshold();
    step.escalate = !step.warmup && should_escalate(s, step.threshold, quantile_p);
    state.observe(s);
    steps.push_back(step);
  }
  return steps;
}

Policy::Policy(PolicyConfig config, CostScheme scheme)
    : config_(config),
      scheme_(scheme),
      threshold_(config.probability, config.warmup_target, config.reservoir_cap, config.seed),
      rng_(config.seed) {}

double Policy::signal(const ReplayRecord& record) const {
  if (!has_signal(config_.strategy, record)) {
    throw Error(ErrorCode::missing_signal, "strategy '" + std::string(to_string(config_.strategy)) +
                                               "' requires field '" + signal_field(config_.strategy) +
                                               "' (missing in record '" + record.id + "')");
  }
  switch (config_.strategy) {
    case Strategy::score_routing: return *record.router_score;
    case Strategy::hybrid_routing: return *record.hybrid_score;
    case Strategy::frugal_cascade: return *record.frugal_score;
    case Strategy::margin_cascade: return margin_first_token(record.small_first_token);
    case Strategy::committee_cascade: return committee_agreement(*record.committee_answers);
    case Strategy::random_routing: break;
  }
  return 0.0;
}

Decision Policy::decide(const ReplayRecord& record) {
  const bool fixed = scheme_.source == CostSource::fixed;
  const double small_cost = fixed ? scheme_.avg_small : record.small_cost;
  const double large_cost = fixed ? scheme_.avg_large : record.large_cost;
  const bool routing = family_of(config_.strategy) == Family::routing;

  Decision d;
  d.record_id = record.id;
  d.warmup = seen_ < config_.warmup_target;
  ++seen_;

  if (config_.strategy == Strategy::random_routing) {
    if (!d.warmup) {
      boost::random::uniform_01<double> unit;
      d.called_large = unit(rng_) < config_.probability;
    }
  } else {
    const double score = signal(record);
    d.score = score;
    d.threshold = threshold_.threshold();
    d.called_large = !d.warmup && should_escalate(score, d.threshold, config_.probability);
    threshold_.observe(score);
  }

  if (routing) {
    d.incurred_cost = d.called_large ? large_cost : small_cost;
  } else {
    d.incurred_cost = small_calls_of(config_.strategy) * small_cost + (d.called_large ? large_cost : 0.0);
  }
  d.answered_correctly = d.called_large ? record.large_correct : record.small_correct;
  return d;
}

}  // namespace cascadegate
