#include "cascadegate/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cascadegate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema: return "schema";
    case ErrorCode::range: return "range";
    case ErrorCode::empty_distribution: return "empty-distribution";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::cost_ordering: return "cost-ordering";
    case ErrorCode::budget_range: return "budget-range";
    case ErrorCode::empty_sample: return "empty-sample";
    case ErrorCode::empty_committee: return "empty-committee";
    case ErrorCode::missing_signal: return "missing-signal";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::grid: return "grid";
    case ErrorCode::curve: return "curve";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::config: return "config";
    case ErrorCode::upstream_unavailable: return "upstream-unavailable";
    case ErrorCode::upstream_capability: return "upstream-capability";
  }
  return "unknown";
}

namespace {

constexpr double kMassTolerance = 1e-6;

bool is_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::string fmt_real(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const nlohmann::json& require(const nlohmann::json& raw, const char* field) {
  auto it = raw.find(field);
  if (it == raw.end() || it->is_null()) {
    throw Error(ErrorCode::schema, std::string("missing required field '") + field + "'");
  }
  return *it;
}

std::string require_string(const nlohmann::json& raw, const char* field) {
  const auto& v = require(raw, field);
  if (!v.is_string()) throw Error(ErrorCode::schema, std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

bool require_bool(const nlohmann::json& raw, const char* field) {
  const auto& v = require(raw, field);
  if (!v.is_boolean()) throw Error(ErrorCode::schema, std::string("field '") + field + "' must be true or false");
  return v.get<bool>();
}

double require_number(const nlohmann::json& raw, const char* field) {
  const auto& v = require(raw, field);
  if (!v.is_number()) throw Error(ErrorCode::schema, std::string("field '") + field + "' must be a number");
  return v.get<double>();
}

std::optional<double> optional_score(const nlohmann::json& raw, const char* field) {
  auto it = raw.find(field);
  if (it == raw.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw Error(ErrorCode::schema, std::string("field '") + field + "' must be a number");
  return it->get<double>();
}

void check_score(const std::optional<double>& score, const char* field) {
  if (score && !is_unit(*score)) {
    throw Error(ErrorCode::range, std::string("field '") + field + "' = " + fmt_real(*score) + " outside [0,1]");
  }
}

}  // namespace

TokenDistribution TokenDistribution::from_entries(std::vector<TokenProb> entries, int position) {
  if (entries.empty()) throw Error(ErrorCode::empty_distribution, "token distribution has no entries");
  double mass = 0.0;
  for (const auto& e : entries) {
    if (!is_unit(e.prob)) {
      throw Error(ErrorCode::range, "token probability " + fmt_real(e.prob) + " for '" + e.token + "' outside [0,1]");
    }
    mass += e.prob;
  }
  if (mass > 1.0 + kMassTolerance) {
    throw Error(ErrorCode::range, "token probabilities sum to " + fmt_real(mass) + " > 1");
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const TokenProb& a, const TokenProb& b) { return a.prob > b.prob; });
  TokenDistribution dist;
  dist.entries_ = std::move(entries);
  dist.position_ = position;
  return dist;
}

ReplayRecord validate_record(ReplayRecord record) {
  if (record.id.empty()) throw Error(ErrorCode::schema, "field 'id' must be non-empty");
  record.small_first_token = TokenDistribution::from_entries(record.small_first_token.entries(),
                                                             record.small_first_token.position());
  for (auto [cost, name] : {std::pair{record.small_cost, "small_cost"}, std::pair{record.large_cost, "large_cost"}}) {
    if (!std::isfinite(cost) || cost <= 0.0) {
      throw Error(ErrorCode::range, std::string("field '") + name + "' = " + fmt_real(cost) + " must be > 0");
    }
  }
  check_score(record.router_score, "router_score");
  check_score(record.hybrid_score, "hybrid_score");
  check_score(record.frugal_score, "frugal_score");
  if (record.committee_answers && record.committee_answers->empty()) {
    throw Error(ErrorCode::empty_committee, "field 'committee_answers' must list at least one answer");
  }
  return record;
}

ReplayRecord validate_record(const nlohmann::json& raw) {
  if (!raw.is_object()) throw Error(ErrorCode::schema, "record must be an object");

  ReplayRecord r;
  r.id = require_string(raw, "id");
  r.task = require_string(raw, "task");

  const auto& dist = require(raw, "small_first_token");
  if (!dist.is_array()) throw Error(ErrorCode::schema, "field 'small_first_token' must be an array of [token, prob] pairs");
  std::vector<TokenProb> entries;
  entries.reserve(dist.size());
  for (const auto& pair : dist) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_number()) {
      throw Error(ErrorCode::schema, "field 'small_first_token' must be an array of [token, prob] pairs");
    }
    entries.push_back({pair[0].get<std::string>(), pair[1].get<double>()});
  }
  r.small_first_token = TokenDistribution::from_entries(std::move(entries));

  r.small_answer = require_string(raw, "small_answer");
  r.small_correct = require_bool(raw, "small_correct");
  r.large_answer = require_string(raw, "large_answer");
  r.large_correct = require_bool(raw, "large_correct");
  r.small_cost = require_number(raw, "small_cost");
  r.large_cost = require_number(raw, "large_cost");
  r.router_score = optional_score(raw, "router_score");
  r.hybrid_score = optional_score(raw, "hybrid_score");
  r.frugal_score = optional_score(raw, "frugal_score");

  if (auto it = raw.find("committee_answers"); it != raw.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::schema, "field 'committee_answers' must be an array of strings");
    std::vector<std::string> answers;
    for (const auto& a : *it) {
      if (!a.is_string()) throw Error(ErrorCode::schema, "field 'committee_answers' must be an array of strings");
      answers.push_back(a.get<std::string>());
    }
    r.committee_answers = std::move(answers);
  }
  return validate_record(std::move(r));
}

CostScheme CostScheme::fixed(double small_cost, double large_cost) {
  auto scheme = measured(small_cost, large_cost);
  scheme.source = CostSource::fixed;
  return scheme;
}

CostScheme CostScheme::measured(double avg_small, double avg_large) {
  if (!std::isfinite(avg_small) || !std::isfinite(avg_large) || avg_small <= 0.0) {
    throw Error(ErrorCode::range, "costs must be finite and positive");
  }
  if (!(avg_small < avg_large)) {
    throw Error(ErrorCode::cost_ordering, "average small cost " + fmt_real(avg_small) +
                                              " must be below average large cost " + fmt_real(avg_large));
  }
  return CostScheme{avg_small, avg_large, CostSource::measured};
}

std::string CostScheme::label() const {
  return "cs=" + fmt_real(avg_small) + ";cl=" + fmt_real(avg_large);
}

}  // namespace cascadegate
