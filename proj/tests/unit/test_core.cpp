#include "doctest.h"

#include <random>

#include "cascadegate/core.hpp"

using namespace cascadegate;
using nlohmann::json;

namespace {

json base_record() {
  return json{
      {"id", "r1"},
      {"task", "fever"},
      {"small_first_token", json::array({json::array({"yes", 0.7}), json::array({"no", 0.2})})},
      {"small_answer", "yes"},
      {"small_correct", true},
      {"large_answer", "yes"},
      {"large_correct", true},
      {"small_cost", 1.0},
      {"large_cost", 10.0},
  };
}

ErrorCode code_of(const json& raw) {
  try {
    validate_record(raw);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected validation to throw");
  return ErrorCode::schema;
}

}  // namespace

TEST_CASE("distribution is re-sorted on validation") {
  auto raw = base_record();
  raw["small_first_token"] = json::array({json::array({"no", 0.2}), json::array({"yes", 0.7})});
  const auto r = validate_record(raw);
  REQUIRE(r.small_first_token.entries().size() == 2);
  CHECK(r.small_first_token.entries()[0].token == "yes");
  CHECK(r.small_first_token.top() == 0.7);
  CHECK(r.small_first_token.second() == 0.2);
  CHECK(r.small_first_token.position() == 1);
}

TEST_CASE("missing required field is a schema error naming the field") {
  for (const char* field : {"id", "task", "small_first_token", "small_answer", "small_correct", "large_answer",
                            "large_correct", "small_cost", "large_cost"}) {
    auto raw = base_record();
    raw.erase(field);
    try {
      validate_record(raw);
      FAIL("accepted record without " << field);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::schema);
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  }
}

TEST_CASE("probability outside [0,1] is a range error") {
  auto raw = base_record();
  raw["small_first_token"] = json::array({json::array({"yes", 1.3})});
  CHECK(code_of(raw) == ErrorCode::range);
  raw["small_first_token"] = json::array({json::array({"yes", -0.1})});
  CHECK(code_of(raw) == ErrorCode::range);
}

TEST_CASE("empty distribution is rejected") {
  auto raw = base_record();
  raw["small_first_token"] = json::array();
  CHECK(code_of(raw) == ErrorCode::empty_distribution);
}

TEST_CASE("truncated top-k is accepted but overfull mass is not") {
  auto raw = base_record();
  raw["small_first_token"] = json::array({json::array({"a", 0.3}), json::array({"b", 0.1})});
  CHECK_NOTHROW(validate_record(raw));
  raw["small_first_token"] = json::array({json::array({"a", 0.6}), json::array({"b", 0.5})});
  CHECK(code_of(raw) == ErrorCode::range);
  raw["small_first_token"] = json::array({json::array({"a", 0.5}), json::array({"b", 0.5 + 5e-7})});
  CHECK_NOTHROW(validate_record(raw));
}

TEST_CASE("wrong types and bad optional fields") {
  auto raw = base_record();
  raw["small_correct"] = "yes";
  CHECK(code_of(raw) == ErrorCode::schema);

  raw = base_record();
  raw["small_cost"] = 0.0;
  CHECK(code_of(raw) == ErrorCode::range);

  raw = base_record();
  raw["frugal_score"] = 1.5;
  CHECK(code_of(raw) == ErrorCode::range);

  raw = base_record();
  raw["committee_answers"] = json::array();
  CHECK(code_of(raw) == ErrorCode::empty_committee);

  raw = base_record();
  raw["committee_answers"] = json::array({"A", 3});
  CHECK(code_of(raw) == ErrorCode::schema);

  raw = base_record();
  raw["router_score"] = nullptr;
  CHECK_FALSE(validate_record(raw).router_score.has_value());

  raw = base_record();
  raw["small_first_token"] = json::array({json::array({"a"})});
  CHECK(code_of(raw) == ErrorCode::schema);
}

TEST_CASE("validation is idempotent and only reorders the distribution") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto raw = base_record();
    const int k = 1 + static_cast<int>(rng() % 6);
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& x : w) total += (x = u(rng));
    json dist = json::array();
    for (int i = 0; i < k; ++i) dist.push_back(json::array({"t" + std::to_string(i), w[i] / total * u(rng)}));
    raw["small_first_token"] = dist;
    if (trial % 2) raw["hybrid_score"] = u(rng);

    const auto once = validate_record(raw);
    const auto twice = validate_record(once);
    CHECK(once == twice);

    // Same multiset of (token, prob) pairs.
    auto sorted_input = dist.get<std::vector<std::pair<std::string, double>>>();
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : once.small_first_token.entries()) out.emplace_back(e.token, e.prob);
    std::sort(sorted_input.begin(), sorted_input.end());
    std::sort(out.begin(), out.end());
    CHECK(sorted_input == out);
    for (std::size_t i = 1; i < once.small_first_token.entries().size(); ++i) {
      CHECK(once.small_first_token.entries()[i - 1].prob >= once.small_first_token.entries()[i].prob);
    }
    CHECK(once.id == "r1");
    CHECK(once.small_cost == 1.0);
  }
}

TEST_CASE("cost scheme ordering") {
  CHECK(CostScheme::fixed(1, 10).label() == "cs=1;cl=10");
  CHECK(CostScheme::fixed(1, 10).source == CostSource::fixed);
  CHECK_THROWS_AS(CostScheme::fixed(5, 4), Error);
  try {
    CostScheme::fixed(2, 2);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::cost_ordering);
  }
  CHECK_THROWS_AS(CostScheme::measured(0, 1), Error);
}
