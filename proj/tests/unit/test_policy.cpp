#include "doctest.h"

#include <random>

#include "cascadegate/policy.hpp"
#include "cascadegate/uncertainty.hpp"
#include "oracles.hpp"

using namespace cascadegate;

namespace {

ReplayRecord with_margin(std::string id, double top, double second, bool small_ok = true, bool large_ok = false) {
  ReplayRecord r;
  r.id = std::move(id);
  r.task = "t";
  r.small_first_token = TokenDistribution::from_entries({{"a", top}, {"b", second}});
  r.small_correct = small_ok;
  r.large_correct = large_ok;
  r.small_cost = 1;
  r.large_cost = 10;
  return r;
}

ReplayRecord with_scores(std::string id, double score) {
  auto r = with_margin(std::move(id), 1.0, 0.0);
  r.router_score = r.hybrid_score = r.frugal_score = score;
  r.committee_answers = std::vector<std::string>{"A"};
  return r;
}

std::vector<Decision> run(Policy& policy, const std::vector<ReplayRecord>& records) {
  std::vector<Decision> out;
  for (const auto& r : records) out.push_back(policy.decide(r));
  return out;
}

std::vector<ReplayRecord> uniform_stream(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ReplayRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = with_scores("q" + std::to_string(i), u(rng));
    r.small_correct = u(rng) < 0.6;
    r.large_correct = u(rng) < 0.9;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("quantile_linear examples against the oracle") {
  std::vector<double> one_to_ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const double frozen = 5.5;  // oracle::quantile(one_to_ten, 0.5)
  CHECK(oracle::quantile(one_to_ten, 0.5) == frozen);
  CHECK(quantile_linear(one_to_ten, 0.5) == frozen);
  for (double p : {0.0, 0.37, 1.0}) CHECK(quantile_linear(std::vector<double>{7}, p) == 7);
  CHECK(quantile_linear(std::vector<double>{3, 1, 2}, 0) == 1);
  CHECK(quantile_linear(std::vector<double>{3, 1, 2}, 1) == 3);
  try {
    quantile_linear(std::vector<double>{}, 0.5);
    FAIL("empty sample accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_sample);
  }
  CHECK_THROWS_AS(quantile_linear(one_to_ten, 1.5), Error);
}

TEST_CASE("quantile_linear matches the oracle on random arrays") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(1 + rng() % 60);
    for (auto& x : v) x = u(rng);
    const double p = (u(rng) + 5.0) / 10.0;
    CHECK(std::abs(quantile_linear(v, p) - oracle::quantile(v, p)) <= 1e-12);
  }
}

TEST_CASE("threshold_update warm-up contract") {
  DynamicThreshold state(0.5, 10);
  for (int i = 0; i < 9; ++i) {
    state = threshold_update(state, i / 10.0);
    CHECK_FALSE(state.threshold().has_value());
    CHECK(state.warming_up());
  }
  state = threshold_update(state, 0.9);
  REQUIRE(state.threshold().has_value());
  const double frozen = 0.45;  // oracle::quantile({0.0, ..., 0.9}, 0.5)
  CHECK(oracle::quantile({0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}, 0.5) == doctest::Approx(frozen));
  CHECK(*state.threshold() == doctest::Approx(frozen).epsilon(1e-15));

  state = threshold_update(state, 2.0);
  CHECK(state.observed() == 11);
  CHECK(state.sample().size() == 11);
  CHECK(*state.threshold() == oracle::quantile({0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 2.0}, 0.5));
}

TEST_CASE("threshold tracks the quantile of every observed score") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DynamicThreshold state(0.3, 10);
  std::vector<double> seen;
  for (int i = 0; i < 300; ++i) {
    const double s = u(rng);
    state.observe(s);
    seen.push_back(s);
    if (seen.size() >= 10) CHECK(std::abs(*state.threshold() - oracle::quantile(seen, 0.3)) <= 1e-12);
  }
}

TEST_CASE("threshold is monotone in p") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> history(200);
  for (auto& x : history) x = n(rng);
  double previous = -1e300;
  for (int i = 0; i <= 50; ++i) {
    const double q = quantile_linear(history, i / 50.0);
    CHECK(q >= previous);
    previous = q;
  }
}

TEST_CASE("reservoir cap bounds memory") {
  DynamicThreshold state(0.5, 10, 64, 1);
  for (int i = 0; i < 1000; ++i) state.observe(i);
  CHECK(state.sample().size() == 64);
  CHECK(state.observed() == 1000);
  CHECK(std::is_sorted(state.sample().begin(), state.sample().end()));
}

TEST_CASE("margin_cascade decide examples") {
  std::vector<ReplayRecord> warmup;
  for (int i = 0; i < 10; ++i) warmup.push_back(with_margin("w" + std::to_string(i), 0.65, 0.35));
  const auto scheme = CostScheme::fixed(1, 10);

  Policy keep({Strategy::margin_cascade, 0.5}, scheme);
  for (const auto& d : run(keep, warmup)) {
    CHECK(d.warmup);
    CHECK_FALSE(d.called_large);
    CHECK(d.incurred_cost == 1.0);
  }
  REQUIRE(keep.threshold_state().threshold().has_value());
  CHECK(*keep.threshold_state().threshold() == doctest::Approx(0.3));

  auto d = keep.decide(with_margin("hi", 0.75, 0.25, true, false));
  CHECK_FALSE(d.warmup);
  CHECK_FALSE(d.called_large);
  CHECK(d.incurred_cost == 1.0);
  CHECK(d.answered_correctly);
  CHECK(*d.score == 0.5);

  Policy escalate({Strategy::margin_cascade, 0.5}, scheme);
  run(escalate, warmup);
  d = escalate.decide(with_margin("lo", 0.55, 0.45, true, false));
  CHECK(d.called_large);
  CHECK(d.incurred_cost == 11.0);
  CHECK_FALSE(d.answered_correctly);  // large_correct

  // A score equal to the threshold keeps the small model.
  Policy tie({Strategy::margin_cascade, 0.5}, scheme);
  run(tie, warmup);
  CHECK_FALSE(tie.decide(with_margin("tie", 0.65, 0.35)).called_large);
}

TEST_CASE("random routing endpoints") {
  const auto stream = uniform_stream(500, 1);
  const auto scheme = CostScheme::fixed(1, 10);
  Policy always({Strategy::random_routing, 1.0, 42}, scheme);
  Policy never({Strategy::random_routing, 0.0, 42}, scheme);
  for (const auto& r : stream) {
    const auto a = always.decide(r);
    const auto n = never.decide(r);
    CHECK(a.called_large == !a.warmup);
    CHECK_FALSE(n.called_large);
    if (!a.warmup) {
      CHECK(a.incurred_cost == 10.0);
      CHECK(a.answered_correctly == r.large_correct);
    }
    CHECK(n.incurred_cost == 1.0);
  }
}

TEST_CASE("routing strategies charge the called model only; cascades charge both") {
  const auto scheme = CostScheme::fixed(2, 10);
  const auto stream = uniform_stream(200, 2);
  for (auto s : kAllStrategies) {
    Policy policy({s, 0.5, 3}, scheme);
    for (const auto& r : stream) {
      const auto d = policy.decide(r);
      const double small = s == Strategy::committee_cascade ? 10.0 : 2.0;
      if (family_of(s) == Family::routing) {
        CHECK(d.incurred_cost == (d.called_large ? 10.0 : 2.0));
      } else {
        CHECK(d.incurred_cost == small + (d.called_large ? 10.0 : 0.0));
      }
    }
  }
}

TEST_CASE("measured schemes charge the record's own costs") {
  auto r = with_scores("a", 0.5);
  r.small_cost = 3;
  r.large_cost = 7;
  Policy measured({Strategy::frugal_cascade, 0.5, 0, 0}, CostScheme::measured(1, 10));
  CHECK(measured.decide(r).incurred_cost == 3.0);
  Policy fixed({Strategy::frugal_cascade, 0.5, 0, 0}, CostScheme::fixed(1, 10));
  CHECK(fixed.decide(r).incurred_cost == 1.0);
}

TEST_CASE("missing signal names strategy and field") {
  auto r = with_margin("m", 0.6, 0.4);
  for (auto [s, field] : {std::pair{Strategy::frugal_cascade, "frugal_score"},
                          std::pair{Strategy::score_routing, "router_score"},
                          std::pair{Strategy::hybrid_routing, "hybrid_score"},
                          std::pair{Strategy::committee_cascade, "committee_answers"}}) {
    Policy policy({s, 0.5}, CostScheme::fixed(1, 10));
    try {
      policy.decide(r);
      FAIL("missing signal accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::missing_signal);
      CHECK(std::string(e.what()).find(field) != std::string::npos);
      CHECK(std::string(e.what()).find(std::string(to_string(s))) != std::string::npos);
    }
  }
}

TEST_CASE("escalation rate calibrates to p") {
  for (double p : {0.1, 0.5, 0.9}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto stream = uniform_stream(10000, seed * 17 + static_cast<std::uint64_t>(p * 10));
      Policy policy({Strategy::frugal_cascade, p}, CostScheme::fixed(1, 10));
      std::size_t escalated = 0, evaluated = 0;
      for (const auto& r : stream) {
        const auto d = policy.decide(r);
        if (!d.warmup) {
          ++evaluated;
          escalated += d.called_large;
        }
      }
      CHECK(std::abs(static_cast<double>(escalated) / evaluated - p) <= 0.02);
    }
  }
}

TEST_CASE("decisions are deterministic and scale invariant") {
  const auto stream = uniform_stream(2000, 8);
  for (auto s : kAllStrategies) {
    Policy a({s, 0.4, 77}, CostScheme::fixed(1, 10));
    Policy b({s, 0.4, 77}, CostScheme::fixed(1, 10));
    for (const auto& r : stream) {
      const auto da = a.decide(r);
      const auto db = b.decide(r);
      CHECK(da.called_large == db.called_large);
      CHECK(da.incurred_cost == db.incurred_cost);
    }
  }

  std::vector<double> scores;
  for (const auto& r : stream) scores.push_back(*r.frugal_score);
  const auto base = simulate_threshold_decisions(scores, 0.35);
  for (double factor : {0.5, 2.0, 4.0, 1024.0}) {
    std::vector<double> scaled;
    for (double s : scores) scaled.push_back(s * factor);
    const auto steps = simulate_threshold_decisions(scaled, 0.35);
    for (std::size_t i = 0; i < steps.size(); ++i) CHECK(steps[i].escalate == base[i].escalate);
  }
}

TEST_CASE("p endpoints are exact; the raw rule compares against running extremes") {
  const auto stream = uniform_stream(3000, 4);
  std::vector<double> scores;
  for (const auto& r : stream) scores.push_back(*r.frugal_score);
  const auto low = simulate_threshold_decisions(scores, 0.0);
  const auto high = simulate_threshold_decisions(scores, 1.0);
  DynamicThreshold low_state(0.0), high_state(1.0);
  double running_min = 1e9, running_max = -1e9;
  std::size_t raw_low = 0, raw_high = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(low[i].warmup == (i < 10));
    CHECK_FALSE(low[i].escalate);
    CHECK(high[i].escalate == (i >= 10));
    if (i >= 10) {
      CHECK(below_threshold(scores[i], low_state.threshold()) == (scores[i] < running_min));
      CHECK(below_threshold(scores[i], high_state.threshold()) == (scores[i] < running_max));
      raw_low += below_threshold(scores[i], low_state.threshold());
      raw_high += below_threshold(scores[i], high_state.threshold());
    }
    low_state.observe(scores[i]);
    high_state.observe(scores[i]);
    running_min = std::min(running_min, scores[i]);
    running_max = std::max(running_max, scores[i]);
  }
  CHECK(raw_low < 20);
  CHECK(raw_high > scores.size() - 30);
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("margin") == Strategy::margin_cascade);
  CHECK(parse_strategy("margin_cascade") == Strategy::margin_cascade);
  CHECK(parse_strategy("random") == Strategy::random_routing);
  CHECK(parse_strategy("committee") == Strategy::committee_cascade);
  CHECK(parse_strategy("score") == Strategy::score_routing);
  CHECK(parse_strategy("router") == Strategy::score_routing);
  CHECK_FALSE(parse_strategy("bogus").has_value());
  CHECK(small_calls_of(Strategy::committee_cascade) == kCommitteeCalls);
  CHECK(family_of(Strategy::hybrid_routing) == Family::routing);
  CHECK(family_of(Strategy::frugal_cascade) == Family::cascading);
}
