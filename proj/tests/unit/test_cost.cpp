#include "doctest.h"

#include <random>

#include "cascadegate/cost.hpp"

using namespace cascadegate;

namespace {

ReplayRecord costed(double small, double large) {
  ReplayRecord r;
  r.id = "x";
  r.small_first_token = TokenDistribution::from_entries({{"a", 1.0}});
  r.small_cost = small;
  r.large_cost = large;
  return r;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::schema;
}

}  // namespace

TEST_CASE("routing probability examples") {
  const auto s = CostScheme::fixed(1, 10);
  CHECK(routing_probability(5.5, s) == 0.5);
  CHECK(routing_probability(1, s) == 0.0);
  CHECK(routing_probability(10, s) == 1.0);
  CHECK(code_of([&] { routing_probability(0.5, s); }) == ErrorCode::budget_range);
  CHECK(code_of([&] { routing_probability(10.5, s); }) == ErrorCode::budget_range);
}

TEST_CASE("cascade probability examples") {
  const auto s = CostScheme::fixed(1, 10);
  CHECK(cascade_probability(6, s) == 0.5);
  CHECK(cascade_probability(1, s) == 0.0);
  CHECK(cascade_probability(11, s) == 1.0);
  CHECK(code_of([&] { cascade_probability(0.99, s); }) == ErrorCode::budget_range);
  CHECK(code_of([&] { cascade_probability(11.5, s); }) == ErrorCode::budget_range);
  // Committee: five small calls before any escalation.
  CHECK(cascade_probability(10, s, 5) == 0.5);
  CHECK(code_of([&] { cascade_probability(4, s, 5); }) == ErrorCode::budget_range);
  CHECK(probability_for({6, Family::cascading}, s) == 0.5);
  CHECK(probability_for({5.5, Family::routing}, s) == 0.5);
}

TEST_CASE("cost identities round-trip and orderings hold") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double cs = 0.01 + 10 * u(rng);
    const double cl = cs + 0.01 + 50 * u(rng);
    const auto s = CostScheme::fixed(cs, cl);
    const double c = cs + u(rng) * (cl - cs);
    const double pr = routing_probability(c, s);
    const double pc = cascade_probability(c, s);
    CHECK(std::abs((1 - pr) * cs + pr * cl - c) <= 1e-12 * std::max(1.0, c));
    CHECK(std::abs(cs + pc * cl - c) <= 1e-12 * std::max(1.0, c));
    if (c > cs) CHECK(pc < pr);

    const double c2 = c + (cl - c) * u(rng) * 0.5 + 1e-9;
    if (c2 <= cl && c2 > c) {
      CHECK(routing_probability(c2, s) > pr);
      CHECK(cascade_probability(c2, s) > pc);
    }
  }
}

TEST_CASE("measure averages") {
  std::vector<ReplayRecord> all{costed(1, 10), costed(1, 10), costed(1, 10)};
  auto s = measure_averages(all);
  CHECK(s.avg_small == 1.0);
  CHECK(s.avg_large == 10.0);
  CHECK(s.source == CostSource::measured);

  std::vector<ReplayRecord> mixed{costed(1, 10), costed(3, 10)};
  s = measure_averages(mixed);
  CHECK(s.avg_small == 2.0);
  CHECK(s.avg_large == 10.0);

  std::vector<ReplayRecord> inverted{costed(5, 4), costed(5, 4)};
  CHECK(code_of([&] { measure_averages(inverted); }) == ErrorCode::cost_ordering);
  CHECK(code_of([&] { measure_averages(std::vector<ReplayRecord>{}); }) == ErrorCode::empty_dataset);

  // Per-record ordering is not required.
  std::vector<ReplayRecord> uneven{costed(12, 10), costed(1, 30)};
  CHECK_NOTHROW(measure_averages(uneven));
}

TEST_CASE("cost meter") {
  CostMeter meter;
  CHECK(meter.average() == 0.0);
  meter.charge(1);
  meter.charge(11);
  CHECK(meter.total() == 12);
  CHECK(meter.queries() == 2);
  CHECK(meter.average() == 6);
}
