#include "cascadegate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/discrete_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "cascadegate/cost.hpp"

namespace cascadegate {

namespace {

// Share of the non-top-two mass; keeps every tail entry below the runner-up.
constexpr double kTailShare = 0.2;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::parameter, std::string("invalid synthetic parameter: ") + what);
}

void validate(const SynthParams& p) {
  check(std::isfinite(p.margin_beta_a) && p.margin_beta_a > 0, "margin_beta_a must be > 0");
  check(std::isfinite(p.margin_beta_b) && p.margin_beta_b > 0, "margin_beta_b must be > 0");
  check(std::isfinite(p.link_slope) && std::isfinite(p.link_intercept), "link parameters must be finite");
  check(p.large_accuracy >= 0.0 && p.large_accuracy <= 1.0, "large_accuracy must be in [0,1]");
  check(p.vocab_size >= 2, "vocab_size must be >= 2");
  check(std::isfinite(p.small_cost) && p.small_cost > 0, "small_cost must be > 0");
  check(std::isfinite(p.large_cost) && p.large_cost > 0, "large_cost must be > 0");
  check(p.committee_size >= 1, "committee_size must be >= 1");
  for (double s : {p.router_noise, p.hybrid_noise, p.frugal_noise}) {
    check(std::isfinite(s) && s >= 0.0, "scorer noise must be >= 0");
  }
}

std::string label(std::size_t i) { return "L" + std::to_string(i); }

class RecordSampler {
 public:
  RecordSampler(std::uint64_t seed, const SynthParams& params)
      : params_(params), rng_(seed), margin_(params.margin_beta_a, params.margin_beta_b) {}

  ReplayRecord next(std::size_t index) {
    const std::size_t k = params_.vocab_size;
    const double m = margin_(rng_);
    const double logit = params_.link_slope * m + params_.link_intercept;

    const std::size_t gold = pick(k);
    const bool small_correct = boost::random::bernoulli_distribution<double>(sigmoid(logit))(rng_);
    const bool large_correct = boost::random::bernoulli_distribution<double>(params_.large_accuracy)(rng_);

    // Token order: the small model's answer first, then the other labels in
    // a random order.
    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    const std::size_t top = small_correct ? gold : other_than(gold, k);
    std::swap(order[0], order[top]);
    for (std::size_t i = k - 1; i > 1; --i) std::swap(order[i], order[1 + pick(i)]);

    const double tail = k > 2 ? kTailShare * (1.0 - m) : 0.0;
    const double second = (1.0 - m - tail) / 2.0;
    std::vector<double> probs(k, k > 2 ? tail / static_cast<double>(k - 2) : 0.0);
    probs[0] = second + m;
    probs[1] = second;

    std::vector<TokenProb> entries;
    for (std::size_t i = 0; i < k; ++i) entries.push_back({label(order[i]), probs[i]});

    ReplayRecord r;
    r.id = "q" + std::to_string(index);
    r.task = "synthetic";
    r.small_first_token = TokenDistribution::from_entries(std::move(entries));
    r.small_answer = label(top);
    r.small_correct = small_correct;
    r.large_answer = label(large_correct ? gold : other_than(gold, k));
    r.large_correct = large_correct;
    r.small_cost = params_.small_cost;
    r.large_cost = params_.large_cost;

    // Committee members sample the first-token distribution at temperature 1.
    boost::random::discrete_distribution<std::size_t, double> vote(probs.begin(), probs.end());
    std::vector<std::string> committee;
    for (std::size_t i = 0; i < params_.committee_size; ++i) committee.push_back(label(order[vote(rng_)]));
    r.committee_answers = std::move(committee);

    r.router_score = noisy(logit, params_.router_noise);
    r.hybrid_score = noisy(logit, params_.hybrid_noise);
    r.frugal_score = noisy(logit, params_.frugal_noise);
    return r;
  }

 private:
  std::size_t pick(std::size_t n) { return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  std::size_t other_than(std::size_t excluded, std::size_t k) {
    const std::size_t v = pick(k - 1);
    return v >= excluded ? v + 1 : v;
  }

  double noisy(double logit, double sd) {
    const double z = boost::random::normal_distribution<double>(0.0, 1.0)(rng_);
    return sigmoid(logit + sd * z);
  }

  const SynthParams& params_;
  std::mt19937_64 rng_;
  boost::random::beta_distribution<double> margin_;
};

}  // namespace

std::vector<ReplayRecord> generate(std::size_t n, std::uint64_t seed, const SynthParams& params) {
  validate(params);
  if (n == 0) throw Error(ErrorCode::empty_dataset, "synthetic dataset size must be > 0");
  RecordSampler sampler(seed, params);
  std::vector<ReplayRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) records.push_back(sampler.next(i));
  return records;
}

double oracle_cascade_accuracy(std::span<const ReplayRecord> records, const CostScheme& scheme, double budget) {
  if (records.empty()) throw Error(ErrorCode::empty_dataset, "oracle needs records");
  const double p = cascade_probability(budget, scheme);
  const auto n = records.size();
  const auto quota = static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
  std::size_t small_right = 0;
  std::size_t recoverable = 0;
  for (const auto& r : records) {
    if (r.small_correct) {
      ++small_right;
    } else if (r.large_correct) {
      ++recoverable;
    }
  }
  return static_cast<double>(small_right + std::min(quota, recoverable)) / static_cast<double>(n);
}

}  // namespace cascadegate
