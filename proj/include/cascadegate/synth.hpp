#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cascadegate/core.hpp"

namespace cascadegate {

/// Knobs of the synthetic log generator. Margins follow
/// Beta(margin_beta_a, margin_beta_b); the small model is right with
/// probability sigmoid(link_slope * margin + link_intercept); the large model
/// is right with probability large_accuracy, independently.
struct SynthParams {
  double margin_beta_a = 2.0;
  double margin_beta_b = 2.0;
  double link_slope = 4.0;
  double link_intercept = -1.0;
  double large_accuracy = 0.9;
  std::size_t vocab_size = 5;
  double small_cost = 1.0;
  double large_cost = 10.0;
  std::size_t committee_size = 5;
  // Logit-scale noise on the auxiliary scorer outputs.
  double router_noise = 1.0;
  double hybrid_noise = 1.5;
  double frugal_noise = 0.75;
};

/// Throws Error{parameter} for invalid knobs and Error{empty_dataset} for n = 0.
std::vector<ReplayRecord> generate(std::size_t n, std::uint64_t seed, const SynthParams& params = {});

/// Best accuracy any cascade can reach at `budget`: escalate, within the
/// quota floor(p_c * n), only queries the small model gets wrong and the
/// large model gets right.
double oracle_cascade_accuracy(std::span<const ReplayRecord> records, const CostScheme& scheme, double budget);

}  // namespace cascadegate
