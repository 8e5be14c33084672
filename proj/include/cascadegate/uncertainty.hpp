#pragma once

#include <span>
#include <string>

#include "cascadegate/core.hpp"

namespace cascadegate {

/// Gap between the two most likely first tokens. A single-entry
/// distribution counts its missing runner-up as probability 0.
double margin_first_token(const TokenDistribution& dist);

/// HybridLLM training signal: P_small(gold first token) - P_large(gold first token).
double quality_gap(double p_small, double p_large);

/// Vote share of the modal answer among committee samples, compared by exact
/// string equality. Throws Error{empty_committee} on an empty list.
double committee_agreement(std::span<const std::string> answers);

}  // namespace cascadegate
