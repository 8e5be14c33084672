#include "cascadegate/uncertainty.hpp"

#include <algorithm>
#include <unordered_map>

namespace cascadegate {

double margin_first_token(const TokenDistribution& dist) {
  return std::clamp(dist.top() - dist.second(), 0.0, 1.0);
}

double quality_gap(double p_small, double p_large) { return p_small - p_large; }

double committee_agreement(std::span<const std::string> answers) {
  if (answers.empty()) throw Error(ErrorCode::empty_committee, "committee has no answers");
  std::unordered_map<std::string_view, std::size_t> votes;
  std::size_t best = 0;
  for (const auto& a : answers) best = std::max(best, ++votes[a]);
  return static_cast<double>(best) / static_cast<double>(answers.size());
}

}  // namespace cascadegate
