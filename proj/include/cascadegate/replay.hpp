#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascadegate/core.hpp"
#include "cascadegate/policy.hpp"

namespace cascadegate {

// Dataset format: one JSON object per line with the fields
//   id, task, small_first_token ([[token, prob], ...]), small_answer,
//   small_correct, large_answer, large_correct, small_cost, large_cost
// and the optional router_score, hybrid_score, frugal_score,
// committee_answers. Blank lines are ignored.

/// Reads records in file order. Parse failures cite the line number;
/// validation failures cite the line and the record id.
std::vector<ReplayRecord> load_dataset(const std::filesystem::path& path);
std::vector<ReplayRecord> parse_dataset(std::istream& in, const std::string& source = "<stream>");

nlohmann::ordered_json record_to_json(const ReplayRecord& record);
void write_dataset(std::ostream& out, std::span<const ReplayRecord> records);
void save_dataset(const std::filesystem::path& path, std::span<const ReplayRecord> records);

/// Seeded Fisher-Yates permutation of the arrival order.
std::vector<ReplayRecord> shuffled(std::span<const ReplayRecord> records, std::uint64_t seed);

struct ReplayOptions {
  bool include_warmup_cost = false;
};

/// Streams `records` through a fresh policy in order.
RunTrace run_replay(std::span<const ReplayRecord> records, const PolicyConfig& config, const CostScheme& scheme,
                    const ReplayOptions& options = {});

/// Trace rows as `index,id,warmup,called_large,correct,cost,score,threshold`.
void write_trace(std::ostream& out, const RunTrace& trace);

}  // namespace cascadegate
