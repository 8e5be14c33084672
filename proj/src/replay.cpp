#include "cascadegate/replay.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <boost/random/uniform_int_distribution.hpp>

namespace cascadegate {

std::vector<ReplayRecord> parse_dataset(std::istream& in, const std::string& source) {
  std::vector<ReplayRecord> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = source + ":" + std::to_string(line_no);

    nlohmann::json raw;
    try {
      raw = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::parse, where + ": malformed record at line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      records.push_back(validate_record(raw));
    } catch (const Error& e) {
      std::string id = "?";
      if (raw.is_object() && raw.contains("id") && raw["id"].is_string()) id = raw["id"].get<std::string>();
      throw Error(e.code(), where + ": record '" + id + "': " + e.what());
    }
    if (!ids.insert(records.back().id).second) {
      throw Error(ErrorCode::schema, where + ": duplicate record id '" + records.back().id + "'");
    }
  }
  if (records.empty()) throw Error(ErrorCode::empty_dataset, source + ": dataset contains no records");
  return records;
}

std::vector<ReplayRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, path.string());
}

nlohmann::ordered_json record_to_json(const ReplayRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["task"] = r.task;
  auto dist = nlohmann::ordered_json::array();
  for (const auto& e : r.small_first_token.entries()) dist.push_back({e.token, e.prob});
  j["small_first_token"] = std::move(dist);
  j["small_answer"] = r.small_answer;
  j["small_correct"] = r.small_correct;
  j["large_answer"] = r.large_answer;
  j["large_correct"] = r.large_correct;
  j["small_cost"] = r.small_cost;
  j["large_cost"] = r.large_cost;
  if (r.router_score) j["router_score"] = *r.router_score;
  if (r.hybrid_score) j["hybrid_score"] = *r.hybrid_score;
  if (r.frugal_score) j["frugal_score"] = *r.frugal_score;
  if (r.committee_answers) j["committee_answers"] = *r.committee_answers;
  return j;
}

void write_dataset(std::ostream& out, std::span<const ReplayRecord> records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, std::span<const ReplayRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write dataset '" + path.string() + "'");
  write_dataset(out, records);
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::vector<ReplayRecord> shuffled(std::span<const ReplayRecord> records, std::uint64_t seed) {
  std::vector<ReplayRecord> out(records.begin(), records.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = out.size(); i > 1; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(out[i - 1], out[pick(rng)]);
  }
  return out;
}

RunTrace run_replay(std::span<const ReplayRecord> records, const PolicyConfig& config, const CostScheme& scheme,
                    const ReplayOptions& options) {
  if (records.size() <= config.warmup_target) {
    throw Error(ErrorCode::insufficient_data, "dataset has " + std::to_string(records.size()) +
                                                  " records; need more than the warm-up of " +
                                                  std::to_string(config.warmup_target));
  }
  Policy policy(config, scheme);
  RunTrace trace;
  trace.decisions.reserve(records.size());
  for (const auto& r : records) {
    auto d = policy.decide(r);
    if (d.warmup) {
      ++trace.warmup_count;
      if (options.include_warmup_cost) {
        trace.total_cost += d.incurred_cost;
        ++trace.cost_rows;
      }
    } else {
      ++trace.evaluated_queries;
      trace.total_cost += d.incurred_cost;
      ++trace.cost_rows;
      if (d.called_large) ++trace.escalations;
      if (d.answered_correctly) ++trace.correct;
    }
    trace.decisions.push_back(std::move(d));
  }
  trace.accuracy = static_cast<double>(trace.correct) / static_cast<double>(trace.evaluated_queries);
  return trace;
}

void write_trace(std::ostream& out, const RunTrace& trace) {
  out << "index,id,warmup,called_large,correct,cost,score,threshold\n";
  std::size_t i = 0;
  for (const auto& d : trace.decisions) {
    out << i++ << ',' << d.record_id << ',' << (d.warmup ? 1 : 0) << ',' << (d.called_large ? 1 : 0) << ','
        << (d.answered_correctly ? 1 : 0) << ',' << nlohmann::json(d.incurred_cost).dump() << ',';
    if (d.score) out << nlohmann::json(*d.score).dump();
    out << ',';
    if (d.threshold) out << nlohmann::json(*d.threshold).dump();
    out << '\n';
  }
}

}  // namespace cascadegate
