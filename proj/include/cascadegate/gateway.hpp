#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascadegate/core.hpp"
#include "cascadegate/cost.hpp"
#include "cascadegate/policy.hpp"

namespace cascadegate {

inline constexpr const char* kSmallKeyEnv = "CASCADEGATE_SMALL_KEY";
inline constexpr const char* kLargeKeyEnv = "CASCADEGATE_LARGE_KEY";

struct UpstreamConfig {
  std::string small_endpoint;  // full URL, e.g. http://127.0.0.1:8001/v1/completions
  std::string large_endpoint;
  std::string small_model;     // sent as "model" when non-empty
  std::string large_model;
  std::chrono::milliseconds timeout{30000};
  std::size_t retries = 2;
  std::size_t logprob_top_k = 5;
  std::size_t max_tokens = 16;
};

enum class LargeFailurePolicy { fallback, error };

struct GatewayConfig {
  UpstreamConfig upstream;
  double small_cost = 1.0;
  double large_cost = 10.0;
  double p_c = 0.3;
  std::size_t warmup = kDefaultWarmup;
  std::size_t reservoir_cap = 0;
  LargeFailurePolicy on_large_failure = LargeFailurePolicy::fallback;
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
};

/// Reads the JSON config file. Every problem is reported as Error{config}.
GatewayConfig load_gateway_config(const std::filesystem::path& path);
GatewayConfig parse_gateway_config(const nlohmann::json& raw);

struct UpstreamReply {
  std::string text;
  // Top-k candidates at the first generated position, as probabilities.
  std::optional<std::vector<TokenProb>> first_token;
};

class UpstreamClient {
 public:
  virtual ~UpstreamClient() = default;
  virtual UpstreamReply complete(const std::string& prompt, bool with_logprobs) = 0;
};

/// Completions-protocol client. Request body:
///   {"model", "prompt", "max_tokens", "temperature": 0, "logprobs": k}
/// ("logprobs" only when requested). The first-token candidates are read
/// from choices[0].logprobs.top_logprobs[0] ({token: logprob}) or, for
/// chat-style servers, choices[0].logprobs.content[0].top_logprobs
/// ([{token, logprob}]).
class HttpUpstream : public UpstreamClient {
 public:
  HttpUpstream(std::string endpoint, std::string model, std::string api_key, const UpstreamConfig& limits);
  ~HttpUpstream() override;

  UpstreamReply complete(const std::string& prompt, bool with_logprobs) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses a completions response body. Exposed for tests.
UpstreamReply parse_completion_response(const nlohmann::json& body);

struct AnswerResult {
  std::string answer;
  bool called_large = false;
  double margin = 0.0;
  std::optional<double> threshold;
  bool warmup = false;
  bool degraded = false;  // escalation failed; small answer returned
};

nlohmann::json to_json(const AnswerResult& result);

struct GatewayStats {
  std::size_t requests = 0;
  std::size_t escalations = 0;
  double escalation_rate = 0.0;
  double total_cost = 0.0;
  double realized_avg_cost = 0.0;
  std::optional<double> current_threshold;
};

nlohmann::json to_json(const GatewayStats& stats);

struct DecisionLogEntry {
  std::uint64_t sequence = 0;
  std::string task;
  double margin = 0.0;
  std::optional<double> threshold;
  bool warmup = false;
  bool called_large = false;
  bool degraded = false;
};

/// Margin cascade in front of two upstream models. Threshold updates are
/// serialized; upstream calls run outside the lock.
class Gateway {
 public:
  /// Builds HTTP upstreams, reading auth keys from the environment.
  explicit Gateway(GatewayConfig config);
  Gateway(GatewayConfig config, std::unique_ptr<UpstreamClient> small, std::unique_ptr<UpstreamClient> large);

  /// Throws Error{upstream_unavailable} (502) or Error{upstream_capability} (500).
  AnswerResult handle_request(const std::string& prompt, const std::string& task = "");

  GatewayStats stats() const;
  std::vector<DecisionLogEntry> decision_log() const;
  const GatewayConfig& config() const { return config_; }

 private:
  GatewayConfig config_;
  std::unique_ptr<UpstreamClient> small_;
  std::unique_ptr<UpstreamClient> large_;

  mutable std::mutex mutex_;
  DynamicThreshold threshold_;
  std::vector<DecisionLogEntry> log_;
  std::size_t escalations_ = 0;
  double total_cost_ = 0.0;
};

/// HTTP front end: POST /v1/answer, GET /v1/stats, GET /healthz.
class GatewayServer {
 public:
  explicit GatewayServer(Gateway& gateway);
  ~GatewayServer();

  /// Returns false when the address cannot be bound.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  /// Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cascadegate
