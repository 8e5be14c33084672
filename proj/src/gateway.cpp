#include "cascadegate/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <thread>

#include <httplib.h>

#include "cascadegate/uncertainty.hpp"

namespace cascadegate {

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::config, message); }

template <typename T>
T config_value(const nlohmann::json& raw, const char* key, T fallback) {
  auto it = raw.find(key);
  if (it == raw.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(std::string("config key '") + key + "' has the wrong type");
  }
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/\s]+)(/\S*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) config_error("invalid upstream URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/v1/completions")};
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

std::vector<TokenProb> to_probabilities(std::vector<std::pair<std::string, double>> logprobs) {
  std::vector<TokenProb> out;
  double mass = 0.0;
  for (auto& [token, lp] : logprobs) {
    if (!std::isfinite(lp) && lp != -INFINITY) continue;
    const double p = std::clamp(std::exp(lp), 0.0, 1.0);
    mass += p;
    out.push_back({std::move(token), p});
  }
  // Rounded logprobs can overshoot a total mass of one.
  if (mass > 1.0) {
    for (auto& e : out) e.prob /= mass;
  }
  return out;
}

}  // namespace

GatewayConfig parse_gateway_config(const nlohmann::json& raw) {
  if (!raw.is_object()) config_error("gateway config must be a JSON object");
  static const std::set<std::string> known = {
      "small_endpoint", "large_endpoint", "small_model", "large_model", "timeout_ms", "retries",
      "top_k",          "max_tokens",     "small_cost",  "large_cost",  "p_c",        "budget",
      "warmup",         "reservoir_cap",  "on_large_failure", "listen"};
  for (const auto& [key, _] : raw.items()) {
    if (!known.contains(key)) config_error("unknown config key '" + key + "'");
  }

  GatewayConfig c;
  auto& u = c.upstream;
  u.small_endpoint = config_value<std::string>(raw, "small_endpoint", "");
  u.large_endpoint = config_value<std::string>(raw, "large_endpoint", "");
  if (u.small_endpoint.empty() || u.large_endpoint.empty()) config_error("small_endpoint and large_endpoint are required");
  if (u.small_endpoint == u.large_endpoint) config_error("small and large endpoints must differ");
  parse_url(u.small_endpoint);
  parse_url(u.large_endpoint);
  u.small_model = config_value<std::string>(raw, "small_model", "");
  u.large_model = config_value<std::string>(raw, "large_model", "");

  const auto timeout_ms = config_value<std::int64_t>(raw, "timeout_ms", 30000);
  if (timeout_ms <= 0) config_error("timeout_ms must be > 0");
  u.timeout = std::chrono::milliseconds(timeout_ms);
  const auto retries = config_value<std::int64_t>(raw, "retries", 2);
  if (retries < 0) config_error("retries must be >= 0");
  u.retries = static_cast<std::size_t>(retries);
  const auto top_k = config_value<std::int64_t>(raw, "top_k", 5);
  if (top_k < 2) config_error("top_k must be >= 2");
  u.logprob_top_k = static_cast<std::size_t>(top_k);
  const auto max_tokens = config_value<std::int64_t>(raw, "max_tokens", 16);
  if (max_tokens < 1) config_error("max_tokens must be >= 1");
  u.max_tokens = static_cast<std::size_t>(max_tokens);

  c.small_cost = config_value<double>(raw, "small_cost", 1.0);
  c.large_cost = config_value<double>(raw, "large_cost", 10.0);
  CostScheme scheme;
  try {
    scheme = CostScheme::fixed(c.small_cost, c.large_cost);
  } catch (const Error& e) {
    config_error(e.what());
  }

  if (raw.contains("p_c") && raw.contains("budget")) config_error("give either p_c or budget, not both");
  if (raw.contains("budget")) {
    try {
      c.p_c = cascade_probability(config_value<double>(raw, "budget", 0.0), scheme);
    } catch (const Error& e) {
      config_error(e.what());
    }
  } else {
    c.p_c = config_value<double>(raw, "p_c", 0.3);
  }
  if (!(c.p_c >= 0.0 && c.p_c <= 1.0)) config_error("p_c must be in [0,1]");

  const auto warmup = config_value<std::int64_t>(raw, "warmup", static_cast<std::int64_t>(kDefaultWarmup));
  if (warmup < 0) config_error("warmup must be >= 0");
  c.warmup = static_cast<std::size_t>(warmup);
  const auto cap = config_value<std::int64_t>(raw, "reservoir_cap", 0);
  if (cap < 0) config_error("reservoir_cap must be >= 0");
  c.reservoir_cap = static_cast<std::size_t>(cap);

  const auto failure = config_value<std::string>(raw, "on_large_failure", "fallback");
  if (failure == "fallback") {
    c.on_large_failure = LargeFailurePolicy::fallback;
  } else if (failure == "error") {
    c.on_large_failure = LargeFailurePolicy::error;
  } else {
    config_error("on_large_failure must be 'fallback' or 'error'");
  }

  const auto listen = config_value<std::string>(raw, "listen", "127.0.0.1:8080");
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) config_error("listen must be host:port");
  c.listen_host = listen.substr(0, colon);
  try {
    std::size_t used = 0;
    c.listen_port = std::stoi(listen.substr(colon + 1), &used);
    if (used != listen.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    config_error("listen port must be a number");
  }
  if (c.listen_port < 0 || c.listen_port > 65535) config_error("listen port out of range");
  return c;
}

GatewayConfig load_gateway_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config '" + path.string() + "'");
  nlohmann::json raw;
  try {
    raw = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    config_error("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_gateway_config(raw);
}

UpstreamReply parse_completion_response(const nlohmann::json& body) {
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty() || !(*choices)[0].is_object()) {
    throw Error(ErrorCode::upstream_unavailable, "upstream response has no choices");
  }
  const auto& choice = (*choices)[0];
  UpstreamReply reply;
  if (choice.contains("text") && choice["text"].is_string()) {
    reply.text = choice["text"].get<std::string>();
  } else if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content") &&
             choice["message"]["content"].is_string()) {
    reply.text = choice["message"]["content"].get<std::string>();
  } else {
    throw Error(ErrorCode::upstream_unavailable, "upstream response has no text");
  }

  const auto lp = choice.find("logprobs");
  if (lp == choice.end() || !lp->is_object()) return reply;

  std::vector<std::pair<std::string, double>> candidates;
  if (auto top = lp->find("top_logprobs"); top != lp->end() && top->is_array() && !top->empty() && (*top)[0].is_object()) {
    for (const auto& [token, value] : (*top)[0].items()) {
      if (value.is_number()) candidates.emplace_back(token, value.get<double>());
    }
  } else if (auto content = lp->find("content"); content != lp->end() && content->is_array() && !content->empty()) {
    const auto& first = (*content)[0];
    if (first.contains("top_logprobs") && first["top_logprobs"].is_array()) {
      for (const auto& entry : first["top_logprobs"]) {
        if (entry.contains("token") && entry["token"].is_string() && entry.contains("logprob") &&
            entry["logprob"].is_number()) {
          candidates.emplace_back(entry["token"].get<std::string>(), entry["logprob"].get<double>());
        }
      }
    }
  }
  if (!candidates.empty()) reply.first_token = to_probabilities(std::move(candidates));
  return reply;
}

struct HttpUpstream::Impl {
  Impl(const std::string& endpoint, std::string model_name, std::string key, const UpstreamConfig& l)
      : url(parse_url(endpoint)), client(url.origin), model(std::move(model_name)), limits(l) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(limits.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(limits.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
  }

  ParsedUrl url;
  httplib::Client client;
  std::string model;
  UpstreamConfig limits;
  httplib::Headers headers;
};

HttpUpstream::HttpUpstream(std::string endpoint, std::string model, std::string api_key, const UpstreamConfig& limits)
    : impl_(std::make_unique<Impl>(endpoint, std::move(model), std::move(api_key), limits)) {}

HttpUpstream::~HttpUpstream() = default;

UpstreamReply HttpUpstream::complete(const std::string& prompt, bool with_logprobs) {
  nlohmann::json request = {
      {"prompt", prompt},
      {"max_tokens", impl_->limits.max_tokens},
      {"temperature", 0},
  };
  if (!impl_->model.empty()) request["model"] = impl_->model;
  if (with_logprobs) request["logprobs"] = impl_->limits.logprob_top_k;
  const auto body = request.dump();

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= impl_->limits.retries; ++attempt) {
    auto res = impl_->client.Post(impl_->url.path, impl_->headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::upstream_unavailable, "upstream " + impl_->url.origin + " answered HTTP " +
                                                       std::to_string(res->status));
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::upstream_unavailable, "upstream " + impl_->url.origin + " returned invalid JSON");
    }
    return parse_completion_response(parsed);
  }
  throw Error(ErrorCode::upstream_unavailable, "upstream " + impl_->url.origin + " unreachable after " +
                                                   std::to_string(impl_->limits.retries + 1) +
                                                   " attempts: " + last_error);
}

nlohmann::json to_json(const AnswerResult& r) {
  return {
      {"answer", r.answer},
      {"called_large", r.called_large},
      {"margin", r.margin},
      {"threshold", r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json(nullptr)},
      {"warmup", r.warmup},
      {"degraded", r.degraded},
  };
}

nlohmann::json to_json(const GatewayStats& s) {
  return {
      {"requests", s.requests},
      {"escalations", s.escalations},
      {"escalation_rate", s.escalation_rate},
      {"total_cost", s.total_cost},
      {"realized_avg_cost", s.realized_avg_cost},
      {"current_threshold", s.current_threshold ? nlohmann::json(*s.current_threshold) : nlohmann::json(nullptr)},
  };
}

Gateway::Gateway(GatewayConfig config)
    : Gateway(config,
              std::make_unique<HttpUpstream>(config.upstream.small_endpoint, config.upstream.small_model,
                                             env_or_empty(kSmallKeyEnv), config.upstream),
              std::make_unique<HttpUpstream>(config.upstream.large_endpoint, config.upstream.large_model,
                                             env_or_empty(kLargeKeyEnv), config.upstream)) {}

Gateway::Gateway(GatewayConfig config, std::unique_ptr<UpstreamClient> small, std::unique_ptr<UpstreamClient> large)
    : config_(std::move(config)),
      small_(std::move(small)),
      large_(std::move(large)),
      threshold_(config_.p_c, config_.warmup, config_.reservoir_cap) {}

AnswerResult Gateway::handle_request(const std::string& prompt, const std::string& task) {
  auto small = small_->complete(prompt, true);
  if (!small.first_token || small.first_token->empty()) {
    throw Error(ErrorCode::upstream_capability, "small upstream did not return first-token logprobs");
  }
  AnswerResult result;
  result.answer = std::move(small.text);
  result.margin = margin_first_token(TokenDistribution::from_entries(std::move(*small.first_token)));

  std::size_t slot = 0;
  {
    std::lock_guard lock(mutex_);
    result.warmup = threshold_.warming_up();
    result.threshold = threshold_.threshold();
    result.called_large = !result.warmup && should_escalate(result.margin, result.threshold, config_.p_c);
    threshold_.observe(result.margin);
    total_cost_ += config_.small_cost;
    if (result.called_large) ++escalations_;
    slot = log_.size();
    log_.push_back({slot, task, result.margin, result.threshold, result.warmup, result.called_large, false});
  }
  if (!result.called_large) return result;

  try {
    auto large = large_->complete(prompt, false);
    result.answer = std::move(large.text);
    std::lock_guard lock(mutex_);
    total_cost_ += config_.large_cost;
  } catch (const Error&) {
    if (config_.on_large_failure == LargeFailurePolicy::error) throw;
    result.degraded = true;
    std::lock_guard lock(mutex_);
    log_[slot].degraded = true;
  }
  return result;
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  GatewayStats s;
  s.requests = log_.size();
  s.escalations = escalations_;
  s.total_cost = total_cost_;
  if (s.requests > 0) {
    s.escalation_rate = static_cast<double>(escalations_) / static_cast<double>(s.requests);
    s.realized_avg_cost = total_cost_ / static_cast<double>(s.requests);
  }
  s.current_threshold = threshold_.threshold();
  return s;
}

std::vector<DecisionLogEntry> Gateway::decision_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

struct GatewayServer::Impl {
  explicit Impl(Gateway& g) : gateway(g) {}
  Gateway& gateway;
  httplib::Server server;
};

GatewayServer::GatewayServer(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway)) {
  auto& server = impl_->server;
  auto& gw = impl_->gateway;

  // httplib defaults to SO_REUSEPORT, which lets a second instance share a busy port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok\n", "text/plain"); });

  server.Get("/v1/stats", [&gw](const httplib::Request&, httplib::Response& res) {
    res.set_content(to_json(gw.stats()).dump(), "application/json");
  });

  server.Post("/v1/answer", [&gw](const httplib::Request& req, httplib::Response& res) {
    auto fail = [&res](int status, const std::string& message) {
      res.status = status;
      res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
    };
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      return fail(400, "request body must be JSON");
    }
    if (!body.is_object() || !body.contains("prompt") || !body["prompt"].is_string()) {
      return fail(400, "request needs a string 'prompt'");
    }
    std::string task;
    if (body.contains("task")) {
      if (!body["task"].is_string()) return fail(400, "'task' must be a string");
      task = body["task"].get<std::string>();
    }
    try {
      res.set_content(to_json(gw.handle_request(body["prompt"].get<std::string>(), task)).dump(), "application/json");
    } catch (const Error& e) {
      fail(e.code() == ErrorCode::upstream_unavailable ? 502 : 500, e.what());
    }
  });
}

GatewayServer::~GatewayServer() { stop(); }

bool GatewayServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

int GatewayServer::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool GatewayServer::listen() { return impl_->server.listen_after_bind(); }

void GatewayServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void GatewayServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace cascadegate
