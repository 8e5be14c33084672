#include "cascadegate/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cascadegate/eval.hpp"
#include "cascadegate/gateway.hpp"
#include "cascadegate/replay.hpp"
#include "cascadegate/synth.hpp"

namespace cascadegate {

namespace {

std::atomic<bool> g_shutdown{false};

extern "C" void on_signal(int) { request_shutdown(); }

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::budget_range:
    case ErrorCode::grid:
    case ErrorCode::parameter: return kExitUsage;
    case ErrorCode::upstream_unavailable:
    case ErrorCode::upstream_capability: return kExitRuntime;
    default: return kExitData;
  }
}

Strategy strategy_or_throw(const std::string& name) {
  auto s = parse_strategy(name);
  if (!s) throw UsageError("unknown strategy '" + name + "'");
  return *s;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  fn(file);
  if (!file) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

// "out/curve.csv" -> "out/curve.cl5.csv" when several schemes share one flag.
std::string per_scheme_path(const std::string& path, double large_cost, bool multiple) {
  if (!multiple || path.empty() || path == "-") return path;
  std::ostringstream tag;
  tag << ".cl" << large_cost;
  const auto dot = path.rfind('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag.str();
  return path.substr(0, dot) + tag.str() + path.substr(dot);
}

struct ReplayFlags {
  std::string data;
  std::string strategy;
  std::optional<double> budget;
  std::optional<double> probability;
  std::optional<double> cs;
  std::optional<double> cl;
  std::uint64_t seed = 0;
  std::size_t warmup = kDefaultWarmup;
  std::size_t reservoir_cap = 0;
  bool shuffle = false;
  bool include_warmup_cost = false;
  std::string trace_out;
};

struct SweepFlags {
  std::string data;
  std::optional<std::string> strategies;
  std::size_t grid = kDefaultGridPoints;
  std::size_t seeds = kDefaultSeeds;
  std::uint64_t base_seed = 0;
  double cs = 1.0;
  std::vector<double> cl;
  std::size_t warmup = kDefaultWarmup;
  std::size_t jobs = 1;
  bool no_shuffle = false;
  bool include_warmup_cost = false;
  std::string curve_out;
  std::string auc_out;
  std::string realized_out;
  std::string extended_out;
};

struct SynthFlags {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  SynthParams params;
  std::string out;
};

struct ServeFlags {
  std::string config;
  std::string listen;
};

CostScheme scheme_for(const std::vector<ReplayRecord>& records, std::optional<double> cs, std::optional<double> cl) {
  if (!cs && !cl) return measure_averages(records);
  return CostScheme::fixed(cs.value_or(1.0), cl.value_or(10.0));
}

int cmd_replay(const ReplayFlags& f, std::ostream& out) {
  if (f.budget.has_value() == f.probability.has_value()) throw UsageError("give exactly one of --budget or --p");
  const auto strategy = strategy_or_throw(f.strategy);
  auto records = load_dataset(f.data);
  if (f.shuffle) records = shuffled(records, f.seed);
  const auto scheme = scheme_for(records, f.cs, f.cl);

  PolicyConfig config;
  config.strategy = strategy;
  config.seed = f.seed;
  config.warmup_target = f.warmup;
  config.reservoir_cap = f.reservoir_cap;
  if (f.budget) {
    config.probability = probability_for({*f.budget, family_of(strategy)}, scheme, small_calls_of(strategy));
  } else {
    if (!(*f.probability >= 0.0 && *f.probability <= 1.0)) throw UsageError("--p must be in [0,1]");
    config.probability = *f.probability;
  }

  const auto trace = run_replay(records, config, scheme, {f.include_warmup_cost});
  if (!f.trace_out.empty()) with_output(f.trace_out, out, [&](std::ostream& os) { write_trace(os, trace); });

  nlohmann::ordered_json summary;
  summary["strategy"] = to_string(strategy);
  summary["probability"] = config.probability;
  summary["scheme"] = scheme.label();
  summary["records"] = records.size();
  summary["warmup"] = trace.warmup_count;
  summary["evaluated"] = trace.evaluated_queries;
  summary["escalations"] = trace.escalations;
  summary["escalation_rate"] = trace.escalation_rate();
  summary["accuracy"] = trace.accuracy;
  summary["total_cost"] = trace.total_cost;
  summary["avg_cost"] = trace.average_cost();
  if (!trace.decisions.empty() && trace.decisions.back().threshold) {
    summary["final_threshold"] = *trace.decisions.back().threshold;
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_sweep(const SweepFlags& f, std::ostream& out) {
  std::vector<Strategy> strategies;
  const auto records = load_dataset(f.data);
  if (!f.strategies) {
    for (auto s : kAllStrategies) {
      if (std::all_of(records.begin(), records.end(), [s](const ReplayRecord& r) { return has_signal(s, r); })) {
        strategies.push_back(s);
      }
    }
  } else {
    for (const auto& name : split_list(*f.strategies)) strategies.push_back(strategy_or_throw(name));
    if (strategies.empty()) throw UsageError("--strategies lists no strategy");
  }
  if (f.grid < 2) throw UsageError("--grid must be >= 2");
  if (f.seeds < 1) throw UsageError("--seeds must be >= 1");

  std::vector<CostScheme> schemes;
  if (f.cl.empty()) {
    schemes.push_back(measure_averages(records));
  } else {
    for (double cl : f.cl) schemes.push_back(CostScheme::fixed(f.cs, cl));
  }

  SweepOptions options;
  options.seeds.clear();
  for (std::size_t i = 0; i < f.seeds; ++i) options.seeds.push_back(f.base_seed + i);
  options.grid_points = f.grid;
  options.shuffle = !f.no_shuffle;
  options.jobs = std::max<std::size_t>(f.jobs, 1);
  options.extended = !f.extended_out.empty();
  options.replay.include_warmup_cost = f.include_warmup_cost;

  std::vector<AucRow> auc_rows;
  const bool multiple = schemes.size() > 1;
  for (const auto& scheme : schemes) {
    std::vector<NamedCurve> curves;
    std::vector<NamedCurve> extended;
    for (auto s : strategies) {
      PolicyConfig base;
      base.strategy = s;
      base.warmup_target = f.warmup;
      auto curve = sweep(records, base, scheme, options);
      auc_rows.push_back({std::string(to_string(s)), scheme.label(), curve.normalized_auc});
      if (!curve.extended.empty()) extended.push_back({std::string(to_string(s)), {curve.extended, 0.0, {}}});
      curves.push_back({std::string(to_string(s)), std::move(curve)});
    }
    if (f.curve_out.empty() && multiple) out << "# " << scheme.label() << '\n';
    with_output(per_scheme_path(f.curve_out, scheme.avg_large, multiple), out,
                [&](std::ostream& os) { write_curve_table(os, curves); });
    if (!f.realized_out.empty()) {
      with_output(per_scheme_path(f.realized_out, scheme.avg_large, multiple), out,
                  [&](std::ostream& os) { write_realized_table(os, curves); });
    }
    if (!f.extended_out.empty() && !extended.empty()) {
      with_output(per_scheme_path(f.extended_out, scheme.avg_large, multiple), out,
                  [&](std::ostream& os) { write_curve_table(os, extended); });
    }
  }
  with_output(f.auc_out, out, [&](std::ostream& os) { write_auc_table(os, auc_rows); });
  return kExitOk;
}

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  const auto records = generate(f.n, f.seed, f.params);
  if (f.out.empty() || f.out == "-") {
    write_dataset(out, records);
  } else {
    save_dataset(f.out, records);
  }
  return kExitOk;
}

int cmd_serve(const ServeFlags& f, std::ostream& out, std::ostream& err) {
  auto config = load_gateway_config(f.config);
  if (!f.listen.empty()) {
    nlohmann::json patch = {{"small_endpoint", config.upstream.small_endpoint},
                            {"large_endpoint", config.upstream.large_endpoint},
                            {"listen", f.listen}};
    const auto parsed = parse_gateway_config(patch);
    config.listen_host = parsed.listen_host;
    config.listen_port = parsed.listen_port;
  }

  Gateway gateway(config);
  GatewayServer server(gateway);
  if (!server.bind(config.listen_host, config.listen_port)) {
    err << "error: cannot bind " << config.listen_host << ':' << config.listen_port << " (address in use?)\n";
    return kExitRuntime;
  }

  g_shutdown = false;
  auto previous_int = std::signal(SIGINT, on_signal);
  auto previous_term = std::signal(SIGTERM, on_signal);
  std::jthread watcher([&server](std::stop_token st) {
    while (!st.stop_requested() && !g_shutdown.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  out << "listening on " << config.listen_host << ':' << config.listen_port << std::endl;
  const bool ok = server.listen();
  watcher.request_stop();
  watcher.join();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  return ok || g_shutdown ? kExitOk : kExitRuntime;
}

}  // namespace

void request_shutdown() noexcept { g_shutdown.store(true); }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cost-aware small/large model cascade: replay, sweep, synth, serve", "cascadegate"};
  app.require_subcommand(1);

  ReplayFlags rf;
  auto* replay = app.add_subcommand("replay", "Replay a dataset through one strategy");
  replay->add_option("--data", rf.data, "Dataset file (one JSON record per line)")->required();
  replay->add_option("--strategy", rf.strategy,
                     "random|score|hybrid|frugal|margin|committee (or the full *_routing/*_cascade name)")
      ->required();
  replay->add_option("--budget", rf.budget, "Target average cost per query; converted to a call probability");
  replay->add_option("--p", rf.probability, "Call probability p_r / p_c directly");
  replay->add_option("--cs", rf.cs, "Fixed small-model cost (default: measured from the dataset)");
  replay->add_option("--cl", rf.cl, "Fixed large-model cost (default: measured from the dataset)");
  replay->add_option("--seed", rf.seed, "Seed for random routing and --shuffle");
  replay->add_option("--warmup", rf.warmup, "Warm-up queries used only to seed the threshold")->capture_default_str();
  replay->add_option("--reservoir-cap", rf.reservoir_cap, "Bound on retained scores (0 = keep all)");
  replay->add_flag("--shuffle", rf.shuffle, "Seeded shuffle of the arrival order");
  replay->add_flag("--include-warmup-cost", rf.include_warmup_cost, "Charge warm-up queries in the cost total");
  replay->add_option("--trace-out", rf.trace_out, "Write the per-query decision trace (CSV)");

  SweepFlags sf;
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy-vs-budget curves and normalized AUC");
  sweep_cmd->add_option("--data", sf.data, "Dataset file")->required();
  sweep_cmd->add_option("--strategies", sf.strategies,
                        "Comma-separated strategies (default: every strategy the dataset supports)");
  sweep_cmd->add_option("--grid", sf.grid, "Budget grid points over [avg small, avg large]")->capture_default_str();
  sweep_cmd->add_option("--seeds", sf.seeds, "Number of seeds to average")->capture_default_str();
  sweep_cmd->add_option("--base-seed", sf.base_seed, "First seed; seeds are consecutive")->capture_default_str();
  sweep_cmd->add_option("--cs", sf.cs, "Small-model cost used with --cl")->capture_default_str();
  sweep_cmd->add_option("--cl", sf.cl, "Large-model cost; repeat for several schemes (default: measured)");
  sweep_cmd->add_option("--warmup", sf.warmup, "Warm-up queries")->capture_default_str();
  sweep_cmd->add_option("--jobs", sf.jobs, "Worker threads")->capture_default_str();
  sweep_cmd->add_flag("--no-shuffle", sf.no_shuffle, "Keep file order for every seed");
  sweep_cmd->add_flag("--include-warmup-cost", sf.include_warmup_cost, "Charge warm-up queries in realized cost");
  sweep_cmd->add_option("--curve-out", sf.curve_out, "Curve table path (default: stdout)");
  sweep_cmd->add_option("--auc-out", sf.auc_out, "AUC table path (default: stdout)");
  sweep_cmd->add_option("--realized-out", sf.realized_out, "Realized-budget table path");
  sweep_cmd->add_option("--extended-out", sf.extended_out, "Cascade points above the large cost (not in AUC)");

  SynthFlags yf;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic replay dataset");
  synth->add_option("--n", yf.n, "Number of records")->required();
  synth->add_option("--seed", yf.seed, "Generator seed")->capture_default_str();
  synth->add_option("--beta-a", yf.params.margin_beta_a, "Margin Beta shape a")->capture_default_str();
  synth->add_option("--beta-b", yf.params.margin_beta_b, "Margin Beta shape b")->capture_default_str();
  synth->add_option("--slope", yf.params.link_slope, "Logistic link slope")->capture_default_str();
  synth->add_option("--intercept", yf.params.link_intercept, "Logistic link intercept")->capture_default_str();
  synth->add_option("--large-acc", yf.params.large_accuracy, "Large-model accuracy")->capture_default_str();
  synth->add_option("--vocab", yf.params.vocab_size, "Entries per first-token distribution")->capture_default_str();
  synth->add_option("--cs", yf.params.small_cost, "Per-record small cost")->capture_default_str();
  synth->add_option("--cl", yf.params.large_cost, "Per-record large cost")->capture_default_str();
  synth->add_option("--committee-size", yf.params.committee_size, "Committee samples per record")
      ->capture_default_str();
  synth->add_option("--out", yf.out, "Output path (default: stdout)");

  ServeFlags vf;
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  serve->add_option("--config", vf.config, "Gateway config (JSON)")->required();
  serve->add_option("--listen", vf.listen, "host:port, overrides the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (replay->parsed()) return cmd_replay(rf, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sf, out);
    if (synth->parsed()) return cmd_synth(yf, out);
    if (serve->parsed()) return cmd_serve(vf, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cascadegate
