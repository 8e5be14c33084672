#include "cascadegate/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

namespace cascadegate {

namespace {

constexpr double kSpanTolerance = 1e-9;

bool near(double a, double b) { return std::abs(a - b) <= kSpanTolerance * std::max({1.0, std::abs(a), std::abs(b)}); }

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + static_cast<double>(i) * step;
  out.back() = hi;
  return out;
}

struct Cell {
  double accuracy = 0.0;
  double realized = 0.0;
};

// Runs budgets x seeds, storing results by index so the outcome does not
// depend on thread scheduling.
std::vector<CurvePoint> evaluate_budgets(const std::vector<double>& budgets,
                                         const std::vector<std::vector<ReplayRecord>>& orders,
                                         const PolicyConfig& base, const CostScheme& scheme,
                                         const SweepOptions& options) {
  const std::size_t n_seeds = orders.size();
  std::vector<Cell> cells(budgets.size() * n_seeds);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      const std::size_t point = idx / n_seeds;
      const std::size_t seed_idx = idx % n_seeds;
      try {
        PolicyConfig config = base;
        config.seed = options.seeds[seed_idx];
        config.probability = sweep_probability(base.strategy, budgets[point], scheme);
        const auto trace = run_replay(orders[seed_idx], config, scheme, options.replay);
        cells[idx] = {trace.accuracy, trace.average_cost()};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, cells.size());
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CurvePoint> points;
  points.reserve(budgets.size());
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    double acc = 0.0;
    double realized = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      acc += cells[i * n_seeds + s].accuracy;
      realized += cells[i * n_seeds + s].realized;
    }
    acc /= static_cast<double>(n_seeds);
    realized /= static_cast<double>(n_seeds);
    double var = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) var += std::pow(cells[i * n_seeds + s].accuracy - acc, 2);
    const double std_dev = n_seeds > 1 ? std::sqrt(var / static_cast<double>(n_seeds - 1)) : 0.0;
    points.push_back({budgets[i], realized, acc, std_dev});
  }
  return points;
}

}  // namespace

std::vector<BudgetTarget> budget_grid(const CostScheme& scheme, std::size_t n_points, Family family) {
  if (n_points < 2) throw Error(ErrorCode::grid, "budget grid needs at least 2 points");
  std::vector<BudgetTarget> grid;
  for (double b : linspace(scheme.avg_small, scheme.avg_large, n_points)) grid.push_back({b, family});
  return grid;
}

double sweep_probability(Strategy strategy, double budget, const CostScheme& scheme) {
  if (family_of(strategy) == Family::routing) return routing_probability(budget, scheme);
  const int calls = small_calls_of(strategy);
  if (budget < calls * scheme.avg_small) return 0.0;
  return cascade_probability(budget, scheme, calls);
}

std::vector<ReplayRecord> arrival_order(std::span<const ReplayRecord> records, std::uint64_t seed, bool shuffle) {
  if (shuffle) return shuffled(records, seed);
  return {records.begin(), records.end()};
}

BudgetCurve sweep(std::span<const ReplayRecord> records, const PolicyConfig& base, const CostScheme& scheme,
                  const SweepOptions& options) {
  if (options.seeds.empty()) throw Error(ErrorCode::parameter, "sweep needs at least one seed");
  const auto family = family_of(base.strategy);

  std::vector<double> budgets;
  for (const auto& t : budget_grid(scheme, options.grid_points, family)) budgets.push_back(t.target_avg_cost);

  std::vector<std::vector<ReplayRecord>> orders;
  for (auto seed : options.seeds) orders.push_back(arrival_order(records, seed, options.shuffle));

  BudgetCurve curve;
  curve.points = evaluate_budgets(budgets, orders, base, scheme, options);
  curve.normalized_auc = normalized_auc(curve.points, scheme);

  if (options.extended && family == Family::cascading) {
    const double ceiling = small_calls_of(base.strategy) * scheme.avg_small + scheme.avg_large;
    auto extra = linspace(scheme.avg_large, ceiling, options.grid_points);
    extra.erase(extra.begin());
    curve.extended = evaluate_budgets(extra, orders, base, scheme, options);
  }
  return curve;
}

double normalized_auc(std::span<const CurvePoint> points, const CostScheme& scheme) {
  if (points.size() < 2) throw Error(ErrorCode::curve, "curve needs at least 2 points");
  if (!near(points.front().target_budget, scheme.avg_small) || !near(points.back().target_budget, scheme.avg_large)) {
    throw Error(ErrorCode::curve, "curve must span [avg_small, avg_large] of the cost scheme");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double width = points[i].target_budget - points[i - 1].target_budget;
    if (!(width > 0.0)) throw Error(ErrorCode::curve, "curve budgets must be strictly increasing");
    area += 0.5 * width * (points[i].accuracy + points[i - 1].accuracy);
  }
  return area / (scheme.avg_large - scheme.avg_small);
}

std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

void write_curve_table(std::ostream& out, std::span<const NamedCurve> curves) {
  if (curves.empty()) return;
  const auto& ref = curves.front().curve.points;
  for (const auto& c : curves) {
    if (c.curve.points.size() != ref.size()) throw Error(ErrorCode::curve, "curves do not share a budget grid");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (!near(c.curve.points[i].target_budget, ref[i].target_budget)) {
        throw Error(ErrorCode::curve, "curves do not share a budget grid");
      }
    }
  }
  out << "budget";
  for (const auto& c : curves) out << ',' << c.name << "_mean," << c.name << "_std";
  out << '\n';
  for (std::size_t i = 0; i < ref.size(); ++i) {
    out << format_fixed6(ref[i].target_budget);
    for (const auto& c : curves) {
      out << ',' << format_fixed6(c.curve.points[i].accuracy) << ',' << format_fixed6(c.curve.points[i].accuracy_std);
    }
    out << '\n';
  }
}

void write_realized_table(std::ostream& out, std::span<const NamedCurve> curves) {
  if (curves.empty()) return;
  out << "budget";
  for (const auto& c : curves) out << ',' << c.name << "_realized";
  out << '\n';
  const auto& ref = curves.front().curve.points;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    out << format_fixed6(ref[i].target_budget);
    for (const auto& c : curves) out << ',' << format_fixed6(c.curve.points.at(i).realized_budget);
    out << '\n';
  }
}

void write_auc_table(std::ostream& out, std::span<const AucRow> rows) {
  out << "strategy,scheme,auc\n";
  for (const auto& r : rows) out << r.strategy << ',' << r.scheme << ',' << format_fixed6(r.auc) << '\n';
}

}  // namespace cascadegate
