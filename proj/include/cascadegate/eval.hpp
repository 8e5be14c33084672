#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cascadegate/core.hpp"
#include "cascadegate/cost.hpp"
#include "cascadegate/policy.hpp"
#include "cascadegate/replay.hpp"

namespace cascadegate {

inline constexpr std::size_t kDefaultGridPoints = 21;
inline constexpr std::size_t kDefaultSeeds = 3;

/// `n_points` equally spaced budgets over [avg_small, avg_large], endpoints exact.
std::vector<BudgetTarget> budget_grid(const CostScheme& scheme, std::size_t n_points, Family family);

/// Call probability a strategy uses at `budget` during a sweep. Cascades whose
/// small stage alone costs more than `budget` (the committee at low budgets)
/// run with p = 0, so their realized budget exceeds the target.
double sweep_probability(Strategy strategy, double budget, const CostScheme& scheme);

struct SweepOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t grid_points = kDefaultGridPoints;
  bool shuffle = true;      // permute arrival order per seed
  std::size_t jobs = 1;
  bool extended = false;    // also fill BudgetCurve::extended for cascades
  ReplayOptions replay;
};

/// Arrival order used by `sweep` for one seed.
std::vector<ReplayRecord> arrival_order(std::span<const ReplayRecord> records, std::uint64_t seed, bool shuffle);

/// Accuracy-versus-budget curve averaged over seeds. `base.probability` is
/// ignored; `base.seed` is replaced by each sweep seed.
BudgetCurve sweep(std::span<const ReplayRecord> records, const PolicyConfig& base, const CostScheme& scheme,
                  const SweepOptions& options = {});

/// Trapezoidal area under accuracy over target budget, divided by
/// avg_large - avg_small. The curve must be sorted and span exactly
/// [avg_small, avg_large].
double normalized_auc(std::span<const CurvePoint> points, const CostScheme& scheme);

struct NamedCurve {
  std::string name;
  BudgetCurve curve;
};

struct AucRow {
  std::string strategy;
  std::string scheme;
  double auc = 0.0;
};

/// `budget,<name>_mean,<name>_std,...`; every curve must share the same budgets.
void write_curve_table(std::ostream& out, std::span<const NamedCurve> curves);
/// `budget,<name>_realized,...` for auditing realized against target spend.
void write_realized_table(std::ostream& out, std::span<const NamedCurve> curves);
/// `strategy,scheme,auc`.
void write_auc_table(std::ostream& out, std::span<const AucRow> rows);

/// Fixed six-decimal rendering used by every table.
std::string format_fixed6(double value);

}  // namespace cascadegate
