#pragma once

// Experiment harness: runs a selection strategy against a database until a
// target coverage level, records the coverage curve, and compares strategies
// by tests-to-level medians across seeds.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/format.hpp"
#include "covsel/strategy.hpp"

namespace covsel {

// Coverage as a function of simulated test count. Counts are strictly
// increasing, fractions non-decreasing; the initial point records coverage
// before any selected batch (0 tests, fraction 0 for a fresh run).
struct CoverageCurve {
  std::vector<std::pair<std::uint64_t, double>> points;

  void validate() const {
    require(!points.empty(), "coverage curve is empty");
    for (std::size_t i = 0; i < points.size(); ++i) {
      require(points[i].second >= 0.0 && points[i].second <= 1.0,
              "coverage curve: fraction out of [0, 1]");
      if (i == 0) continue;
      require(points[i].first > points[i - 1].first,
              "coverage curve: test counts must be strictly increasing");
      require(points[i].second >= points[i - 1].second,
              "coverage curve: fractions must be non-decreasing");
    }
  }
};

// Smallest recorded test count whose coverage reaches the level; nullopt if
// the curve never gets there.
inline std::optional<std::uint64_t> tests_to_level(const CoverageCurve& curve,
                                                   double level) {
  require(level > 0.0 && level <= 1.0,
          "tests_to_level: level must be in (0, 1], got ", level);
  for (const auto& [tests, frac] : curve.points)
    if (frac >= level) return tests;
  return std::nullopt;
}

// Percent change of the method's cost against the baseline's. Negative means
// the method needed fewer tests.
inline double savings(double method_tests, double baseline_tests) {
  require(baseline_tests > 0.0, "savings: baseline test count must be positive");
  return (method_tests - baseline_tests) / baseline_tests * 100.0;
}

inline std::string format_savings(double pct) {
  return format_fixed(pct, 2) + "%";
}

struct LevelResult {
  double level = 0.0;
  std::optional<std::uint64_t> tests;  // nullopt = not reached
};

// Curve plus identity: the unit compare() works on, whether the curve came
// from an in-process run or a result file.
struct LoadedResult {
  std::string label;
  std::uint64_t seed = 0;
  CoverageCurve curve;
};

struct ExperimentResult {
  std::string label;
  std::uint64_t seed = 0;
  StrategyConfig config;
  CoverageCurve curve;
  std::vector<LevelResult> levels;
  std::uint64_t simulated = 0;
  std::uint64_t pool = 0;
  double final_coverage = 0.0;
  double runtime_seconds = 0.0;  // wall clock; excluded from comparisons
  RunDiagnostics diagnostics;
};

// Runs one (strategy, seed) experiment to the target coverage fraction or
// pool exhaustion, whichever comes first. Levels the run never reaches stay
// unset in the result; that is an outcome, not an error. When models_out is
// given it receives the engine's final models (for dumps).
inline ExperimentResult run_experiment(const TestDatabase& db,
                                       const std::string& label,
                                       StrategyConfig cfg,
                                       const std::vector<double>& levels,
                                       double target_fraction,
                                       ModelSet* models_out = nullptr) {
  require(target_fraction > 0.0 && target_fraction <= 1.0,
          "run_experiment: target fraction must be in (0, 1], got ",
          target_fraction);
  for (const double level : levels)
    require(level > 0.0 && level <= 1.0,
            "run_experiment: level must be in (0, 1], got ", level);

  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.label = label;
  result.seed = cfg.seed;
  result.pool = db.size();

  CoverageState state(db.model.point_count);
  SelectionEngine engine(db, cfg);
  result.curve.points.emplace_back(0, state.coverage_fraction());

  while (state.coverage_fraction() < target_fraction &&
         state.simulated().size() < db.size()) {
    const std::vector<TestId> batch = engine.next_batch(state);
    for (const TestId id : batch) apply_test(state, id, simulate(db, id));
    result.curve.points.emplace_back(state.simulated().size(),
                                     state.coverage_fraction());
  }
  result.curve.validate();

  result.simulated = state.simulated().size();
  result.final_coverage = state.coverage_fraction();
  result.levels.reserve(levels.size());
  for (const double level : levels)
    result.levels.push_back(LevelResult{level, tests_to_level(result.curve,
                                                              level)});
  result.diagnostics = engine.diagnostics();
  result.config = std::move(cfg);
  if (models_out != nullptr) *models_out = engine.models();
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

struct ComparisonCell {
  double level = 0.0;
  std::optional<double> median_tests;  // nullopt = no seed reached the level
  std::optional<double> savings_pct;   // unset for the baseline row or when
                                       // either median is missing
  std::uint32_t reached = 0;
  std::uint32_t seeds = 0;
};

struct ComparisonRow {
  std::string label;
  std::vector<ComparisonCell> cells;
};

struct Comparison {
  std::string baseline_label;
  std::vector<double> levels;
  std::vector<ComparisonRow> rows;  // baseline first, then first-seen order
};

namespace detail {

inline double median(std::vector<std::uint64_t> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return (static_cast<double>(values[n / 2 - 1]) +
          static_cast<double>(values[n / 2])) /
         2.0;
}

}  // namespace detail

// Median tests-to-level per (strategy label, level) with percent savings
// against the baseline label. Seeds that never reach a level are excluded
// from that level's median; if none reach it the cell is empty.
inline Comparison compare(const std::vector<LoadedResult>& results,
                          const std::string& baseline_label,
                          const std::vector<double>& levels) {
  require(!results.empty(), "compare: no results");
  require(!levels.empty(), "compare: no levels");

  std::vector<std::string> labels;
  for (const LoadedResult& r : results)
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end())
      labels.push_back(r.label);
  const auto base_it =
      std::find(labels.begin(), labels.end(), baseline_label);
  require(base_it != labels.end(), "compare: baseline label '", baseline_label,
          "' has no results");
  std::rotate(labels.begin(), base_it, base_it + 1);

  Comparison cmp;
  cmp.baseline_label = baseline_label;
  cmp.levels = levels;

  const auto cell_for = [&](const std::string& label, double level) {
    ComparisonCell cell;
    cell.level = level;
    std::vector<std::uint64_t> reached_counts;
    for (const LoadedResult& r : results) {
      if (r.label != label) continue;
      ++cell.seeds;
      const auto t = tests_to_level(r.curve, level);
      if (t) {
        ++cell.reached;
        reached_counts.push_back(*t);
      }
    }
    if (!reached_counts.empty())
      cell.median_tests = detail::median(std::move(reached_counts));
    return cell;
  };

  std::vector<ComparisonCell> baseline_cells;
  for (const double level : levels)
    baseline_cells.push_back(cell_for(baseline_label, level));

  for (const std::string& label : labels) {
    ComparisonRow row;
    row.label = label;
    for (std::size_t li = 0; li < levels.size(); ++li) {
      ComparisonCell cell = label == baseline_label
                                ? baseline_cells[li]
                                : cell_for(label, levels[li]);
      if (label != baseline_label && cell.median_tests &&
          baseline_cells[li].median_tests)
        cell.savings_pct =
            savings(*cell.median_tests, *baseline_cells[li].median_tests);
      row.cells.push_back(std::move(cell));
    }
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

inline std::vector<LoadedResult> as_loaded(
    const std::vector<ExperimentResult>& results) {
  std::vector<LoadedResult> out;
  out.reserve(results.size());
  for (const ExperimentResult& r : results)
    out.push_back(LoadedResult{r.label, r.seed, r.curve});
  return out;
}

inline Comparison compare(const std::vector<ExperimentResult>& results,
                          const std::string& baseline_label,
                          const std::vector<double>& levels) {
  return compare(as_loaded(results), baseline_label, levels);
}

}  // namespace covsel
