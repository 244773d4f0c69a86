#pragma once

// Result files and comparison reports.
//
// A run writes, per (strategy label, seed):
//   <label>_seed<seed>.curve.csv   "tests,coverage" rows
//   <label>_seed<seed>.meta.txt    key=value run description, deterministic
//   <label>_seed<seed>.timing.txt  wall-clock seconds; the only output that
//                                  may differ between identical runs
//
// A comparison writes comparison.csv, comparison.txt (aligned table),
// curves/<label>_seed<seed>.csv, overlay.svg, and report_meta.txt.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "covsel/error.hpp"
#include "covsel/format.hpp"
#include "covsel/harness.hpp"
#include "covsel/io.hpp"
#include "covsel/version.hpp"

namespace covsel {

inline std::string render_curve_csv(const CoverageCurve& curve) {
  std::string out = "tests,coverage\n";
  for (const auto& [tests, frac] : curve.points)
    out += concat(tests, ',', format_double(frac), '\n');
  return out;
}

inline void write_curve_csv(const CoverageCurve& curve,
                            const std::string& path) {
  write_text_file(path, render_curve_csv(curve));
}

inline CoverageCurve read_curve_csv(const std::string& path) {
  const std::string content = read_text_file(path);
  const auto lines = detail::split_lines(content, path);
  require(!lines.empty(), path, ": empty file");
  require(lines[0] == "tests,coverage", path,
          ":1: expected header 'tests,coverage'");
  CoverageCurve curve;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = detail::split_fields(lines[ln]);
    if (fields.size() != 2)
      detail::parse_fail(path, ln + 1,
                         concat("expected 2 fields, found ", fields.size()));
    const auto tests = detail::parse_uint<std::uint64_t>(fields[0], path,
                                                         ln + 1, "test count");
    const double frac =
        detail::parse_double(fields[1], path, ln + 1, "coverage fraction");
    curve.points.emplace_back(tests, frac);
  }
  curve.validate();
  return curve;
}

inline std::string result_basename(const std::string& label,
                                   std::uint64_t seed) {
  for (const char c : label)
    require((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9') || c == '-' || c == '_',
            "strategy label '", label,
            "' may only contain letters, digits, '-' and '_'");
  return concat(label, "_seed", seed);
}

inline std::string render_result_meta(const ExperimentResult& r) {
  std::string out;
  out += concat("format_version=1\n");
  out += concat("tool_version=", version, '\n');
  out += concat("label=", r.label, '\n');
  out += concat("seed=", r.seed, '\n');
  out += concat("kind=", to_string(r.config.kind), '\n');
  if (r.config.kind == StrategyKind::uha || r.config.kind == StrategyKind::iha)
    out += concat("order=", to_string(r.config.effective_order()), '\n');
  out += concat("batch_size=", r.config.batch_size, '\n');
  if (r.config.kind == StrategyKind::uha ||
      r.config.kind == StrategyKind::iha) {
    out += "switch_levels=";
    for (std::size_t i = 0; i < r.config.switch_levels.size(); ++i)
      out += concat(i == 0 ? "" : ",",
                    format_double(r.config.switch_levels[i]));
    out += '\n';
  }
  out += concat("pool=", r.pool, '\n');
  out += concat("simulated=", r.simulated, '\n');
  out += concat("final_coverage=", format_double(r.final_coverage), '\n');
  for (const LevelResult& lv : r.levels)
    out += concat("tests_to_", format_double(lv.level), "=",
                  lv.tests ? std::to_string(*lv.tests) : "not_reached", '\n');
  for (const auto& [iteration, phase] : r.diagnostics.phase_switches)
    out += concat("phase_switch=", iteration, ":", to_string(phase), '\n');
  out += concat("retrains=", r.diagnostics.retrain_count, '\n');
  out += concat("topup_random=", r.diagnostics.topup_random, '\n');
  out += concat("topup_novel=", r.diagnostics.topup_novel, '\n');
  return out;
}

inline void write_result(const ExperimentResult& r, const std::string& dir) {
  const std::filesystem::path base(dir);
  const std::string stem = result_basename(r.label, r.seed);
  write_curve_csv(r.curve, (base / (stem + ".curve.csv")).string());
  write_text_file((base / (stem + ".meta.txt")).string(),
                  render_result_meta(r));
  write_text_file((base / (stem + ".timing.txt")).string(),
                  concat("runtime_seconds=", format_fixed(r.runtime_seconds, 3),
                         '\n'));
}

inline LoadedResult load_result(const std::string& curve_path) {
  LoadedResult r;
  r.curve = read_curve_csv(curve_path);
  std::string meta_path = curve_path;
  const std::string suffix = ".curve.csv";
  require(meta_path.size() > suffix.size() &&
              meta_path.substr(meta_path.size() - suffix.size()) == suffix,
          "result curve file '", curve_path, "' must end in ", suffix);
  meta_path.replace(meta_path.size() - suffix.size(), suffix.size(),
                    ".meta.txt");
  const std::string meta = read_text_file(meta_path);
  bool have_label = false, have_seed = false;
  for (const auto line : detail::split_lines(meta, meta_path)) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "label") {
      r.label = std::string(value);
      have_label = true;
    } else if (key == "seed") {
      r.seed = detail::parse_uint<std::uint64_t>(value, meta_path, 0, "seed");
      have_seed = true;
    }
  }
  require(have_label && have_seed, meta_path,
          ": missing label= or seed= entry");
  return r;
}

inline std::vector<LoadedResult> load_results_dir(const std::string& dir) {
  std::vector<std::string> curve_files;
  require(std::filesystem::is_directory(dir), "'", dir,
          "' is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 10 && name.substr(name.size() - 10) == ".curve.csv")
      curve_files.push_back(entry.path().string());
  }
  std::sort(curve_files.begin(), curve_files.end());
  require(!curve_files.empty(), "no *.curve.csv result files in ", dir);
  std::vector<LoadedResult> out;
  out.reserve(curve_files.size());
  for (const std::string& path : curve_files) out.push_back(load_result(path));
  return out;
}

inline std::string render_comparison_csv(const Comparison& cmp) {
  std::string out =
      "strategy,level,median_tests,savings_pct,reached_seeds,total_seeds\n";
  for (const ComparisonRow& row : cmp.rows)
    for (const ComparisonCell& cell : row.cells) {
      out += concat(row.label, ',', format_double(cell.level), ',');
      if (cell.median_tests) out += format_double(*cell.median_tests);
      out += ',';
      if (cell.savings_pct) out += format_fixed(*cell.savings_pct, 2);
      out += concat(',', cell.reached, ',', cell.seeds, '\n');
    }
  return out;
}

inline std::string render_comparison_text(const Comparison& cmp) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"strategy"};
  for (const double level : cmp.levels) {
    header.push_back(concat("tests@", format_double(level)));
    header.push_back("savings");
  }
  grid.push_back(std::move(header));
  for (const ComparisonRow& row : cmp.rows) {
    std::vector<std::string> line{row.label};
    for (const ComparisonCell& cell : row.cells) {
      line.push_back(cell.median_tests ? format_double(*cell.median_tests)
                                       : "-");
      line.push_back(cell.savings_pct ? format_savings(*cell.savings_pct)
                                      : "-");
    }
    grid.push_back(std::move(line));
  }

  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& line : grid)
    for (std::size_t c = 0; c < line.size(); ++c)
      width[c] = std::max(width[c], line[c].size());

  std::string out = concat("baseline: ", cmp.baseline_label, '\n');
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) out += "  ";
      out += line[c];
      out.append(width[c] - line[c].size(), ' ');
    }
    // Trim trailing padding.
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

namespace detail {

inline constexpr const char* kSvgPalette[] = {
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline std::string svg_coord(double v) { return format_fixed(v, 2); }

}  // namespace detail

// Coverage curve overlay: one polyline per curve, colored by label, with a
// legend of labels. Fixed-precision coordinates keep the file deterministic.
inline std::string render_overlay_svg(const std::vector<LoadedResult>& curves) {
  require(!curves.empty(), "overlay: no curves");
  std::uint64_t max_tests = 1;
  for (const LoadedResult& r : curves)
    for (const auto& [tests, frac] : r.curve.points)
      max_tests = std::max(max_tests, tests);

  std::vector<std::string> labels;
  for (const LoadedResult& r : curves)
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end())
      labels.push_back(r.label);

  const double width = 900, height = 560;
  const double ml = 70, mr = 180, mt = 20, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;
  const auto x_of = [&](std::uint64_t tests) {
    return ml + pw * static_cast<double>(tests) /
                    static_cast<double>(max_tests);
  };
  const auto y_of = [&](double frac) { return mt + ph * (1.0 - frac); };

  std::string svg = concat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 ", width, " ",
      height, "\" font-family=\"sans-serif\" font-size=\"12\">\n");
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes and gridlines at 0.25 coverage steps.
  for (int i = 0; i <= 4; ++i) {
    const double frac = 0.25 * i;
    const double y = y_of(frac);
    svg += concat("<line x1=\"", detail::svg_coord(ml), "\" y1=\"",
                  detail::svg_coord(y), "\" x2=\"", detail::svg_coord(ml + pw),
                  "\" y2=\"", detail::svg_coord(y),
                  "\" stroke=\"#dddddd\"/>\n");
    svg += concat("<text x=\"", detail::svg_coord(ml - 8), "\" y=\"",
                  detail::svg_coord(y + 4),
                  "\" text-anchor=\"end\">", format_fixed(frac, 2),
                  "</text>\n");
  }
  for (int i = 0; i <= 4; ++i) {
    const auto tests =
        static_cast<std::uint64_t>(static_cast<double>(max_tests) * i / 4.0);
    const double x = x_of(tests);
    svg += concat("<line x1=\"", detail::svg_coord(x), "\" y1=\"",
                  detail::svg_coord(mt), "\" x2=\"", detail::svg_coord(x),
                  "\" y2=\"", detail::svg_coord(mt + ph),
                  "\" stroke=\"#dddddd\"/>\n");
    svg += concat("<text x=\"", detail::svg_coord(x), "\" y=\"",
                  detail::svg_coord(mt + ph + 18),
                  "\" text-anchor=\"middle\">", tests, "</text>\n");
  }
  svg += concat("<text x=\"", detail::svg_coord(ml + pw / 2), "\" y=\"",
                detail::svg_coord(height - 10),
                "\" text-anchor=\"middle\">simulated tests</text>\n");

  for (const LoadedResult& r : curves) {
    const auto label_index = static_cast<std::size_t>(
        std::find(labels.begin(), labels.end(), r.label) - labels.begin());
    const char* color =
        detail::kSvgPalette[label_index % std::size(detail::kSvgPalette)];
    std::string points;
    for (const auto& [tests, frac] : r.curve.points)
      points += concat(detail::svg_coord(x_of(tests)), ',',
                       detail::svg_coord(y_of(frac)), ' ');
    if (!points.empty()) points.pop_back();
    svg += concat("<polyline fill=\"none\" stroke=\"", color,
                  "\" stroke-width=\"1.5\" points=\"", points, "\"/>\n");
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = mt + 16 + 20 * static_cast<double>(i);
    const char* color =
        detail::kSvgPalette[i % std::size(detail::kSvgPalette)];
    svg += concat("<rect x=\"", detail::svg_coord(ml + pw + 16), "\" y=\"",
                  detail::svg_coord(y - 9),
                  "\" width=\"18\" height=\"4\" fill=\"", color, "\"/>\n");
    svg += concat("<text x=\"", detail::svg_coord(ml + pw + 40), "\" y=\"",
                  detail::svg_coord(y), "\">", labels[i], "</text>\n");
  }
  svg += "</svg>\n";
  return svg;
}

// Writes the full comparison report into out_dir.
inline void emit_report(const Comparison& cmp,
                        const std::vector<LoadedResult>& curves,
                        const std::string& out_dir) {
  const std::filesystem::path base(out_dir);
  write_text_file((base / "comparison.csv").string(),
                  render_comparison_csv(cmp));
  write_text_file((base / "comparison.txt").string(),
                  render_comparison_text(cmp));
  for (const LoadedResult& r : curves)
    write_curve_csv(r.curve,
                    (base / "curves" /
                     (result_basename(r.label, r.seed) + ".csv"))
                        .string());
  write_text_file((base / "overlay.svg").string(), render_overlay_svg(curves));

  std::string meta;
  meta += concat("format_version=1\n");
  meta += concat("tool_version=", version, '\n');
  meta += concat("baseline=", cmp.baseline_label, '\n');
  meta += "levels=";
  for (std::size_t i = 0; i < cmp.levels.size(); ++i)
    meta += concat(i == 0 ? "" : ",", format_double(cmp.levels[i]));
  meta += '\n';
  for (const ComparisonRow& row : cmp.rows) {
    std::vector<std::uint64_t> seeds;
    for (const LoadedResult& r : curves)
      if (r.label == row.label) seeds.push_back(r.seed);
    std::sort(seeds.begin(), seeds.end());
    meta += concat("strategy=", row.label, " seeds=");
    for (std::size_t i = 0; i < seeds.size(); ++i)
      meta += concat(i == 0 ? "" : ",", seeds[i]);
    meta += '\n';
  }
  write_text_file((base / "report_meta.txt").string(), meta);
}

}  // namespace covsel
