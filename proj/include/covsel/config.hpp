#pragma once

// INI configuration.
//
//   [database] | [synthetic]   where the test database comes from
//   [run]                      levels, seeds, output directory, dump flags
//   [strategy.<label>]         one section per strategy to run
//
// The dialect is strict: full-line comments only (# or ;), no duplicate
// sections or keys, unknown keys are errors that name the key and line.
// Values never contain commas except list values (comma-separated).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covsel/error.hpp"
#include "covsel/io.hpp"
#include "covsel/report.hpp"
#include "covsel/strategy.hpp"
#include "covsel/synthetic.hpp"

namespace covsel {

namespace detail {

inline std::string_view trim_blanks(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  return s;
}

}  // namespace detail

struct IniEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;  // 0 = injected by a command-line override
};

struct IniSection {
  std::string name;
  std::size_t line = 0;
  std::vector<IniEntry> entries;

  const IniEntry* find(std::string_view key) const {
    for (const IniEntry& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

struct IniFile {
  std::string origin;
  std::vector<IniSection> sections;

  static IniFile parse(std::string_view text, std::string origin_name) {
    IniFile file;
    file.origin = std::move(origin_name);
    const auto lines = detail::split_lines(text, file.origin);
    IniSection* current = nullptr;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::size_t line_no = i + 1;
      std::string_view line = detail::trim_blanks(lines[i]);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        require(line.back() == ']', file.origin, ":", line_no,
                ": unterminated section header");
        const std::string name(
            detail::trim_blanks(line.substr(1, line.size() - 2)));
        require(!name.empty(), file.origin, ":", line_no,
                ": empty section name");
        require(file.find(name) == nullptr, file.origin, ":", line_no,
                ": duplicate section [", name, "]");
        file.sections.push_back(IniSection{name, line_no, {}});
        current = &file.sections.back();
        continue;
      }
      const auto eq = line.find('=');
      require(eq != std::string_view::npos, file.origin, ":", line_no,
              ": expected 'key = value'");
      require(current != nullptr, file.origin, ":", line_no,
              ": key outside any section");
      const std::string key(detail::trim_blanks(line.substr(0, eq)));
      const std::string value(detail::trim_blanks(line.substr(eq + 1)));
      require(!key.empty(), file.origin, ":", line_no, ": empty key");
      require(current->find(key) == nullptr, file.origin, ":", line_no,
              ": duplicate key '", key, "' in section [", current->name, "]");
      current->entries.push_back(IniEntry{key, value, line_no});
    }
    return file;
  }

  static IniFile parse_file(const std::string& path) {
    return parse(read_text_file(path), path);
  }

  const IniSection* find(std::string_view name) const {
    for (const IniSection& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  IniSection* find(std::string_view name) {
    for (IniSection& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  // Command-line override "section.key=value". The key is split at the last
  // dot, so strategy section names keep their embedded dot. The section must
  // already exist: overrides adjust a config, they do not restructure it.
  void apply_override(std::string_view dotted, std::string_view value) {
    const auto dot = dotted.rfind('.');
    require(dot != std::string_view::npos && dot > 0 &&
                dot + 1 < dotted.size(),
            "override '", dotted, "' must look like section.key");
    const std::string_view section_name = dotted.substr(0, dot);
    const std::string key(dotted.substr(dot + 1));
    IniSection* section = find(section_name);
    require(section != nullptr, "override '", dotted,
            "': no section [", section_name, "] in ", origin);
    for (IniEntry& e : section->entries) {
      if (e.key == key) {
        e.value = std::string(value);
        e.line = 0;
        return;
      }
    }
    section->entries.push_back(IniEntry{key, std::string(value), 0});
  }

};

namespace detail {

// Typed access to one section with unknown-key detection: every key must be
// consumed by the parser, anything left over is an error.
class SectionReader {
 public:
  SectionReader(const IniFile& file, const IniSection& section)
      : file_(file), section_(section), used_(section.entries.size(), false) {}

  std::optional<std::string> raw(std::string_view key) {
    for (std::size_t i = 0; i < section_.entries.size(); ++i) {
      if (section_.entries[i].key == key) {
        used_[i] = true;
        return section_.entries[i].value;
      }
    }
    return std::nullopt;
  }

  std::string require_string(std::string_view key) {
    auto v = raw(key);
    require(v.has_value(), file_.origin, ": section [", section_.name,
            "] is missing required key '", key, "'");
    return *v;
  }

  template <class T>
  T get_uint(std::string_view key, T fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    return parse_uint<T>(*v, where(key), 0, "value");
  }

  double get_double(std::string_view key, double fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    return parse_double(*v, where(key), 0, "value");
  }

  bool get_bool(std::string_view key, bool fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    fail(where(key), ": expected true/false, got '", *v, "'");
  }

  std::vector<double> get_double_list(std::string_view key,
                                      std::vector<double> fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto part : split_fields(*v))
      out.push_back(
          parse_double(trim_blanks(part), where(key), 0, "list value"));
    return out;
  }

  std::vector<std::uint64_t> get_uint_list(std::string_view key,
                                           std::vector<std::uint64_t> fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<std::uint64_t> out;
    for (const auto part : split_fields(*v))
      out.push_back(parse_uint<std::uint64_t>(trim_blanks(part), where(key), 0,
                                              "list value"));
    return out;
  }

  void finish() {
    for (std::size_t i = 0; i < section_.entries.size(); ++i) {
      if (used_[i]) continue;
      const IniEntry& e = section_.entries[i];
      if (e.line == 0)
        fail(file_.origin, ": unknown key '", e.key, "' in section [",
             section_.name, "] (from a command-line override)");
      fail(file_.origin, ":", e.line, ": unknown key '", e.key,
           "' in section [", section_.name, "]");
    }
  }

 private:
  std::string where(std::string_view key) {
    const IniEntry* e = section_.find(key);
    if (e == nullptr || e->line == 0)
      return concat(file_.origin, ": [", section_.name, "] ", key);
    return concat(file_.origin, ":", e->line, ": [", section_.name, "] ",
                  key);
  }

  const IniFile& file_;
  const IniSection& section_;
  std::vector<bool> used_;
};

}  // namespace detail

inline SyntheticSpec parse_synthetic_section(const IniFile& file,
                                             const IniSection& section) {
  detail::SectionReader r(file, section);
  SyntheticSpec spec;
  spec.n_tests = r.get_uint<std::uint64_t>("n_tests", 0);
  spec.n_numeric_fields = r.get_uint<std::uint32_t>("n_numeric_fields", 0);
  spec.n_categorical_fields =
      r.get_uint<std::uint32_t>("n_categorical_fields", 0);
  spec.categorical_cardinality =
      r.get_uint<std::uint32_t>("categorical_cardinality",
                                spec.categorical_cardinality);
  spec.n_points = r.get_uint<std::uint32_t>("n_points", 0);
  spec.n_groups = r.get_uint<std::uint32_t>("n_groups", 0);
  spec.predicates_per_point = r.get_uint<std::uint32_t>(
      "predicates_per_point", spec.predicates_per_point);
  spec.rarity_exponent = r.get_double("rarity_exponent", spec.rarity_exponent);
  spec.mixture_components = r.get_uint<std::uint32_t>(
      "mixture_components", spec.mixture_components);
  spec.seed = r.get_uint<std::uint64_t>("seed", spec.seed);
  r.finish();
  spec.validate();
  return spec;
}

inline StrategyConfig parse_strategy_section(const IniFile& file,
                                             const IniSection& section) {
  detail::SectionReader r(file, section);
  StrategyConfig cfg;
  cfg.kind = parse_strategy_kind(r.require_string("kind"));
  if (const auto order = r.raw("order"))
    cfg.order = parse_hybrid_order(*order);
  cfg.batch_size = r.get_uint<std::uint32_t>("batch_size", cfg.batch_size);
  cfg.switch_levels = r.get_double_list("switch_levels", cfg.switch_levels);
  if (const auto ds = r.raw("dynamic_stagnation"))
    cfg.dynamic_stagnation = detail::parse_uint<std::uint32_t>(
        *ds, file.origin, section.line, "dynamic_stagnation");
  cfg.min_hits = r.get_uint<std::uint32_t>("min_hits", cfg.min_hits);
  cfg.epsilon = r.get_double("epsilon", cfg.epsilon);
  cfg.nu = r.get_double("nu", cfg.nu);
  cfg.kernel.gamma = r.get_double("gamma", cfg.kernel.gamma);
  cfg.solver.standardize = r.get_bool("standardize", cfg.solver.standardize);
  cfg.solver.tolerance = r.get_double("solver_tolerance",
                                      cfg.solver.tolerance);
  cfg.solver.max_iterations = r.get_uint<std::uint64_t>(
      "solver_max_iterations", cfg.solver.max_iterations);
  cfg.tree.max_depth = r.get_uint<std::uint32_t>("max_depth",
                                                 cfg.tree.max_depth);
  cfg.tree.min_leaf = r.get_uint<std::uint32_t>("min_leaf",
                                                cfg.tree.min_leaf);
  cfg.warmup = r.get_uint<std::uint32_t>("warmup", cfg.warmup);
  cfg.retrain_every = r.get_uint<std::uint32_t>("retrain_every",
                                                cfg.retrain_every);
  cfg.train_once = r.get_bool("train_once", cfg.train_once);
  cfg.ocsvm_max_train = r.get_uint<std::uint32_t>("ocsvm_max_train",
                                                  cfg.ocsvm_max_train);
  cfg.cds_max_per_class = r.get_uint<std::uint32_t>("cds_max_per_class",
                                                    cfg.cds_max_per_class);
  cfg.overprovision = r.get_uint<std::uint32_t>("overprovision",
                                                cfg.overprovision);
  cfg.threads = r.get_uint<unsigned>("threads", cfg.threads);
  r.finish();
  cfg.validate();
  return cfg;
}

struct RunConfig {
  std::optional<DatabaseFiles> database;
  std::optional<SyntheticSpec> synthetic;
  std::vector<double> levels = {0.95, 0.98, 0.99};
  std::vector<std::uint64_t> seeds = {1};
  double target = 0.0;  // 0 = highest level
  std::string out = "results";
  unsigned jobs = 1;
  bool dump_models = false;
  bool dump_rules = false;
  std::vector<std::pair<std::string, StrategyConfig>> strategies;

  double effective_target() const {
    if (target > 0.0) return target;
    return *std::max_element(levels.begin(), levels.end());
  }
};

inline RunConfig parse_run_config(const IniFile& file) {
  RunConfig cfg;

  const IniSection* database = file.find("database");
  const IniSection* synthetic = file.find("synthetic");
  require(database != nullptr || synthetic != nullptr, file.origin,
          ": need a [database] or [synthetic] section");
  require(database == nullptr || synthetic == nullptr, file.origin,
          ": [database] and [synthetic] are mutually exclusive");
  if (database != nullptr) {
    detail::SectionReader r(file, *database);
    DatabaseFiles files;
    files.tests_path = r.require_string("tests");
    files.coverage_path = r.require_string("coverage");
    files.model_path = r.require_string("model");
    r.finish();
    cfg.database = std::move(files);
  } else {
    cfg.synthetic = parse_synthetic_section(file, *synthetic);
  }

  if (const IniSection* run = file.find("run")) {
    detail::SectionReader r(file, *run);
    cfg.levels = r.get_double_list("levels", cfg.levels);
    cfg.seeds = r.get_uint_list("seeds", cfg.seeds);
    cfg.target = r.get_double("target", cfg.target);
    cfg.out = r.raw("out").value_or(cfg.out);
    cfg.jobs = r.get_uint<unsigned>("jobs", cfg.jobs);
    cfg.dump_models = r.get_bool("dump_models", cfg.dump_models);
    cfg.dump_rules = r.get_bool("dump_rules", cfg.dump_rules);
    r.finish();
  }

  require(!cfg.levels.empty(), file.origin, ": levels must not be empty");
  double prev = 0.0;
  for (const double level : cfg.levels) {
    require(level > 0.0 && level <= 1.0, file.origin,
            ": levels must be in (0, 1], got ", level);
    require(level > prev, file.origin,
            ": levels must be ascending and distinct");
    prev = level;
  }
  require(cfg.target == 0.0 || (cfg.target > 0.0 && cfg.target <= 1.0),
          file.origin, ": target must be in (0, 1]");
  require(!cfg.seeds.empty(), file.origin, ": seeds must not be empty");
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    for (std::size_t j = i + 1; j < cfg.seeds.size(); ++j)
      require(cfg.seeds[i] != cfg.seeds[j], file.origin, ": duplicate seed ",
              cfg.seeds[i]);

  for (const IniSection& section : file.sections) {
    if (section.name.rfind("strategy.", 0) != 0) {
      require(section.name == "database" || section.name == "synthetic" ||
                  section.name == "run",
              file.origin, ":", section.line, ": unknown section [",
              section.name, "]");
      continue;
    }
    const std::string label = section.name.substr(9);
    require(!label.empty(), file.origin, ":", section.line,
            ": strategy section needs a label: [strategy.<label>]");
    result_basename(label, 0);  // validates the label alphabet
    cfg.strategies.emplace_back(label,
                                parse_strategy_section(file, section));
  }
  require(!cfg.strategies.empty(), file.origin,
          ": no [strategy.<label>] sections");
  return cfg;
}

}  // namespace covsel
