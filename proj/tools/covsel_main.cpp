// covsel: coverage-directed test selection toolkit.
//
//   covsel gen     --config c.ini --out db/          generate a database
//   covsel run     --config c.ini [--out results/]   run strategies
//   covsel compare --results results/ --baseline random
//
// Diagnostics go to stderr (level via COVSEL_LOG); data goes to files.
// Exit code 0 means no error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "covsel/covsel.hpp"

namespace {

using namespace covsel;

std::vector<double> parse_levels_arg(const std::string& text) {
  std::vector<double> out;
  for (const auto part : covsel::detail::split_fields(text))
    out.push_back(covsel::detail::parse_double(part, "--levels", 0, "level"));
  return out;
}

void apply_defines(IniFile& ini, const std::vector<std::string>& defines) {
  for (const std::string& d : defines) {
    const auto eq = d.find('=');
    require(eq != std::string::npos && eq > 0, "--set needs section.key=value, got '",
            d, "'");
    ini.apply_override(std::string_view(d).substr(0, eq),
                       std::string_view(d).substr(eq + 1));
  }
}

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed,
            const std::vector<std::string>& defines) {
  IniFile ini = IniFile::parse_file(config_path);
  apply_defines(ini, defines);
  if (seed) ini.apply_override("synthetic.seed", std::to_string(*seed));
  const IniSection* section = ini.find("synthetic");
  require(section != nullptr, config_path,
          ": gen needs a [synthetic] section");
  const SyntheticSpec spec = parse_synthetic_section(ini, *section);

  log_info("gen: ", spec.n_tests, " tests, ", spec.dimension(), " fields, ",
           spec.n_points, " points, ", spec.n_groups, " groups, seed ",
           spec.seed);
  const SyntheticResult result = generate_synthetic(spec);
  save_database(result.db, database_files(out_dir));
  write_text_file(
      (std::filesystem::path(out_dir) / "reachability.txt").string(),
      render_reachability(result.report));
  log_info("gen: wrote database to ", out_dir, " (", result.report.reachable,
           " of ", result.report.points, " points reachable)");
  return 0;
}

int cmd_run(const std::string& config_path,
            const std::optional<std::uint64_t>& seed,
            const std::optional<unsigned>& jobs,
            const std::optional<std::string>& out,
            const std::optional<std::string>& levels,
            const std::vector<std::string>& defines) {
  IniFile ini = IniFile::parse_file(config_path);
  apply_defines(ini, defines);
  RunConfig run = parse_run_config(ini);
  if (seed) run.seeds = {*seed};
  if (jobs) run.jobs = *jobs;
  if (out) run.out = *out;
  if (levels) {
    run.levels = parse_levels_arg(*levels);
    require(!run.levels.empty(), "--levels must not be empty");
  }

  TestDatabase db;
  if (run.database) {
    db = load_database(*run.database);
    log_info("run: loaded ", db.size(), " tests, ", db.model.point_count,
             " points");
  } else {
    SyntheticResult generated = generate_synthetic(*run.synthetic);
    db = std::move(generated.db);
    log_info("run: generated ", db.size(), " tests, ", db.model.point_count,
             " points (", generated.report.reachable, " reachable)");
  }

  struct RunSpec {
    std::string label;
    StrategyConfig cfg;
  };
  std::vector<RunSpec> specs;
  for (const auto& [label, strategy] : run.strategies) {
    for (const std::uint64_t s : run.seeds) {
      StrategyConfig cfg = strategy;
      cfg.seed = s;
      specs.push_back(RunSpec{label, std::move(cfg)});
    }
  }

  const double target = run.effective_target();
  parallel_for(specs.size(), run.jobs, [&](std::size_t i) {
    const RunSpec& spec = specs[i];
    ModelSet models;
    const ExperimentResult result = run_experiment(
        db, spec.label, spec.cfg, run.levels, target, &models);
    write_result(result, run.out);
    const std::string stem = result_basename(spec.label, spec.cfg.seed);
    if (run.dump_models && models.novelty)
      write_text_file(
          (std::filesystem::path(run.out) / (stem + ".model.txt")).string(),
          render_model_dump(*models.novelty));
    if (run.dump_rules && !models.classifiers.empty()) {
      std::string rules;
      for (const GroupClassifier& clf : models.classifiers)
        rules += render_group_rules(clf);
      write_text_file(
          (std::filesystem::path(run.out) / (stem + ".rules.txt")).string(),
          rules);
    }
    log_info("run: ", spec.label, " seed ", spec.cfg.seed, ": ",
             result.simulated, " tests to coverage ",
             format_fixed(result.final_coverage, 4), " in ",
             format_fixed(result.runtime_seconds, 1), "s");
  });
  log_info("run: wrote ", specs.size(), " result(s) to ", run.out);
  return 0;
}

int cmd_compare(const std::string& results_dir, const std::string& baseline,
                const std::optional<std::string>& out,
                const std::string& levels_text) {
  const std::vector<double> levels = parse_levels_arg(levels_text);
  const std::vector<LoadedResult> results = load_results_dir(results_dir);
  const Comparison cmp = compare(results, baseline, levels);
  const std::string out_dir =
      out.value_or((std::filesystem::path(results_dir) / "report").string());
  emit_report(cmp, results, out_dir);
  log_info("compare: wrote report to ", out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coverage-directed test selection toolkit"};
  app.set_version_flag("--version", std::string(covsel::version));
  app.require_subcommand(1);

  std::string config_path, out_dir, results_dir, baseline;
  std::string levels_text = "0.95,0.98,0.99";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out_opt, levels_opt;
  std::vector<std::string> defines;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic database");
  gen->add_option("--config", config_path, "Config file with a [synthetic] section")
      ->required();
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Override the generator seed");
  gen->add_option("--set", defines,
                  "Override a config value: section.key=value");

  CLI::App* run = app.add_subcommand("run", "Run selection strategies");
  run->add_option("--config", config_path, "Run config file")->required();
  run->add_option("--seed", seed, "Run a single seed instead of the config list");
  run->add_option("--jobs", jobs, "Concurrent (strategy, seed) runs");
  run->add_option("--out", out_opt, "Result directory");
  run->add_option("--levels", levels_opt, "Comma-separated coverage levels");
  run->add_option("--set", defines,
                  "Override a config value: section.key=value");

  CLI::App* cmp = app.add_subcommand("compare", "Compare result directories");
  cmp->add_option("--results", results_dir, "Directory of run results")
      ->required();
  cmp->add_option("--baseline", baseline, "Baseline strategy label")
      ->required();
  cmp->add_option("--out", out_opt, "Report directory (default <results>/report)");
  cmp->add_option("--levels", levels_text, "Comma-separated coverage levels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir, seed, defines);
    if (run->parsed())
      return cmd_run(config_path, seed, jobs, out_opt, levels_opt, defines);
    if (cmp->parsed())
      return cmd_compare(results_dir, baseline, out_opt, levels_text);
  } catch (const std::exception& e) {
    std::cerr << "covsel: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
