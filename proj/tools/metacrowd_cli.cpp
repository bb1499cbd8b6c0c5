// Command-line front end: generate, run, sweep, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "metacrowd/metacrowd.hpp"

namespace {

using namespace metacrowd;

struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  for (const auto& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&opts, key](const std::string& v) { opts.overrides[key] = v; }, "override '" + key + "'");
  }
}

ExperimentConfig resolve(const ConfigOptions& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
  for (const auto& [key, value] : opts.overrides) apply_setting(cfg, key, value);
  cfg.validate();
  return cfg;
}

void print_summary(std::span<const RunResult> results) {
  std::cout << aggregate_csv(aggregate(results));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid meta-worker / crowd-worker annotation simulator"};
  app.require_subcommand(1);

  ConfigOptions gen_opts, run_opts, sweep_opts;
  std::string project_out = "project.txt";
  auto* gen = app.add_subcommand("generate", "write a synthetic project file");
  add_config_options(gen, gen_opts);
  gen->add_option("-o,--out", project_out, "project file to write");

  auto* run = app.add_subcommand("run", "run one experiment (all replications) and write reports");
  add_config_options(run, run_opts);

  auto* sw = app.add_subcommand("sweep", "run a theta or n_add grid and write reports with plots");
  add_config_options(sw, sweep_opts);

  std::string results_in;
  std::string report_out;
  auto* rep = app.add_subcommand("report", "re-render CSVs and plots from a stored results file");
  rep->add_option("-r,--results", results_in, "results.txt written by run or sweep")->required()->check(CLI::ExistingFile);
  rep->add_option("-o,--out", report_out, "output directory (defaults to the results file's directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto cfg = resolve(gen_opts);
      const auto project = generate_project(cfg.project);
      write_file(project_out, project_text(project, cfg));
      std::cout << "wrote " << project.tasks.size() << " tasks to " << project_out << "\n";
    } else if (*run) {
      auto cfg = resolve(run_opts);
      cfg.sweep.reset();
      const auto results = run_replications(cfg);
      const auto files = emit_report(results, cfg.output_path);
      print_summary(results);
      std::cout << "wrote " << files.runs.string() << "\n";
    } else if (*sw) {
      const auto cfg = resolve(sweep_opts);
      if (!cfg.sweep) throw ConfigurationError("sweep needs sweep.parameter and sweep.values");
      const auto results = sweep(cfg);
      const auto files = emit_report(results, cfg.output_path, cfg.sweep->parameter);
      print_summary(results);
      std::cout << "wrote " << files.runs.string() << "\n";
    } else if (*rep) {
      std::ifstream in(results_in);
      if (!in) throw IoError("cannot open " + results_in);
      const auto stored = parse_results_text(in);
      const std::filesystem::path out =
          report_out.empty() ? std::filesystem::path(results_in).parent_path() : std::filesystem::path(report_out);
      const auto files = emit_report(stored.runs, out.empty() ? "." : out, stored.sweep_parameter);
      print_summary(stored.runs);
      std::cout << "wrote " << files.aggregate.string() << "\n";
    }
  } catch (const metacrowd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
