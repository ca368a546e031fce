// Command line front-end: stage-by-stage execution of the safety-filter
// pipeline plus run comparison. Exit code 0 on success; failures print the
// stage-tagged cause and return nonzero.

#include "safefilter/harness/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using safefilter::harness::ExperimentConfig;

namespace {

ExperimentConfig load_config(const std::string& config_path, const std::string& run_dir) {
  if (!config_path.empty()) return ExperimentConfig::load(config_path);
  fs::path stored = fs::path(run_dir) / "config.json";
  if (!fs::exists(stored))
    throw std::runtime_error("no --config given and " + stored.string() + " does not exist");
  return ExperimentConfig::load(stored.string());
}

void prepare_dir(const ExperimentConfig& config, const std::string& run_dir) {
  fs::create_directories(run_dir);
  fs::path stored = fs::path(run_dir) / "config.json";
  if (!fs::exists(stored)) config.save(stored.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-based safety filters for stochastic systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir = "run";
  std::vector<std::string> compare_dirs;

  auto add_stage = [&](const std::string& name, const std::string& desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->add_option("-c,--config", config_path, "Experiment config (JSON)");
    cmd->add_option("-o,--out", run_dir, "Run directory")->required();
    return cmd;
  };

  CLI::App* cmd_pipeline = add_stage("run-pipeline", "Run every stage end to end");
  CLI::App* cmd_fit = add_stage("fit-model", "Collect warm-up data and fit the dynamics model");
  CLI::App* cmd_backup = add_stage("learn-backup", "Learn the robust backup policy");
  CLI::App* cmd_value = add_stage("solve-value", "Solve the pessimistic value of the backup");
  CLI::App* cmd_cert = add_stage("certify", "Compute the K-step safety certificate");
  CLI::App* cmd_roll = add_stage("rollout", "Run filtered episodes and write metrics");

  CLI::App* cmd_compare = app.add_subcommand("compare", "Summarize one or more run directories");
  cmd_compare->add_option("dirs", compare_dirs, "Run directories")->required();
  std::string compare_out;
  cmd_compare->add_option("-o,--out", compare_out, "Optional summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace safefilter::harness;
    if (cmd_pipeline->parsed()) {
      ExperimentConfig config = load_config(config_path, run_dir);
      PipelineResult result = run_pipeline(config, run_dir);
      std::cout << "pipeline complete: " << result.metrics.size() << " episodes";
      if (result.certified) std::cout << ", delta_fl = " << result.delta_fl;
      std::cout << "\n";
    } else if (cmd_fit->parsed()) {
      ExperimentConfig config = load_config(config_path, run_dir);
      prepare_dir(config, run_dir);
      stage_collect(config, run_dir);
      stage_fit_model(config, run_dir);
      std::cout << "model written to " << run_dir << "/model.json\n";
    } else if (cmd_backup->parsed()) {
      ExperimentConfig config = load_config(config_path, run_dir);
      prepare_dir(config, run_dir);
      stage_learn_backup(config, run_dir);
      std::cout << "backup policy written to " << run_dir << "/backup_policy.json\n";
    } else if (cmd_value->parsed()) {
      ExperimentConfig config = load_config(config_path, run_dir);
      prepare_dir(config, run_dir);
      stage_solve_value(config, run_dir);
      std::cout << "pessimistic value written to " << run_dir << "/vp_grid.json\n";
    } else if (cmd_cert->parsed()) {
      ExperimentConfig config = load_config(config_path, run_dir);
      prepare_dir(config, run_dir);
      stage_certify(config, run_dir);
      std::cout << "certificate written to " << run_dir << "/certificate.json\n";
    } else if (cmd_roll->parsed()) {
      ExperimentConfig config = load_config(config_path, run_dir);
      prepare_dir(config, run_dir);
      stage_episodes(config, run_dir);
      std::cout << "metrics written to " << run_dir << "/metrics.csv\n";
    } else if (cmd_compare->parsed()) {
      std::vector<fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
      auto rows = compare(dirs);
      std::cout << compare_table(rows);
      if (!compare_out.empty()) {
        std::ofstream out(compare_out);
        write_compare_csv(out, rows);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
