#pragma once

#include "safefilter/cert/certificate.hpp"
#include "safefilter/envs/environment.hpp"
#include "safefilter/harness/config.hpp"
#include "safefilter/model/calibrated.hpp"
#include "safefilter/model/ensemble.hpp"
#include "safefilter/model/replay_buffer.hpp"
#include "safefilter/objective/objective.hpp"
#include "safefilter/value/solver.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace safefilter::harness {

struct EpisodeMetrics {
  int episode = 0;
  double ret = 0.0;
  double cost = 0.0;
  int violations = 0;
  int interventions = 0;
  int infeasible_steps = 0;
  double mean_filter_distance = 0.0;
};

struct PipelineResult {
  std::filesystem::path dir;
  std::vector<EpisodeMetrics> metrics;
  double lambda = 0.0;
  double delta_fl = 1.0;
  double delta_total = 1.0;
  bool certified = false;
};

/// Builders shared by the pipeline stages and the CLI.
envs::Environment build_environment(const ExperimentConfig& config);
objective::SafetyObjective build_objective(const ExperimentConfig& config,
                                           const envs::Environment& env);
value::GridSpec build_grid(const ExperimentConfig& config, const envs::Environment& env);
value::NoiseQuadrature build_quadrature(const ExperimentConfig& config,
                                        const envs::Environment& env);
value::EtaSearchOptions build_eta_options(const ExperimentConfig& config);

/// Receding-horizon CEM planner on the model mean, maximizing the known
/// reward. This is the reward-seeking, safety-ignorant nominal policy.
PolicyFn make_nominal_planner(const ExperimentConfig& config, const envs::Environment& env,
                              const model::CalibratedModel& model, std::uint64_t seed);

/// Individually runnable stages. Each reads earlier artifacts from `dir` and
/// writes its own; run_pipeline chains them and fails with the stage name on
/// error, keeping partial artifacts.
void stage_collect(const ExperimentConfig& config, const std::filesystem::path& dir);
void stage_fit_model(const ExperimentConfig& config, const std::filesystem::path& dir);
void stage_learn_backup(const ExperimentConfig& config, const std::filesystem::path& dir);
void stage_solve_value(const ExperimentConfig& config, const std::filesystem::path& dir);
void stage_certify(const ExperimentConfig& config, const std::filesystem::path& dir);
void stage_episodes(const ExperimentConfig& config, const std::filesystem::path& dir);

PipelineResult run_pipeline(const ExperimentConfig& config, const std::filesystem::path& dir);

struct CompareRow {
  std::string run;
  double mean_return = 0.0;
  double mean_cost = 0.0;
  int total_violations = 0;
  int episodes = 0;
};

/// Aligned per-run summary from metrics.csv files. Throws a named error when
/// a run directory has no metrics file.
std::vector<CompareRow> compare(const std::vector<std::filesystem::path>& run_dirs);
std::string compare_table(const std::vector<CompareRow>& rows);
void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows);

std::vector<EpisodeMetrics> read_metrics_csv(const std::filesystem::path& file);

}  // namespace safefilter::harness
