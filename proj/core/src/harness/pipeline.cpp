#include "safefilter/harness/pipeline.hpp"

#include "safefilter/backup/parametric.hpp"
#include "safefilter/backup/robust_vi.hpp"
#include "safefilter/envs/double_integrator.hpp"
#include "safefilter/envs/pitch.hpp"
#include "safefilter/filter/filter.hpp"
#include "safefilter/harness/csv.hpp"
#include "safefilter/model/checkpoint.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace safefilter::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

[[noreturn]] void stage_error(const std::string& stage, const std::exception& e) {
  throw std::runtime_error("stage " + stage + ": " + e.what());
}

Vec default_sigma_floor(const ExperimentConfig& config, const envs::Environment& env) {
  if (!config.model.sigma_floor.empty()) {
    require(static_cast<int>(config.model.sigma_floor.size()) == env.state_dim(),
            "config: sigma_floor length must match the state dimension");
    Vec s(env.state_dim());
    for (int i = 0; i < env.state_dim(); ++i) s[i] = config.model.sigma_floor[i];
    return s;
  }
  if (env.name == "pitch") {
    Vec s(3);
    s << 2e-4, 5e-5, 2e-4;
    return s;
  }
  return Vec::Constant(env.state_dim(), 1e-3);
}

std::unique_ptr<model::CalibratedModel> make_model(const ExperimentConfig& config,
                                                   const envs::Environment& env,
                                                   const fs::path& dir) {
  if (config.model.type == "oracle") {
    Vec floor = default_sigma_floor(config, env);
    model::OraclePerturbedModel::BiasFn bias;
    if (config.model.bias_fraction > 0.0)
      bias = model::OraclePerturbedModel::sinusoid_bias(config.model.bias_fraction *
                                                        config.model.beta * floor);
    return std::make_unique<model::OraclePerturbedModel>(env.drift, floor, config.model.beta,
                                                         bias);
  }
  return std::make_unique<model::EnsembleModel>(
      model::load_ensemble(read_file(dir / "model.json")));
}

PolicyFn load_backup_policy(const envs::Environment& env, const fs::path& dir) {
  std::string text = read_file(dir / "backup_policy.json");
  json j = json::parse(text);
  if (j.value("kind", "") == "tabular_policy") {
    auto policy = std::make_shared<backup::TabularPolicy>(model::load_tabular_policy(text));
    return [policy](const Vec& x) { return (*policy)(x); };
  }
  auto policy = std::make_shared<backup::ParametricPolicy>(model::load_parametric_policy(text));
  (void)env;
  return [policy](const Vec& x) { return (*policy)(x); };
}

filter::FilterConfig build_filter_config(const ExperimentConfig& config) {
  filter::FilterConfig fc;
  fc.xi = config.xi();
  fc.cem_particles = config.filter.particles;
  fc.cem_iterations = config.filter.iterations;
  fc.cem_elite_fraction = config.filter.elite_fraction;
  fc.cem_init_std_frac = config.filter.init_std_frac;
  return fc;
}

class StageTimer {
 public:
  explicit StageTimer(const fs::path& dir) : file_(dir / "timings.csv") {
    if (!fs::exists(file_)) write_file(file_, "stage,seconds\n");
  }
  template <typename F>
  void run(const std::string& stage, F&& f) {
    auto start = std::chrono::steady_clock::now();
    try {
      f();
    } catch (const std::exception& e) {
      stage_error(stage, e);
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream out(file_, std::ios::app);
    out << stage << ',' << format_double(seconds) << '\n';
  }

 private:
  fs::path file_;
};

void write_metrics_csv(const fs::path& file, const std::vector<EpisodeMetrics>& rows) {
  std::ostringstream out;
  out << "episode,return,cost,violations,interventions,infeasible_steps,mean_filter_distance\n";
  for (const EpisodeMetrics& m : rows) {
    out << m.episode << ',' << format_double(m.ret) << ',' << format_double(m.cost) << ','
        << m.violations << ',' << m.interventions << ',' << m.infeasible_steps << ','
        << format_double(m.mean_filter_distance) << '\n';
  }
  write_file(file, out.str());
}

}  // namespace

envs::Environment build_environment(const ExperimentConfig& config) {
  if (config.env.name == "pitch") {
    envs::PitchParams params;
    if (config.env.dt) params.dt = *config.env.dt;
    if (config.env.noise_std) params.noise_std = *config.env.noise_std;
    if (config.env.action_limit) params.action_limit = *config.env.action_limit;
    params.reward_u_sign = config.env.reward_u_sign;
    params.init_jitter_std = config.env.init_jitter_std;
    return envs::make_pitch_env(params);
  }
  envs::DoubleIntegratorParams params;
  if (config.env.dt) params.dt = *config.env.dt;
  if (config.env.noise_std) params.noise_std = *config.env.noise_std;
  if (config.env.action_limit) params.accel_limit = *config.env.action_limit;
  params.position_limit = config.env.position_limit;
  envs::Environment env = envs::make_double_integrator_env(params);
  env.init_jitter_std = config.env.init_jitter_std;
  return env;
}

objective::SafetyObjective build_objective(const ExperimentConfig& config,
                                           const envs::Environment& env) {
  objective::ImmediateCost cost;
  auto safe = env.safe;
  if (config.objective.cost == "indicator") {
    cost = objective::indicator_cost(safe);
  } else {
    std::function<double(const Vec&)> sd;
    if (env.name == "pitch") {
      sd = envs::pitch_signed_distance(config.objective.momentum_coeff,
                                       config.objective.alpha_coeff);
    } else {
      double limit = config.env.position_limit;
      sd = [limit](const Vec& x) { return std::abs(x[0]) - limit; };
    }
    cost = objective::margin_cost(safe, sd, config.objective.slope);
  }
  return objective::make_objective(std::move(cost), config.objective.gamma,
                                   config.objective.xi_fraction, config.objective.xi_absolute);
}

value::GridSpec build_grid(const ExperimentConfig& config, const envs::Environment& env) {
  if (!config.grid.lower.empty()) {
    Vec lo(static_cast<Eigen::Index>(config.grid.lower.size()));
    Vec hi(static_cast<Eigen::Index>(config.grid.upper.size()));
    for (std::size_t i = 0; i < config.grid.lower.size(); ++i) {
      lo[static_cast<Eigen::Index>(i)] = config.grid.lower[i];
      hi[static_cast<Eigen::Index>(i)] = config.grid.upper[i];
    }
    return value::GridSpec(lo, hi, config.grid.points);
  }
  if (env.name == "pitch") {
    Vec lo(3), hi(3);
    lo << -0.35, -0.035, -0.45;
    hi << 0.35, 0.035, 0.1;
    return value::GridSpec(lo, hi, {11, 11, 15});
  }
  Vec lo(2), hi(2);
  lo << -1.6, -1.6;
  hi << 1.6, 1.6;
  return value::GridSpec(lo, hi, {33, 33});
}

value::NoiseQuadrature build_quadrature(const ExperimentConfig& config,
                                        const envs::Environment& env) {
  return value::NoiseQuadrature::for_noise(env.noise, config.value.gh_points,
                                           config.value.mc_noise_samples);
}

value::EtaSearchOptions build_eta_options(const ExperimentConfig& config) {
  value::EtaSearchOptions opts;
  opts.mode = value::EtaSearchOptions::Mode::Grid3;
  opts.refine = config.value.eta_refine;
  opts.refine_points = config.value.eta_refine_points;
  return opts;
}

PolicyFn make_nominal_planner(const ExperimentConfig& config, const envs::Environment& env,
                              const model::CalibratedModel& model, std::uint64_t seed) {
  const int horizon = config.planner.horizon;
  const int du = env.action_dim();
  Vec seq_lo(horizon * du), seq_hi(horizon * du);
  for (int k = 0; k < horizon; ++k) {
    seq_lo.segment(k * du, du) = env.action_box.lower;
    seq_hi.segment(k * du, du) = env.action_box.upper;
  }
  auto seq_box = std::make_shared<Box>(seq_lo, seq_hi);
  auto plan = std::make_shared<Vec>(Vec::Zero(horizon * du));
  auto rng = std::make_shared<RandomSource>(seed, 40000);

  backup::CemOptions cem;
  cem.particles = config.planner.particles;
  cem.iterations = config.planner.iterations;
  cem.elite_fraction = config.planner.elite_fraction;

  Vec init_std = config.planner.init_std_frac * (seq_hi - seq_lo);
  double gamma = config.objective.gamma;
  auto reward = env.reward;

  return [=, &model](const Vec& x) -> Vec {
    auto score = [&](const Vec& seq) {
      Vec state = x;
      double total = 0.0;
      double g = 1.0;
      for (int k = 0; k < horizon; ++k) {
        Vec u = seq.segment(k * du, du);
        total += g * reward(state, u);
        state = model.mean(state, u);
        g *= gamma;
      }
      return total;
    };
    // Warm start: previous plan shifted one step.
    Vec init = *plan;
    if (horizon > 1) {
      init.head((horizon - 1) * du) = plan->tail((horizon - 1) * du);
      init.tail(du) = plan->tail(du);
    }
    backup::CemResult result = backup::cem_optimize(score, init, init_std, cem, *rng,
                                                    seq_box.get());
    *plan = result.best;
    return result.best.head(du);
  };
}

void stage_collect(const ExperimentConfig& config, const fs::path& dir) {
  envs::Environment env = build_environment(config);
  model::ReplayBuffer buffer(config.model.buffer_capacity);
  for (int e = 0; e < config.episodes.warmup; ++e) {
    RandomSource rng(config.seed, 10000 + static_cast<std::uint64_t>(e));
    Vec x = envs::initial_state(env, rng);
    for (int k = 0; k < config.episodes.horizon; ++k) {
      Vec u = env.action_box.sample(rng);
      Vec xp = envs::step(env, x, u, rng);
      buffer.push({x, u, xp});
      x = xp;
    }
  }
  std::ostringstream out;
  buffer.write_csv(out);
  write_file(dir / "buffer.csv", out.str());
}

void stage_fit_model(const ExperimentConfig& config, const fs::path& dir) {
  envs::Environment env = build_environment(config);
  if (config.model.type == "oracle") {
    json j;
    j["format"] = "safefilter-checkpoint";
    j["version"] = 1;
    j["kind"] = "oracle";
    j["note"] = "model reconstructed from config; calibrated by construction";
    write_file(dir / "model.json", j.dump(2) + "\n");
    return;
  }
  std::ifstream in(dir / "buffer.csv");
  if (!in) throw std::runtime_error("missing buffer.csv (run the collect stage first)");
  model::ReplayBuffer buffer = model::ReplayBuffer::read_csv(in, config.model.buffer_capacity);
  if (buffer.empty()) throw std::runtime_error("empty replay buffer");

  // Hold out a slice for beta fitting before training.
  std::vector<model::Transition> holdout;
  model::ReplayBuffer train(config.model.buffer_capacity);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    if (i % 5 == 4)
      holdout.push_back(buffer.at(i));
    else
      train.push(buffer.at(i));
  }

  RandomSource rng(config.seed, 20000);
  model::EnsembleParams params;
  params.members = config.model.members;
  params.hidden_layers = config.model.hidden_layers;
  params.hidden_width = config.model.hidden_width;
  params.beta = config.model.beta;
  params.sigma_floor = config.model.ensemble_sigma_floor;
  model::EnsembleModel ensemble(env.state_dim(), env.action_dim(), params, rng);
  model::TrainReport report = ensemble.fit(train, config.model.pretrain_iters, config.model.lr,
                                           config.model.weight_decay, rng);

  double beta = model::fit_beta(ensemble, holdout,
                                config.model.beta_from_truth ? env.drift : nullptr,
                                config.model.beta_quantile);
  ensemble.set_beta(beta);
  write_file(dir / "model.json", model::save_ensemble(ensemble));

  std::ostringstream losses;
  losses << "epoch";
  for (std::size_t m = 0; m < report.member_losses.size(); ++m) losses << ",member_" << m;
  losses << '\n';
  for (std::size_t e = 0; e < report.member_losses.front().size(); ++e) {
    losses << e;
    for (const auto& curve : report.member_losses) losses << ',' << format_double(curve[e]);
    losses << '\n';
  }
  write_file(dir / "training_losses.csv", losses.str());
}

void stage_learn_backup(const ExperimentConfig& config, const fs::path& dir) {
  envs::Environment env = build_environment(config);
  auto model = make_model(config, env, dir);
  objective::SafetyObjective obj = build_objective(config, env);
  value::GridSpec grid = build_grid(config, env);
  value::NoiseQuadrature quad = build_quadrature(config, env);

  if (config.backup.method == "robust_vi") {
    backup::RobustViOptions opts;
    opts.solve.tol = config.value.tol;
    opts.solve.max_sweeps = config.value.max_sweeps;
    opts.eta = build_eta_options(config);
    opts.eta.refine = false;  // refinement applies in the final verification pass
    opts.action_points_per_dim = config.backup.action_points;
    backup::RobustViResult result =
        backup::robust_value_iteration(*model, obj.cost, obj.gamma, grid, env.action_box, quad,
                                       opts);
    write_file(dir / "backup_policy.json", model::save_tabular_policy(result.policy));
    write_file(dir / "backup_value.json", model::save_value_grid(result.value));
    return;
  }

  backup::ParametricPolicy policy_proto(env.state_dim(), env.action_box);
  backup::ParametricPolicy eta_proto(env.state_dim(), Box::unit(env.state_dim()));
  backup::MinimaxCemOptions opts;
  opts.cem.particles = config.backup.cem_population;
  opts.cem.elite_fraction = config.backup.cem_elite_fraction;
  opts.policy_steps = config.backup.cem_policy_steps;
  opts.adversary_steps = config.backup.cem_adversary_steps;
  opts.outer_rounds = config.backup.cem_outer_rounds;
  opts.horizon = config.backup.cem_horizon;
  opts.rollouts_per_eval = config.backup.cem_rollouts;
  RandomSource rng(config.seed, 30000);
  envs::Environment env_copy = env;
  auto x0_sampler = [env_copy](RandomSource& r) { return envs::initial_state(env_copy, r); };
  backup::MinimaxCemResult result = backup::cem_minimax_policy(
      *model, obj.cost, obj.gamma, x0_sampler, env.noise, policy_proto, eta_proto, opts, rng);
  write_file(dir / "backup_policy.json", model::save_parametric_policy(result.policy));
}

void stage_solve_value(const ExperimentConfig& config, const fs::path& dir) {
  envs::Environment env = build_environment(config);
  auto model = make_model(config, env, dir);
  objective::SafetyObjective obj = build_objective(config, env);
  value::GridSpec grid = build_grid(config, env);
  value::NoiseQuadrature quad = build_quadrature(config, env);
  PolicyFn pi_safe = load_backup_policy(env, dir);

  std::vector<double> warm;
  const std::vector<double>* warm_ptr = nullptr;
  if (fs::exists(dir / "backup_value.json")) {
    warm = model::load_value_grid(read_file(dir / "backup_value.json")).values();
    warm_ptr = &warm;
  }

  value::SolveOptions opts;
  opts.tol = config.value.tol;
  opts.max_sweeps = config.value.max_sweeps;
  value::SolveStats stats;
  value::GridValueFunction vp =
      value::pessimistic_value_grid(*model, pi_safe, obj.cost.c, obj.gamma, grid, quad,
                                    build_eta_options(config), opts, &stats, warm_ptr);
  write_file(dir / "vp_grid.json", model::save_value_grid(vp));
  std::ostringstream csv;
  vp.write_csv(csv);
  write_file(dir / "vp_grid.csv", csv.str());
}

void stage_certify(const ExperimentConfig& config, const fs::path& dir) {
  envs::Environment env = build_environment(config);
  auto model = make_model(config, env, dir);
  objective::SafetyObjective obj = build_objective(config, env);
  value::NoiseQuadrature quad = build_quadrature(config, env);
  PolicyFn pi_safe = load_backup_policy(env, dir);
  value::GridValueFunction vp = model::load_value_grid(read_file(dir / "vp_grid.json"));

  std::vector<double> worst = value::worst_case_next_values(vp, *model, pi_safe, quad,
                                                            build_eta_options(config));
  {
    // Audit artifact: per-node value and worst-case expected next value.
    std::ostringstream out;
    std::vector<std::string> header;
    for (int d = 0; d < env.state_dim(); ++d) header.push_back("x_" + std::to_string(d));
    header.push_back("vp");
    header.push_back("worst_next");
    out << join_csv_row(header);
    for (std::size_t i = 0; i < worst.size(); ++i) {
      Vec x = vp.grid().node(i);
      std::vector<std::string> row;
      for (int d = 0; d < env.state_dim(); ++d) row.push_back(format_double(x[d]));
      row.push_back(format_double(vp.values()[i]));
      row.push_back(format_double(worst[i]));
      out << join_csv_row(row);
    }
    write_file(dir / "worst_case.csv", out.str());
  }
  double c_min_bound = config.objective.c_min_mode == "grid" ? vp.min_value() : obj.c_min_bound;
  double band = std::max(1e-9, config.cert.drift_band * (obj.xi - c_min_bound));
  value::DriftResult drift =
      value::check_drift(vp, worst, env.safe, c_min_bound, obj.xi_bar, band);

  // One-step drift slack over the certified region: the largest measured
  // excess of the worst-case expected next value over the current one. Feeds
  // the supermartingale route of the certificate, which stays valid even
  // when no positive linear drift rate exists (e.g. grid-edge artifacts).
  double drift_slack = 0.0;
  int slack_nodes = 0;
  for (std::size_t i = 0; i < worst.size(); ++i) {
    Vec x = vp.grid().node(i);
    if (!env.safe(x)) continue;
    double vi = vp.values()[i];
    if (vi >= obj.xi_bar) continue;
    if (worst[i] > vi) {
      ++slack_nodes;
      drift_slack = std::max(drift_slack, worst[i] - vi);
    }
  }

  cert::BoundVariant variant = config.cert.variant == "printed" ? cert::BoundVariant::Printed
                                                                : cert::BoundVariant::Derived;
  bool ladder_valid = drift.holds && !drift.degenerate;
  cert::CertificateReport report;
  if (ladder_valid) {
    value::CertInput input = value::certify_policy(vp, worst, obj.xi, obj.xi_bar, drift);
    report = cert::best_certificate(input.lambda, input.xi, input.xi_bar, input.v_min,
                                    input.v_max, config.cert.horizon, config.cert.delta_f,
                                    config.cert.vartheta_grid, variant, drift_slack);
    if (auto bad = cert::verify_ladder_on_grid(report.ladder, vp.values(), worst))
      throw std::runtime_error("ladder verification failed at level " + std::to_string(*bad));
  } else {
    // No positive linear drift rate over the region: the level ladder cannot
    // be built, but the supermartingale route still certifies from the
    // measured slack alone.
    report.horizon = config.cert.horizon;
    report.delta_matrix = 1.0;
    report.delta_ville = cert::supermartingale_escape_bound(obj.xi, obj.xi_bar, c_min_bound,
                                                            config.cert.horizon, drift_slack);
    report.delta_fl = report.delta_ville;
    report.delta_f = config.cert.delta_f;
    report.delta_total =
        report.delta_fl + report.delta_f - report.delta_fl * report.delta_f;
    report.ladder.xi = obj.xi;
    report.ladder.xi_bar = obj.xi_bar;
    report.ladder.v_min = c_min_bound;
    report.ladder.v_max = vp.max_value();
    report.ladder.variant = variant;
  }

  // Start-state admission: the certificate covers states whose worst-case
  // expected next value is below xi.
  RandomSource rng0(config.seed, 60000);
  Vec x0 = envs::initial_state(env, rng0);
  double w0 = value::worst_case_next_value(vp, *model, x0, pi_safe(x0), quad,
                                           build_eta_options(config), nullptr);

  if (config.cert.mc_rollouts > 0) {
    RandomSource rng(config.seed, 70000);
    auto value_fn = [&vp](const Vec& x) { return vp(x); };
    report.mc_crosscheck = cert::mc_delta_estimate(env.step_fn(), pi_safe, value_fn, obj.xi_bar,
                                                   {x0}, config.cert.horizon,
                                                   config.cert.mc_rollouts, rng);
  }

  json extra = json::parse(report.to_json());
  extra["ladder_valid"] = ladder_valid;
  extra["drift"] = {{"lambda", drift.degenerate ? 0.0 : drift.lambda_max},
                    {"holds", drift.holds},
                    {"checked_nodes", drift.checked},
                    {"excluded_nodes", drift.excluded},
                    {"slack_nodes", slack_nodes},
                    {"drift_slack", drift_slack},
                    {"c_min_bound", c_min_bound}};
  extra["start_state"] = {{"worst_case", w0}, {"certified", w0 <= obj.xi}};
  extra["seed"] = config.seed;
  write_file(dir / "certificate.json", extra.dump(2) + "\n");
}

void stage_episodes(const ExperimentConfig& config, const fs::path& dir) {
  envs::Environment env = build_environment(config);
  auto model = make_model(config, env, dir);
  objective::SafetyObjective obj = build_objective(config, env);
  value::NoiseQuadrature quad = build_quadrature(config, env);

  PolicyFn pi_safe;
  std::optional<value::GridValueFunction> vp;
  filter::FilterConfig fc = build_filter_config(config);
  if (config.filter.enabled) {
    pi_safe = load_backup_policy(env, dir);
    vp = model::load_value_grid(read_file(dir / "vp_grid.json"));
    fc.validate(obj.xi_bar);
  }

  // Replay buffer for per-episode refits (ensemble models only).
  model::EnsembleModel* ensemble = dynamic_cast<model::EnsembleModel*>(model.get());
  model::ReplayBuffer buffer(config.model.buffer_capacity);
  if (ensemble && fs::exists(dir / "buffer.csv")) {
    std::ifstream in(dir / "buffer.csv");
    buffer = model::ReplayBuffer::read_csv(in, config.model.buffer_capacity);
  }

  std::vector<EpisodeMetrics> metrics;
  std::ostringstream diagnostics;
  bool diag_header_written = false;

  for (int e = 0; e < config.episodes.count; ++e) {
    PolicyFn nominal = make_nominal_planner(config, env, *model,
                                            config.seed ^ (0x9e3779b9ULL + e));
    RandomSource rng(config.seed, 50000 + static_cast<std::uint64_t>(e));

    EpisodeMetrics m;
    m.episode = e;
    if (config.filter.enabled) {
      std::ostringstream episode_diag;
      filter::RolloutMetrics rm =
          filter::rollout_filtered(env, nominal, pi_safe, *vp, *model, obj.cost, obj.gamma, fc,
                                   quad, config.episodes.horizon, rng,
                                   diag_header_written ? nullptr : &episode_diag);
      if (!diag_header_written) {
        diagnostics << episode_diag.str();
        diag_header_written = true;
      }
      m.ret = rm.discounted_return;
      m.cost = rm.discounted_cost;
      m.violations = rm.violation_count;
      m.interventions = rm.intervention_count;
      m.infeasible_steps = rm.infeasible_count;
      m.mean_filter_distance =
          config.episodes.horizon > 0 ? rm.total_filter_distance / config.episodes.horizon : 0.0;
      if (ensemble)
        for (std::size_t k = 0; k < rm.trajectory.actions.size(); ++k)
          buffer.push({rm.trajectory.states[k], rm.trajectory.actions[k],
                       rm.trajectory.states[k + 1]});
    } else {
      Vec x = envs::initial_state(env, rng);
      double g = 1.0;
      for (int k = 0; k < config.episodes.horizon; ++k) {
        if (!envs::safe_indicator(env, x)) ++m.violations;
        m.cost += g * obj.cost.c(x);
        Vec u = nominal(x);
        m.ret += g * env.reward(x, u);
        Vec xp = envs::step(env, x, u, rng);
        if (ensemble) buffer.push({x, u, xp});
        x = xp;
        g *= obj.gamma;
      }
      if (!envs::safe_indicator(env, x)) ++m.violations;
      m.cost += g * obj.cost.c(x);
    }
    metrics.push_back(m);

    if (ensemble && config.model.refit_iters > 0) {
      RandomSource fit_rng(config.seed, 80000 + static_cast<std::uint64_t>(e));
      ensemble->fit(buffer, config.model.refit_iters, config.model.lr,
                    config.model.weight_decay, fit_rng);
    }
  }

  write_metrics_csv(dir / "metrics.csv", metrics);
  if (diag_header_written) write_file(dir / "diagnostics.csv", diagnostics.str());
  if (ensemble) write_file(dir / "model.json", model::save_ensemble(*ensemble));

  json summary;
  summary["seed"] = config.seed;
  summary["episodes"] = static_cast<int>(metrics.size());
  double ret = 0.0, cost = 0.0;
  int violations = 0, interventions = 0;
  for (const EpisodeMetrics& m : metrics) {
    ret += m.ret;
    cost += m.cost;
    violations += m.violations;
    interventions += m.interventions;
  }
  summary["mean_return"] = metrics.empty() ? 0.0 : ret / metrics.size();
  summary["mean_cost"] = metrics.empty() ? 0.0 : cost / metrics.size();
  summary["total_violations"] = violations;
  summary["total_interventions"] = interventions;
  summary["env_clamp_count"] = *env.clamp_count;
  write_file(dir / "summary.json", summary.dump(2) + "\n");
}

PipelineResult run_pipeline(const ExperimentConfig& config, const fs::path& dir) {
  config.validate();
  fs::create_directories(dir);
  write_file(dir / "config.json", config.to_json_text() + "\n");
  StageTimer timer(dir);

  timer.run("collect", [&] { stage_collect(config, dir); });
  timer.run("fit-model", [&] { stage_fit_model(config, dir); });
  if (config.filter.enabled) {
    timer.run("learn-backup", [&] { stage_learn_backup(config, dir); });
    timer.run("solve-value", [&] { stage_solve_value(config, dir); });
    if (config.cert.enabled) timer.run("certify", [&] { stage_certify(config, dir); });
  }
  timer.run("episodes", [&] { stage_episodes(config, dir); });

  PipelineResult result;
  result.dir = dir;
  result.metrics = read_metrics_csv(dir / "metrics.csv");
  if (config.filter.enabled && config.cert.enabled && fs::exists(dir / "certificate.json")) {
    json cert = json::parse(read_file(dir / "certificate.json"));
    result.lambda = cert["drift"]["lambda"].get<double>();
    result.delta_fl = cert["delta_fl"].get<double>();
    result.delta_total = cert["delta_total"].get<double>();
    result.certified = true;
  }
  return result;
}

std::vector<EpisodeMetrics> read_metrics_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("missing metrics file: " + file.string());
  std::vector<EpisodeMetrics> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_row(line);
    require(f.size() == 7, "metrics.csv: bad row");
    EpisodeMetrics m;
    m.episode = std::stoi(f[0]);
    m.ret = std::stod(f[1]);
    m.cost = std::stod(f[2]);
    m.violations = std::stoi(f[3]);
    m.interventions = std::stoi(f[4]);
    m.infeasible_steps = std::stoi(f[5]);
    m.mean_filter_distance = std::stod(f[6]);
    rows.push_back(m);
  }
  return rows;
}

std::vector<CompareRow> compare(const std::vector<fs::path>& run_dirs) {
  require(!run_dirs.empty(), "compare: need at least one run directory");
  std::vector<CompareRow> rows;
  for (const fs::path& dir : run_dirs) {
    auto metrics = read_metrics_csv(dir / "metrics.csv");
    CompareRow row;
    row.run = dir.filename().string().empty() ? dir.string() : dir.filename().string();
    row.episodes = static_cast<int>(metrics.size());
    for (const EpisodeMetrics& m : metrics) {
      row.mean_return += m.ret;
      row.mean_cost += m.cost;
      row.total_violations += m.violations;
    }
    if (!metrics.empty()) {
      row.mean_return /= metrics.size();
      row.mean_cost /= metrics.size();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "run" << std::right << std::setw(14) << "mean_return"
      << std::setw(14) << "mean_cost" << std::setw(12) << "violations" << std::setw(10)
      << "episodes" << '\n';
  for (const CompareRow& r : rows) {
    out << std::left << std::setw(28) << r.run << std::right << std::setw(14) << std::fixed
        << std::setprecision(4) << r.mean_return << std::setw(14) << r.mean_cost << std::setw(12)
        << r.total_violations << std::setw(10) << r.episodes << '\n';
  }
  return out.str();
}

void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "run,mean_return,mean_cost,total_violations,episodes\n";
  for (const CompareRow& r : rows) {
    out << r.run << ',' << format_double(r.mean_return) << ',' << format_double(r.mean_cost)
        << ',' << r.total_violations << ',' << r.episodes << '\n';
  }
}

}  // namespace safefilter::harness
