#include "safefilter/harness/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace safefilter::harness {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_if(const json& j, const char* key, std::optional<double>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<double>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  reject_unknown(j,
                 {"seed", "environment", "model", "objective", "grid", "value", "backup",
                  "filter", "cert", "episodes", "planner"},
                 "root");
  get_if(j, "seed", c.seed);

  if (j.contains("environment")) {
    const json& e = j.at("environment");
    reject_unknown(e,
                   {"name", "dt", "noise_std", "action_limit", "reward_u_sign",
                    "init_jitter_std", "position_limit"},
                   "environment");
    get_if(e, "name", c.env.name);
    get_if(e, "dt", c.env.dt);
    get_if(e, "noise_std", c.env.noise_std);
    get_if(e, "action_limit", c.env.action_limit);
    get_if(e, "reward_u_sign", c.env.reward_u_sign);
    get_if(e, "init_jitter_std", c.env.init_jitter_std);
    get_if(e, "position_limit", c.env.position_limit);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m,
                   {"type", "beta", "sigma_floor", "bias_fraction", "members", "hidden_layers",
                    "hidden_width", "lr", "weight_decay", "pretrain_iters", "refit_iters",
                    "buffer_capacity", "ensemble_sigma_floor", "beta_quantile", "beta_from_truth"},
                   "model");
    get_if(m, "type", c.model.type);
    get_if(m, "beta", c.model.beta);
    get_if(m, "sigma_floor", c.model.sigma_floor);
    get_if(m, "bias_fraction", c.model.bias_fraction);
    get_if(m, "members", c.model.members);
    get_if(m, "hidden_layers", c.model.hidden_layers);
    get_if(m, "hidden_width", c.model.hidden_width);
    get_if(m, "lr", c.model.lr);
    get_if(m, "weight_decay", c.model.weight_decay);
    get_if(m, "pretrain_iters", c.model.pretrain_iters);
    get_if(m, "refit_iters", c.model.refit_iters);
    get_if(m, "buffer_capacity", c.model.buffer_capacity);
    get_if(m, "ensemble_sigma_floor", c.model.ensemble_sigma_floor);
    get_if(m, "beta_quantile", c.model.beta_quantile);
    get_if(m, "beta_from_truth", c.model.beta_from_truth);
  }
  if (j.contains("objective")) {
    const json& o = j.at("objective");
    reject_unknown(o,
                   {"cost", "slope", "momentum_coeff", "alpha_coeff", "gamma", "xi_fraction",
                    "xi_absolute", "c_min_mode"},
                   "objective");
    get_if(o, "cost", c.objective.cost);
    get_if(o, "slope", c.objective.slope);
    get_if(o, "momentum_coeff", c.objective.momentum_coeff);
    get_if(o, "alpha_coeff", c.objective.alpha_coeff);
    get_if(o, "gamma", c.objective.gamma);
    get_if(o, "xi_fraction", c.objective.xi_fraction);
    get_if(o, "xi_absolute", c.objective.xi_absolute);
    get_if(o, "c_min_mode", c.objective.c_min_mode);
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, {"lower", "upper", "points"}, "grid");
    get_if(g, "lower", c.grid.lower);
    get_if(g, "upper", c.grid.upper);
    get_if(g, "points", c.grid.points);
  }
  if (j.contains("value")) {
    const json& v = j.at("value");
    reject_unknown(v,
                   {"tol", "max_sweeps", "gh_points", "mc_noise_samples", "eta_refine",
                    "eta_refine_points"},
                   "value");
    get_if(v, "tol", c.value.tol);
    get_if(v, "max_sweeps", c.value.max_sweeps);
    get_if(v, "gh_points", c.value.gh_points);
    get_if(v, "mc_noise_samples", c.value.mc_noise_samples);
    get_if(v, "eta_refine", c.value.eta_refine);
    get_if(v, "eta_refine_points", c.value.eta_refine_points);
  }
  if (j.contains("backup")) {
    const json& b = j.at("backup");
    reject_unknown(b,
                   {"method", "action_points", "cem_population", "cem_elite_fraction",
                    "cem_policy_steps", "cem_adversary_steps", "cem_outer_rounds", "cem_horizon",
                    "cem_rollouts"},
                   "backup");
    get_if(b, "method", c.backup.method);
    get_if(b, "action_points", c.backup.action_points);
    get_if(b, "cem_population", c.backup.cem_population);
    get_if(b, "cem_elite_fraction", c.backup.cem_elite_fraction);
    get_if(b, "cem_policy_steps", c.backup.cem_policy_steps);
    get_if(b, "cem_adversary_steps", c.backup.cem_adversary_steps);
    get_if(b, "cem_outer_rounds", c.backup.cem_outer_rounds);
    get_if(b, "cem_horizon", c.backup.cem_horizon);
    get_if(b, "cem_rollouts", c.backup.cem_rollouts);
  }
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    reject_unknown(f, {"enabled", "particles", "iterations", "elite_fraction", "init_std_frac"},
                   "filter");
    get_if(f, "enabled", c.filter.enabled);
    get_if(f, "particles", c.filter.particles);
    get_if(f, "iterations", c.filter.iterations);
    get_if(f, "elite_fraction", c.filter.elite_fraction);
    get_if(f, "init_std_frac", c.filter.init_std_frac);
  }
  if (j.contains("cert")) {
    const json& ct = j.at("cert");
    reject_unknown(ct,
                   {"enabled", "horizon", "vartheta_grid", "delta_f", "variant", "mc_rollouts",
                    "drift_band"},
                   "cert");
    get_if(ct, "enabled", c.cert.enabled);
    get_if(ct, "horizon", c.cert.horizon);
    get_if(ct, "vartheta_grid", c.cert.vartheta_grid);
    get_if(ct, "delta_f", c.cert.delta_f);
    get_if(ct, "variant", c.cert.variant);
    get_if(ct, "mc_rollouts", c.cert.mc_rollouts);
    get_if(ct, "drift_band", c.cert.drift_band);
  }
  if (j.contains("episodes")) {
    const json& ep = j.at("episodes");
    reject_unknown(ep, {"warmup", "count", "horizon"}, "episodes");
    get_if(ep, "warmup", c.episodes.warmup);
    get_if(ep, "count", c.episodes.count);
    get_if(ep, "horizon", c.episodes.horizon);
  }
  if (j.contains("planner")) {
    const json& p = j.at("planner");
    reject_unknown(p, {"particles", "iterations", "horizon", "elite_fraction", "init_std_frac"},
                   "planner");
    get_if(p, "particles", c.planner.particles);
    get_if(p, "iterations", c.planner.iterations);
    get_if(p, "horizon", c.planner.horizon);
    get_if(p, "elite_fraction", c.planner.elite_fraction);
    get_if(p, "init_std_frac", c.planner.init_std_frac);
  }

  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["seed"] = seed;
  json e;
  e["name"] = env.name;
  if (env.dt) e["dt"] = *env.dt;
  if (env.noise_std) e["noise_std"] = *env.noise_std;
  if (env.action_limit) e["action_limit"] = *env.action_limit;
  e["reward_u_sign"] = env.reward_u_sign;
  e["init_jitter_std"] = env.init_jitter_std;
  e["position_limit"] = env.position_limit;
  j["environment"] = e;
  j["model"] = {{"type", model.type},
                {"beta", model.beta},
                {"sigma_floor", model.sigma_floor},
                {"bias_fraction", model.bias_fraction},
                {"members", model.members},
                {"hidden_layers", model.hidden_layers},
                {"hidden_width", model.hidden_width},
                {"lr", model.lr},
                {"weight_decay", model.weight_decay},
                {"pretrain_iters", model.pretrain_iters},
                {"refit_iters", model.refit_iters},
                {"buffer_capacity", model.buffer_capacity},
                {"ensemble_sigma_floor", model.ensemble_sigma_floor},
                {"beta_quantile", model.beta_quantile},
                {"beta_from_truth", model.beta_from_truth}};
  json o;
  o["cost"] = objective.cost;
  o["slope"] = objective.slope;
  o["momentum_coeff"] = objective.momentum_coeff;
  o["alpha_coeff"] = objective.alpha_coeff;
  o["gamma"] = objective.gamma;
  o["xi_fraction"] = objective.xi_fraction;
  if (objective.xi_absolute) o["xi_absolute"] = *objective.xi_absolute;
  o["c_min_mode"] = objective.c_min_mode;
  j["objective"] = o;
  j["grid"] = {{"lower", grid.lower}, {"upper", grid.upper}, {"points", grid.points}};
  j["value"] = {{"tol", value.tol},
                {"max_sweeps", value.max_sweeps},
                {"gh_points", value.gh_points},
                {"mc_noise_samples", value.mc_noise_samples},
                {"eta_refine", value.eta_refine},
                {"eta_refine_points", value.eta_refine_points}};
  j["backup"] = {{"method", backup.method},
                 {"action_points", backup.action_points},
                 {"cem_population", backup.cem_population},
                 {"cem_elite_fraction", backup.cem_elite_fraction},
                 {"cem_policy_steps", backup.cem_policy_steps},
                 {"cem_adversary_steps", backup.cem_adversary_steps},
                 {"cem_outer_rounds", backup.cem_outer_rounds},
                 {"cem_horizon", backup.cem_horizon},
                 {"cem_rollouts", backup.cem_rollouts}};
  j["filter"] = {{"enabled", filter.enabled},
                 {"particles", filter.particles},
                 {"iterations", filter.iterations},
                 {"elite_fraction", filter.elite_fraction},
                 {"init_std_frac", filter.init_std_frac}};
  j["cert"] = {{"enabled", cert.enabled},
               {"horizon", cert.horizon},
               {"vartheta_grid", cert.vartheta_grid},
               {"delta_f", cert.delta_f},
               {"variant", cert.variant},
               {"mc_rollouts", cert.mc_rollouts},
               {"drift_band", cert.drift_band}};
  j["episodes"] = {{"warmup", episodes.warmup},
                   {"count", episodes.count},
                   {"horizon", episodes.horizon}};
  j["planner"] = {{"particles", planner.particles},
                  {"iterations", planner.iterations},
                  {"horizon", planner.horizon},
                  {"elite_fraction", planner.elite_fraction},
                  {"init_std_frac", planner.init_std_frac}};
  return j.dump(2);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_json_text() << "\n";
}

double ExperimentConfig::xi_bar() const {
  double c_hat = objective.cost == "indicator" ? 1.0 : 0.5;
  // analytic bound: c_lower = 0 for both families, so C_min >= 0
  return objective.gamma * 0.0 + c_hat;
}

double ExperimentConfig::xi() const {
  return objective.xi_absolute ? *objective.xi_absolute : objective.xi_fraction * xi_bar();
}

void ExperimentConfig::validate() const {
  require(env.name == "pitch" || env.name == "double_integrator",
          "config: environment.name must be pitch or double_integrator");
  require(model.type == "oracle" || model.type == "ensemble",
          "config: model.type must be oracle or ensemble");
  require(objective.cost == "margin" || objective.cost == "indicator",
          "config: objective.cost must be margin or indicator");
  require(objective.c_min_mode == "analytic" || objective.c_min_mode == "grid",
          "config: objective.c_min_mode must be analytic or grid");
  require(cert.variant == "derived" || cert.variant == "printed",
          "config: cert.variant must be derived or printed");
  require(backup.method == "robust_vi" || backup.method == "cem",
          "config: backup.method must be robust_vi or cem");
  require(objective.gamma > 0.0 && objective.gamma < 1.0, "config: gamma must lie in (0,1)");
  require(objective.slope > 0.0, "config: objective.slope must be positive");
  require(model.beta > 0.0, "config: model.beta must be positive");
  require(episodes.count > 0 && episodes.horizon > 0 && episodes.warmup >= 0,
          "config: episode counts must be positive");
  require(filter.particles > 0 && filter.iterations > 0, "config: filter counts");
  require(planner.particles > 0 && planner.iterations > 0 && planner.horizon > 0,
          "config: planner counts");
  require(value.gh_points >= 1 && value.tol > 0.0, "config: value solver settings");
  require(cert.horizon >= 0 && cert.delta_f >= 0.0 && cert.delta_f <= 1.0, "config: cert settings");
  require(cert.drift_band >= 0.0 && cert.drift_band < 1.0, "config: cert.drift_band in [0,1)");
  require(backup.action_points >= 2, "config: backup.action_points must be >= 2");
  require(grid.lower.size() == grid.upper.size() && grid.lower.size() == grid.points.size(),
          "config: grid fields must have equal lengths");
  require(xi() < xi_bar(), "config: xi must be strictly below xi_bar");
  require(xi() > 0.0, "config: xi must be positive");
}

}  // namespace safefilter::harness
