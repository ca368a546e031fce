#include "safefilter/backup/parametric.hpp"

#include <cmath>
#include <stdexcept>

namespace safefilter::backup {

ParametricPolicy::ParametricPolicy(int state_dim, Box out_box, std::vector<Vec> rbf_centers,
                                   double rbf_gamma)
    : state_dim_(state_dim),
      out_dim_(static_cast<int>(out_box.dim())),
      out_box_(std::move(out_box)),
      rbf_centers_(std::move(rbf_centers)),
      rbf_gamma_(rbf_gamma) {
  feature_count_ = state_dim_ + 1 + static_cast<int>(rbf_centers_.size());
  params_ = Vec::Zero(param_count());
}

void ParametricPolicy::set_params(Vec params) {
  require(params.size() == param_count(), "ParametricPolicy: parameter count mismatch");
  require_finite(params, "ParametricPolicy: params");
  params_ = std::move(params);
}

Vec ParametricPolicy::features(const Vec& x) const {
  Vec f(feature_count_);
  f.head(state_dim_) = x;
  f[state_dim_] = 1.0;
  for (std::size_t r = 0; r < rbf_centers_.size(); ++r) {
    double d2 = (x - rbf_centers_[r]).squaredNorm();
    f[state_dim_ + 1 + static_cast<int>(r)] = std::exp(-rbf_gamma_ * d2);
  }
  return f;
}

Vec ParametricPolicy::operator()(const Vec& x) const {
  Vec f = features(x);
  Vec center = out_box_.center();
  Vec half = out_box_.half_width();
  Vec out(out_dim_);
  for (int o = 0; o < out_dim_; ++o) {
    double z = params_.segment(static_cast<Eigen::Index>(o) * feature_count_, feature_count_)
                   .dot(f);
    out[o] = center[o] + half[o] * std::tanh(z);
  }
  return out;
}

namespace {

double mc_pessimistic_cost(const model::CalibratedModel& model,
                           const objective::ImmediateCost& cost, double gamma,
                           const std::function<Vec(RandomSource&)>& x0_sampler,
                           const NoiseModel& noise, const ParametricPolicy& policy,
                           const ParametricPolicy& eta, int rollouts, int horizon,
                           std::uint64_t seed, std::uint64_t stream) {
  RandomSource rng(seed, stream);
  double total = 0.0;
  for (int r = 0; r < rollouts; ++r) {
    Vec x = x0_sampler(rng);
    double acc = 0.0;
    double g = 1.0;
    for (int k = 0; k < horizon; ++k) {
      acc += g * cost.c(x);
      Vec u = policy(x);
      Vec h = eta(x);
      x = hallucinated_step(model, x, u, h, noise.sample(rng));
      if (!x.allFinite()) return std::numeric_limits<double>::infinity();
      g *= gamma;
    }
    acc += g * cost.c(x);
    total += acc;
  }
  return total / rollouts;
}

}  // namespace

MinimaxCemResult cem_minimax_policy(const model::CalibratedModel& model,
                                    const objective::ImmediateCost& cost, double gamma,
                                    const std::function<Vec(RandomSource&)>& x0_sampler,
                                    const NoiseModel& noise, const ParametricPolicy& policy_proto,
                                    const ParametricPolicy& eta_proto,
                                    const MinimaxCemOptions& opts, RandomSource& rng) {
  require(opts.cem.particles >= 16, "cem_minimax_policy: population must be >= 16");
  ParametricPolicy policy = policy_proto;
  ParametricPolicy eta = eta_proto;

  const std::uint64_t base_seed = rng.seed() ^ 0x5f3759df9e3779b9ULL;
  std::uint64_t round_stream = rng.stream() * 1000003ULL;

  auto adversarial_cost = [&](const ParametricPolicy& pi, const ParametricPolicy& h,
                              std::uint64_t stream) {
    return mc_pessimistic_cost(model, cost, gamma, x0_sampler, noise, pi, h,
                               opts.rollouts_per_eval, opts.horizon, base_seed, stream);
  };

  for (int round = 0; round < opts.outer_rounds; ++round) {
    // Policy descent: common random numbers within the round.
    std::uint64_t eval_stream = ++round_stream;
    CemOptions pol_opts = opts.cem;
    pol_opts.iterations = opts.policy_steps;
    ParametricPolicy cand = policy;
    auto pol_score = [&](const Vec& params) {
      cand.set_params(params);
      return -adversarial_cost(cand, eta, eval_stream);
    };
    RandomSource pol_rng = rng.fork(11 + 2 * static_cast<std::uint64_t>(round));
    CemResult pol = cem_optimize(pol_score, policy.params(),
                                 Vec::Constant(policy.param_count(), opts.param_init_std),
                                 pol_opts, pol_rng);
    policy.set_params(pol.best);

    // Adversary ascent against the updated policy.
    eval_stream = ++round_stream;
    CemOptions adv_opts = opts.cem;
    adv_opts.iterations = opts.adversary_steps;
    ParametricPolicy adv_cand = eta;
    auto adv_score = [&](const Vec& params) {
      adv_cand.set_params(params);
      return adversarial_cost(policy, adv_cand, eval_stream);
    };
    RandomSource adv_rng = rng.fork(12 + 2 * static_cast<std::uint64_t>(round));
    CemResult adv = cem_optimize(adv_score, eta.params(),
                                 Vec::Constant(eta.param_count(), opts.param_init_std),
                                 adv_opts, adv_rng);
    eta.set_params(adv.best);
  }

  MinimaxCemResult result;
  result.adversarial_value = adversarial_cost(policy, eta, ++round_stream);
  result.policy = std::move(policy);
  result.eta_policy = std::move(eta);
  return result;
}

}  // namespace safefilter::backup
