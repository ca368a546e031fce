#include "safefilter/envs/chain_mdp.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace safefilter::envs {

DiscreteChainMDP::DiscreteChainMDP(std::vector<Mat> transition, std::vector<int> unsafe_states)
    : transition_(std::move(transition)) {
  require(!transition_.empty(), "DiscreteChainMDP: need at least one action");
  n_states_ = static_cast<int>(transition_[0].rows());
  unsafe_mask_.assign(n_states_, false);
  for (int s : unsafe_states) {
    require(s >= 0 && s < n_states_, "DiscreteChainMDP: unsafe state out of range");
    unsafe_mask_[s] = true;
  }
  validate();
}

void DiscreteChainMDP::validate() const {
  for (const Mat& p : transition_) {
    require(p.rows() == n_states_ && p.cols() == n_states_,
            "DiscreteChainMDP: transition matrix shape mismatch");
    require((p.array() >= -1e-15).all(), "DiscreteChainMDP: negative transition probability");
    for (int s = 0; s < n_states_; ++s) {
      require(std::abs(p.row(s).sum() - 1.0) <= 1e-12,
              "DiscreteChainMDP: row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

int DiscreteChainMDP::sample_next(int s, int action, RandomSource& rng) const {
  const Mat& p = transition_.at(action);
  double u = rng.uniform01();
  double acc = 0.0;
  for (int sp = 0; sp < n_states_; ++sp) {
    acc += p(s, sp);
    if (u < acc) return sp;
  }
  return n_states_ - 1;
}

Vec DiscreteChainMDP::exact_value(const Vec& state_cost, double gamma,
                                  const std::vector<int>& policy) const {
  require(static_cast<int>(policy.size()) == n_states_, "exact_value: policy size mismatch");
  Mat p_pi(n_states_, n_states_);
  for (int s = 0; s < n_states_; ++s) p_pi.row(s) = transition_.at(policy[s]).row(s);
  Mat lhs = Mat::Identity(n_states_, n_states_) - gamma * p_pi;
  return lhs.fullPivLu().solve(state_cost);
}

double DiscreteChainMDP::exact_hit_probability(const std::vector<int>& policy,
                                               const std::vector<bool>& bad, int s0,
                                               int horizon) const {
  // h_k(s) = P(hit bad within k steps | current state s), counting the state
  // after each transition.
  Vec h = Vec::Zero(n_states_);
  for (int k = 0; k < horizon; ++k) {
    Vec next(n_states_);
    for (int s = 0; s < n_states_; ++s) {
      if (bad[s]) {
        next[s] = 1.0;  // already bad: any continuation counts as hit
        continue;
      }
      double acc = 0.0;
      const Mat& p = transition_.at(policy[s]);
      for (int sp = 0; sp < n_states_; ++sp) {
        acc += p(s, sp) * (bad[sp] ? 1.0 : h[sp]);
      }
      next[s] = acc;
    }
    h = std::move(next);
  }
  return h[s0];
}

}  // namespace safefilter::envs
