#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"

#include <vector>

namespace safefilter::envs {

/// Finite MDP over states {0, ..., n-1} used as an exhaustively solvable
/// oracle. P[u](s, s') is the probability of moving from s to s' under
/// action u; every row must sum to one.
class DiscreteChainMDP {
 public:
  /// Roll-outs start from state 0 by convention.
  static constexpr int kInitialState = 0;

  DiscreteChainMDP(std::vector<Mat> transition, std::vector<int> unsafe_states);

  int n_states() const { return n_states_; }
  int n_actions() const { return static_cast<int>(transition_.size()); }
  const Mat& transition(int action) const { return transition_.at(action); }
  bool unsafe(int s) const { return unsafe_mask_.at(s); }

  /// Re-checks row stochasticity (call after any mutation of a copy).
  void validate() const;

  int sample_next(int s, int action, RandomSource& rng) const;

  /// Exact cost value V = (I - gamma P_pi)^{-1} c for a fixed action map.
  Vec exact_value(const Vec& state_cost, double gamma, const std::vector<int>& policy) const;

  /// Exact probability of hitting `bad` within K steps (states checked at
  /// k = 1..K) starting from s0.
  double exact_hit_probability(const std::vector<int>& policy, const std::vector<bool>& bad,
                               int s0, int horizon) const;

 private:
  int n_states_;
  std::vector<Mat> transition_;
  std::vector<bool> unsafe_mask_;
};

}  // namespace safefilter::envs
