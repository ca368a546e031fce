#pragma once

#include "safefilter/model/calibrated.hpp"
#include "safefilter/model/mlp.hpp"
#include "safefilter/model/replay_buffer.hpp"

#include <memory>
#include <vector>

namespace safefilter::model {

struct EnsembleParams {
  int members = 5;
  int hidden_layers = 2;   // desk scale; 3 layers of width 200 via config
  int hidden_width = 32;
  double beta = 2.0;
  double sigma_floor = 1e-6;  // added element-wise to the disagreement
};

struct TrainReport {
  std::vector<std::vector<double>> member_losses;  // one curve per member
  double final_mean_loss = 0.0;
};

/// Deterministic ensemble: each member predicts the state increment; the
/// nominal mean is the member average and sigma is the element-wise member
/// standard deviation (disagreement). Inputs and targets are normalized by
/// buffer statistics.
class EnsembleModel final : public CalibratedModel {
 public:
  EnsembleModel(int state_dim, int action_dim, const EnsembleParams& params, RandomSource& rng);

  Vec mean(const Vec& x, const Vec& u) const override;
  Vec stddev(const Vec& x, const Vec& u) const override;
  double beta() const override { return beta_; }
  int state_dim() const override { return state_dim_; }
  int action_dim() const { return action_dim_; }
  double sigma_floor() const { return sigma_floor_; }

  void set_beta(double beta);

  /// Normalization statistics from the buffer; must be set (or trained) before
  /// prediction.
  void set_normalization_from(const ReplayBuffer& buffer);

  /// Full-batch Adam on bootstrapped resamples, one resample per member.
  /// Throws on divergence (loss > 1e6 or non-finite weights).
  TrainReport fit(const ReplayBuffer& buffer, int epochs, double lr, double weight_decay,
                  RandomSource& rng);

  /// Count of predictions whose normalized input fell outside the training
  /// range (diagnostic only; sigma is reported unchanged).
  std::size_t out_of_range_queries() const { return *ood_count_; }

  const std::vector<Mlp>& members() const { return members_; }
  std::vector<Mlp>& members() { return members_; }

  const Vec& input_shift() const { return in_shift_; }
  const Vec& input_scale() const { return in_scale_; }
  const Vec& target_shift() const { return out_shift_; }
  const Vec& target_scale() const { return out_scale_; }
  void set_normalization(Vec in_shift, Vec in_scale, Vec out_shift, Vec out_scale);

 private:
  Vec normalized_input(const Vec& x, const Vec& u) const;

  int state_dim_;
  int action_dim_;
  double beta_;
  double sigma_floor_;
  std::vector<Mlp> members_;
  Vec in_shift_, in_scale_;    // over concatenated (x, u)
  Vec out_shift_, out_scale_;  // over the increment x' - x
  bool normalized_ = false;
  std::shared_ptr<std::size_t> ood_count_ = std::make_shared<std::size_t>(0);
};

/// Calibration scale fitted as the given quantile of |f(x,u) - mu(x,u)| / sigma
/// over the supplied transitions. `truth` is used when available; otherwise the
/// stored noisy next states stand in (conservative).
double fit_beta(const EnsembleModel& model, const std::vector<Transition>& holdout,
                const std::function<Vec(const Vec&, const Vec&)>& truth = nullptr,
                double quantile = 0.99);

}  // namespace safefilter::model
