#include "safefilter/model/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safefilter::model {

EnsembleModel::EnsembleModel(int state_dim, int action_dim, const EnsembleParams& params,
                             RandomSource& rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      beta_(params.beta),
      sigma_floor_(params.sigma_floor) {
  require(params.members >= 1, "EnsembleModel: need at least one member");
  for (int m = 0; m < params.members; ++m) {
    members_.emplace_back(state_dim + action_dim, state_dim, params.hidden_layers,
                          params.hidden_width, rng);
  }
  in_shift_ = Vec::Zero(state_dim + action_dim);
  in_scale_ = Vec::Ones(state_dim + action_dim);
  out_shift_ = Vec::Zero(state_dim);
  out_scale_ = Vec::Ones(state_dim);
}

void EnsembleModel::set_beta(double beta) {
  // beta = 0 is the degenerate zero-width model set; allowed for diagnostics.
  require(beta >= 0.0, "EnsembleModel: beta must be non-negative");
  beta_ = beta;
}

void EnsembleModel::set_normalization(Vec in_shift, Vec in_scale, Vec out_shift, Vec out_scale) {
  in_shift_ = std::move(in_shift);
  in_scale_ = std::move(in_scale);
  out_shift_ = std::move(out_shift);
  out_scale_ = std::move(out_scale);
  normalized_ = true;
}

void EnsembleModel::set_normalization_from(const ReplayBuffer& buffer) {
  require(!buffer.empty(), "EnsembleModel: buffer is empty");
  const int din = state_dim_ + action_dim_;
  Vec in_mean = Vec::Zero(din), in_sq = Vec::Zero(din);
  Vec out_mean = Vec::Zero(state_dim_), out_sq = Vec::Zero(state_dim_);
  const double n = static_cast<double>(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Transition& t = buffer.at(i);
    Vec in(din);
    in << t.x, t.u;
    Vec out = t.xp - t.x;
    in_mean += in;
    in_sq += in.cwiseProduct(in);
    out_mean += out;
    out_sq += out.cwiseProduct(out);
  }
  in_mean /= n;
  out_mean /= n;
  Vec in_std = ((in_sq / n - in_mean.cwiseProduct(in_mean)).cwiseMax(0.0)).cwiseSqrt();
  Vec out_std = ((out_sq / n - out_mean.cwiseProduct(out_mean)).cwiseMax(0.0)).cwiseSqrt();
  in_std = in_std.cwiseMax(1e-8);
  out_std = out_std.cwiseMax(1e-8);
  set_normalization(in_mean, in_std, out_mean, out_std);
}

Vec EnsembleModel::normalized_input(const Vec& x, const Vec& u) const {
  Vec in(state_dim_ + action_dim_);
  in << x, u;
  Vec z = (in - in_shift_).cwiseQuotient(in_scale_);
  if ((z.array().abs() > 6.0).any()) ++(*ood_count_);
  return z;
}

Vec EnsembleModel::mean(const Vec& x, const Vec& u) const {
  Vec z = normalized_input(x, u);
  Vec acc = Vec::Zero(state_dim_);
  for (const Mlp& net : members_) acc += net.forward(z);
  acc /= static_cast<double>(members_.size());
  return x + out_shift_ + acc.cwiseProduct(out_scale_);
}

Vec EnsembleModel::stddev(const Vec& x, const Vec& u) const {
  Vec z = normalized_input(x, u);
  Mat preds(static_cast<Eigen::Index>(members_.size()), state_dim_);
  for (std::size_t m = 0; m < members_.size(); ++m)
    preds.row(static_cast<Eigen::Index>(m)) = members_[m].forward(z).transpose();
  Vec mean = preds.colwise().mean().transpose();
  Vec var = Vec::Zero(state_dim_);
  for (Eigen::Index m = 0; m < preds.rows(); ++m) {
    Vec d = preds.row(m).transpose() - mean;
    var += d.cwiseProduct(d);
  }
  var /= static_cast<double>(members_.size());  // population std: disagreement
  Vec sigma = var.cwiseSqrt().cwiseProduct(out_scale_);
  return sigma.array() + sigma_floor_;
}

TrainReport EnsembleModel::fit(const ReplayBuffer& buffer, int epochs, double lr,
                               double weight_decay, RandomSource& rng) {
  require(!buffer.empty(), "fit_ensemble: buffer is empty");
  require(epochs >= 1, "fit_ensemble: epochs must be >= 1");
  if (!normalized_) set_normalization_from(buffer);

  const int din = state_dim_ + action_dim_;
  TrainReport report;
  report.member_losses.resize(members_.size());

  AdamParams adam;
  adam.lr = lr;
  adam.weight_decay = weight_decay;

  for (std::size_t m = 0; m < members_.size(); ++m) {
    auto idx = buffer.bootstrap_indices(rng);
    Mat inputs(static_cast<Eigen::Index>(idx.size()), din);
    Mat targets(static_cast<Eigen::Index>(idx.size()), state_dim_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Transition& t = buffer.at(idx[i]);
      Vec in(din);
      in << t.x, t.u;
      inputs.row(static_cast<Eigen::Index>(i)) =
          (in - in_shift_).cwiseQuotient(in_scale_).transpose();
      targets.row(static_cast<Eigen::Index>(i)) =
          ((t.xp - t.x) - out_shift_).cwiseQuotient(out_scale_).transpose();
    }

    AdamState state = AdamState::like(members_[m]);
    std::vector<Mat> gw;
    std::vector<Vec> gb;
    for (int e = 0; e < epochs; ++e) {
      double loss = members_[m].mse_gradients(inputs, targets, gw, gb);
      if (!std::isfinite(loss) || loss > 1e6 || !members_[m].finite())
        throw std::runtime_error("fit_ensemble: diverged at member " + std::to_string(m) +
                                 " epoch " + std::to_string(e));
      report.member_losses[m].push_back(loss);
      adam_update(members_[m], state, gw, gb, adam);
    }
  }

  double acc = 0.0;
  for (const auto& curve : report.member_losses) acc += curve.back();
  report.final_mean_loss = acc / static_cast<double>(report.member_losses.size());
  return report;
}

double fit_beta(const EnsembleModel& model, const std::vector<Transition>& holdout,
                const std::function<Vec(const Vec&, const Vec&)>& truth, double quantile) {
  require(!holdout.empty(), "fit_beta: empty holdout");
  require(quantile > 0.0 && quantile <= 1.0, "fit_beta: quantile in (0,1]");
  std::vector<double> ratios;
  ratios.reserve(holdout.size());
  for (const Transition& t : holdout) {
    Vec target = truth ? truth(t.x, t.u) : t.xp;
    Vec err = (target - model.mean(t.x, t.u)).cwiseAbs();
    Vec sigma = model.stddev(t.x, t.u).cwiseMax(1e-12);
    ratios.push_back((err.cwiseQuotient(sigma)).maxCoeff());
  }
  std::sort(ratios.begin(), ratios.end());
  auto k = static_cast<std::size_t>(std::ceil(quantile * ratios.size())) - 1;
  k = std::min(k, ratios.size() - 1);
  return std::max(ratios[k], 1e-8);
}

}  // namespace safefilter::model
