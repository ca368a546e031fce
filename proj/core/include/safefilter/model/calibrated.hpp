#pragma once

#include "safefilter/common.hpp"
#include "safefilter/geometry.hpp"
#include "safefilter/random.hpp"

#include <functional>
#include <memory>

namespace safefilter::model {

struct Prediction {
  Vec mu;
  Vec sigma;
};

/// Calibrated model set {f : |f - mu| <= beta * sigma element-wise}.
/// mean/stddev are deterministic functions of (x, u); sigma >= 0.
class CalibratedModel {
 public:
  virtual ~CalibratedModel() = default;

  virtual Vec mean(const Vec& x, const Vec& u) const = 0;
  virtual Vec stddev(const Vec& x, const Vec& u) const = 0;
  virtual double beta() const = 0;
  virtual int state_dim() const = 0;

  Prediction predict(const Vec& x, const Vec& u) const;
};

/// Reparameterized plausible transition mu + beta * diag(sigma) * eta + omega
/// for eta in the unit box. Rejects eta outside [-1, 1]^d.
Vec hallucinated_step(const CalibratedModel& model, const Vec& x, const Vec& u,
                      const Vec& eta, const Vec& omega);

/// Fraction of sampled (x, u) pairs whose true transition lies inside the
/// model set element-wise. Truth is the deterministic transition function;
/// test/diagnostic contexts only.
double check_calibration(const CalibratedModel& model,
                         const std::function<Vec(const Vec&, const Vec&)>& truth,
                         const Box& state_box, const Box& action_box, int sample_count,
                         RandomSource& rng);

/// Model set defined by arbitrary mean/stddev callables. Handy for exactly
/// specified toy sets (interval-uncertain chains, closed-form tests).
class FunctionModel final : public CalibratedModel {
 public:
  using Fn = std::function<Vec(const Vec&, const Vec&)>;

  FunctionModel(Fn mean, Fn stddev, double beta, int state_dim)
      : mean_(std::move(mean)), stddev_(std::move(stddev)), beta_(beta), state_dim_(state_dim) {
    require(beta_ >= 0.0, "FunctionModel: beta must be non-negative");
  }

  Vec mean(const Vec& x, const Vec& u) const override { return mean_(x, u); }
  Vec stddev(const Vec& x, const Vec& u) const override { return stddev_(x, u); }
  double beta() const override { return beta_; }
  int state_dim() const override { return state_dim_; }

 private:
  Fn mean_;
  Fn stddev_;
  double beta_;
  int state_dim_;
};

/// Model set built around a known truth: mean = truth + bias with
/// |bias| <= beta * sigma_floor enforced at construction, so the set is
/// calibrated everywhere by construction.
class OraclePerturbedModel final : public CalibratedModel {
 public:
  using DriftFn = std::function<Vec(const Vec&, const Vec&)>;
  using BiasFn = std::function<Vec(const Vec&, const Vec&)>;

  OraclePerturbedModel(DriftFn truth, Vec sigma_floor, double beta, BiasFn bias = nullptr);

  Vec mean(const Vec& x, const Vec& u) const override;
  Vec stddev(const Vec& x, const Vec& u) const override;
  double beta() const override { return beta_; }
  int state_dim() const override { return static_cast<int>(sigma_floor_.size()); }

  /// Smooth bounded bias with the given element-wise amplitude, clipped to
  /// beta * sigma_floor so calibration cannot break.
  static BiasFn sinusoid_bias(Vec amplitude);

 private:
  DriftFn truth_;
  Vec sigma_floor_;
  double beta_;
  BiasFn bias_;
};

}  // namespace safefilter::model
