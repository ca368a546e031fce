#include "safefilter/model/calibrated.hpp"

#include <cmath>

namespace safefilter::model {

Prediction CalibratedModel::predict(const Vec& x, const Vec& u) const {
  require_finite(x, "predict: x");
  require_finite(u, "predict: u");
  Prediction p{mean(x, u), stddev(x, u)};
  require_finite(p.mu, "predict: mu");
  require((p.sigma.array() >= 0.0).all(), "predict: sigma must be >= 0");
  return p;
}

Vec hallucinated_step(const CalibratedModel& model, const Vec& x, const Vec& u,
                      const Vec& eta, const Vec& omega) {
  require(eta.size() == model.state_dim(), "hallucinated_step: eta dimension mismatch");
  require((eta.array().abs() <= 1.0 + 1e-12).all(),
          "hallucinated_step: eta outside the admissible unit box");
  Prediction p = model.predict(x, u);
  return p.mu + model.beta() * p.sigma.cwiseProduct(eta) + omega;
}

double check_calibration(const CalibratedModel& model,
                         const std::function<Vec(const Vec&, const Vec&)>& truth,
                         const Box& state_box, const Box& action_box, int sample_count,
                         RandomSource& rng) {
  require(sample_count > 0, "check_calibration: sample_count must be positive");
  int inside = 0;
  for (int i = 0; i < sample_count; ++i) {
    Vec x = state_box.sample(rng);
    Vec u = action_box.sample(rng);
    Prediction p = model.predict(x, u);
    Vec err = (truth(x, u) - p.mu).cwiseAbs();
    if ((err.array() <= model.beta() * p.sigma.array() + 1e-12).all()) ++inside;
  }
  return static_cast<double>(inside) / sample_count;
}

OraclePerturbedModel::OraclePerturbedModel(DriftFn truth, Vec sigma_floor, double beta,
                                           BiasFn bias)
    : truth_(std::move(truth)),
      sigma_floor_(std::move(sigma_floor)),
      beta_(beta),
      bias_(std::move(bias)) {
  require(beta_ > 0.0, "OraclePerturbedModel: beta must be positive");
  require((sigma_floor_.array() >= 0.0).all(), "OraclePerturbedModel: sigma_floor >= 0");
}

Vec OraclePerturbedModel::mean(const Vec& x, const Vec& u) const {
  Vec mu = truth_(x, u);
  if (bias_) {
    Vec cap = beta_ * sigma_floor_;
    mu += bias_(x, u).cwiseMax(-cap).cwiseMin(cap);
  }
  return mu;
}

Vec OraclePerturbedModel::stddev(const Vec&, const Vec&) const { return sigma_floor_; }

OraclePerturbedModel::BiasFn OraclePerturbedModel::sinusoid_bias(Vec amplitude) {
  return [amplitude](const Vec& x, const Vec& u) {
    Vec out(amplitude.size());
    double phase = u.size() > 0 ? u[0] : 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      double s = phase;
      for (Eigen::Index j = 0; j < x.size(); ++j) s += (j + 1.0) * x[j];
      out[i] = amplitude[i] * std::sin(s + static_cast<double>(i));
    }
    return out;
  };
}

}  // namespace safefilter::model
