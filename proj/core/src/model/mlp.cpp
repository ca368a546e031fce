#include "safefilter/model/mlp.hpp"

#include <cmath>

namespace safefilter::model {
namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double swish(double z) { return z * sigmoid(z); }

inline double swish_grad(double z) {
  double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

}  // namespace

Mlp::Mlp(int input_dim, int output_dim, int hidden_layers, int hidden_width,
         RandomSource& rng) {
  require(input_dim > 0 && output_dim > 0 && hidden_layers >= 0 && hidden_width > 0,
          "Mlp: bad shape");
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int l = 0; l < hidden_layers; ++l) dims.push_back(hidden_width);
  dims.push_back(output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    double scale = std::sqrt(2.0 / dims[l]);
    Mat w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
    weights_.push_back(std::move(w));
    biases_.push_back(Vec::Zero(dims[l + 1]));
  }
}

Vec Mlp::forward(const Vec& input) const {
  Vec h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Vec z = weights_[l] * h + biases_[l];
    if (l + 1 < weights_.size())
      h = z.unaryExpr([](double v) { return swish(v); });
    else
      h = std::move(z);
  }
  return h;
}

Mat Mlp::forward_batch(const Mat& inputs) const {
  Mat h = inputs;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Mat z = (h * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    if (l + 1 < weights_.size())
      h = z.unaryExpr([](double v) { return swish(v); });
    else
      h = std::move(z);
  }
  return h;
}

double Mlp::mse_gradients(const Mat& inputs, const Mat& targets, std::vector<Mat>& grad_w,
                          std::vector<Vec>& grad_b) const {
  const auto layers = weights_.size();
  const double n = static_cast<double>(inputs.rows());

  std::vector<Mat> pre(layers);   // pre-activations z_l
  std::vector<Mat> act(layers + 1);  // activations, act[0] = inputs
  act[0] = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = (act[l] * weights_[l].transpose()).rowwise() + biases_[l].transpose();
    if (l + 1 < layers)
      act[l + 1] = pre[l].unaryExpr([](double v) { return swish(v); });
    else
      act[l + 1] = pre[l];
  }

  Mat diff = act[layers] - targets;
  double loss = diff.squaredNorm() / (n * targets.cols());

  grad_w.assign(layers, Mat());
  grad_b.assign(layers, Vec());
  Mat delta = 2.0 * diff / (n * targets.cols());
  for (std::size_t l = layers; l-- > 0;) {
    grad_w[l] = delta.transpose() * act[l];
    grad_b[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Mat dact = pre[l - 1].unaryExpr([](double v) { return swish_grad(v); });
      delta = (delta * weights_[l]).cwiseProduct(dact);
    }
  }
  return loss;
}

bool Mlp::finite() const {
  for (const Mat& w : weights_)
    if (!w.allFinite()) return false;
  for (const Vec& b : biases_)
    if (!b.allFinite()) return false;
  return true;
}

AdamState AdamState::like(const Mlp& net) {
  AdamState s;
  for (const Mat& w : net.weights()) {
    s.m_w.push_back(Mat::Zero(w.rows(), w.cols()));
    s.v_w.push_back(Mat::Zero(w.rows(), w.cols()));
  }
  for (const Vec& b : net.biases()) {
    s.m_b.push_back(Vec::Zero(b.size()));
    s.v_b.push_back(Vec::Zero(b.size()));
  }
  return s;
}

void adam_update(Mlp& net, AdamState& state, const std::vector<Mat>& grad_w,
                 const std::vector<Vec>& grad_b, const AdamParams& p) {
  ++state.step;
  double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    state.m_w[l] = p.beta1 * state.m_w[l] + (1.0 - p.beta1) * grad_w[l];
    state.v_w[l] = p.beta2 * state.v_w[l] + (1.0 - p.beta2) * grad_w[l].cwiseProduct(grad_w[l]);
    Mat mhat = state.m_w[l] / bc1;
    Mat vhat = state.v_w[l] / bc2;
    net.weights()[l] -= p.lr * (mhat.array() / (vhat.array().sqrt() + p.eps)).matrix();
    if (p.weight_decay > 0.0) net.weights()[l] *= (1.0 - p.lr * p.weight_decay);

    state.m_b[l] = p.beta1 * state.m_b[l] + (1.0 - p.beta1) * grad_b[l];
    state.v_b[l] = p.beta2 * state.v_b[l] + (1.0 - p.beta2) * grad_b[l].cwiseProduct(grad_b[l]);
    Vec mbh = state.m_b[l] / bc1;
    Vec vbh = state.v_b[l] / bc2;
    net.biases()[l] -= p.lr * (mbh.array() / (vbh.array().sqrt() + p.eps)).matrix();
  }
}

}  // namespace safefilter::model
