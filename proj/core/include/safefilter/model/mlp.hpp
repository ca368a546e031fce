#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"

#include <vector>

namespace safefilter::model {

/// Fully connected network with swish hidden activations and a linear output
/// layer. Training is plain full-batch backpropagation; no external framework.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, int output_dim, int hidden_layers, int hidden_width, RandomSource& rng);

  Vec forward(const Vec& input) const;
  /// Rows of `inputs` are samples; returns one row per sample.
  Mat forward_batch(const Mat& inputs) const;

  /// Mean squared error over the batch and its parameter gradients.
  double mse_gradients(const Mat& inputs, const Mat& targets, std::vector<Mat>& grad_w,
                       std::vector<Vec>& grad_b) const;

  int input_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_.front().cols()); }
  int output_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_.back().rows()); }
  int layer_count() const { return static_cast<int>(weights_.size()); }

  std::vector<Mat>& weights() { return weights_; }
  std::vector<Vec>& biases() { return biases_; }
  const std::vector<Mat>& weights() const { return weights_; }
  const std::vector<Vec>& biases() const { return biases_; }

  bool finite() const;

 private:
  std::vector<Mat> weights_;  // layer l: (out x in)
  std::vector<Vec> biases_;
};

/// Adam moments for one Mlp.
struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;
  long step = 0;

  static AdamState like(const Mlp& net);
};

struct AdamParams {
  double lr = 5e-4;
  double weight_decay = 1e-4;  // decoupled, applied to weights only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_update(Mlp& net, AdamState& state, const std::vector<Mat>& grad_w,
                 const std::vector<Vec>& grad_b, const AdamParams& params);

}  // namespace safefilter::model
