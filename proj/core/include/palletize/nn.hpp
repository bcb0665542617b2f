#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "palletize/rng.hpp"

namespace palletize::nn {

using Matrix = Eigen::MatrixXd;  // rows = batch samples
using Vector = Eigen::VectorXd;

struct Linear {
  Matrix weight;  // in x out
  Vector bias;    // out
  Matrix grad_weight;
  Vector grad_bias;

  Linear(int in, int out, Rng& rng);

  Matrix forward(const Matrix& x) const;
  // Accumulates parameter gradients for the cached input and returns the
  // gradient w.r.t. the input.
  Matrix backward(const Matrix& x, const Matrix& grad_out);
  void zero_grad();
};

// Fully connected net with ReLU hidden activations and a linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, std::uint64_t seed);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  // Training-mode forward: caches activations for backward().
  Matrix forward(const Matrix& x);
  // Inference without caching; safe to call concurrently on a const net.
  Matrix infer(const Matrix& x) const;
  // Backpropagates grad_out (dLoss/dOutput), accumulating parameter grads.
  Matrix backward(const Matrix& grad_out);
  void zero_grad();

  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::vector<double> gradients() const;
  std::size_t parameter_count() const;

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<int> sizes_;
  std::vector<Linear> layers_;
  std::vector<Matrix> inputs_;  // cached per-layer inputs from forward()
};

// Adam over an Mlp's parameters.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const Mlp& net, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step(Mlp& net);
  void reset();

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::int64_t steps_taken() const { return t_; }

  std::vector<double> state() const;
  void set_state(const std::vector<double>& flat, std::int64_t t);

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
};

// Numerically stable element-wise binary cross entropy on logits with
// per-element weights. Returns the mean weighted loss and writes
// dLoss/dLogits into grad (same shape).
double weighted_bce_with_logits(const Matrix& logits, const Matrix& targets,
                                const Matrix& weights, Matrix* grad);

Matrix sigmoid(const Matrix& x);
// Row-wise stable log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace palletize::nn
