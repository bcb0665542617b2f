#include "palletize/nn.hpp"

#include <cmath>

#include "palletize/errors.hpp"

namespace palletize::nn {

Linear::Linear(int in, int out, Rng& rng)
    : weight(in, out),
      bias(Vector::Zero(out)),
      grad_weight(Matrix::Zero(in, out)),
      grad_bias(Vector::Zero(out)) {
  const double limit = std::sqrt(6.0 / (in + out));
  for (int i = 0; i < in; ++i) {
    for (int j = 0; j < out; ++j) {
      weight(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    }
  }
}

Matrix Linear::forward(const Matrix& x) const {
  return (x * weight).rowwise() + bias.transpose();
}

Matrix Linear::backward(const Matrix& x, const Matrix& grad_out) {
  grad_weight.noalias() += x.transpose() * grad_out;
  grad_bias.noalias() += grad_out.colwise().sum().transpose();
  return grad_out * weight.transpose();
}

void Linear::zero_grad() {
  grad_weight.setZero();
  grad_bias.setZero();
}

Mlp::Mlp(std::vector<int> layer_sizes, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ConfigError("mlp needs at least input and output sizes");
  Rng rng(Rng::mix(seed, 0xa1));
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    layers_.emplace_back(sizes_[i], sizes_[i + 1], rng);
  }
}

Matrix Mlp::forward(const Matrix& x) {
  inputs_.clear();
  inputs_.reserve(layers_.size());
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    inputs_.push_back(h);
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Matrix Mlp::infer(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Matrix Mlp::backward(const Matrix& grad_out) {
  if (inputs_.size() != layers_.size()) {
    throw Error("backward called without a matching forward");
  }
  Matrix g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i].backward(inputs_[i], g);
    if (i > 0) {
      // inputs_[i] is the post-ReLU activation feeding layer i.
      g = g.cwiseProduct((inputs_[i].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weight.data(), l.weight.data() + l.weight.size());
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

void Mlp::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw ConfigError("parameter blob size mismatch");
  }
  std::size_t at = 0;
  for (auto& l : layers_) {
    std::copy(flat.begin() + at, flat.begin() + at + l.weight.size(), l.weight.data());
    at += static_cast<std::size_t>(l.weight.size());
    std::copy(flat.begin() + at, flat.begin() + at + l.bias.size(), l.bias.data());
    at += static_cast<std::size_t>(l.bias.size());
  }
}

std::vector<double> Mlp::gradients() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.grad_weight.data(),
                l.grad_weight.data() + l.grad_weight.size());
    flat.insert(flat.end(), l.grad_bias.data(),
                l.grad_bias.data() + l.grad_bias.size());
  }
  return flat;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weight.size()) +
         static_cast<std::size_t>(l.bias.size());
  }
  return n;
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& l : net.layers()) {
    m_w_.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    v_w_.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    m_b_.push_back(Vector::Zero(l.bias.size()));
    v_b_.push_back(Vector::Zero(l.bias.size()));
  }
}

void Adam::step(Mlp& net) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& l = net.layers()[i];
    m_w_[i] = beta1_ * m_w_[i] + (1.0 - beta1_) * l.grad_weight;
    v_w_[i] = beta2_ * v_w_[i].array().matrix() +
              (1.0 - beta2_) * l.grad_weight.cwiseProduct(l.grad_weight);
    l.weight.array() -= lr_ * (m_w_[i].array() / bc1) /
                        ((v_w_[i].array() / bc2).sqrt() + eps_);
    m_b_[i] = beta1_ * m_b_[i] + (1.0 - beta1_) * l.grad_bias;
    v_b_[i] = beta2_ * v_b_[i] + (1.0 - beta2_) * l.grad_bias.cwiseProduct(l.grad_bias);
    l.bias.array() -= lr_ * (m_b_[i].array() / bc1) /
                      ((v_b_[i].array() / bc2).sqrt() + eps_);
  }
}

void Adam::reset() {
  t_ = 0;
  for (auto& m : m_w_) m.setZero();
  for (auto& v : v_w_) v.setZero();
  for (auto& m : m_b_) m.setZero();
  for (auto& v : v_b_) v.setZero();
}

std::vector<double> Adam::state() const {
  std::vector<double> flat;
  for (std::size_t i = 0; i < m_w_.size(); ++i) {
    flat.insert(flat.end(), m_w_[i].data(), m_w_[i].data() + m_w_[i].size());
    flat.insert(flat.end(), m_b_[i].data(), m_b_[i].data() + m_b_[i].size());
    flat.insert(flat.end(), v_w_[i].data(), v_w_[i].data() + v_w_[i].size());
    flat.insert(flat.end(), v_b_[i].data(), v_b_[i].data() + v_b_[i].size());
  }
  return flat;
}

void Adam::set_state(const std::vector<double>& flat, std::int64_t t) {
  std::size_t at = 0;
  auto take = [&](auto& dst) {
    if (at + static_cast<std::size_t>(dst.size()) > flat.size()) {
      throw ConfigError("optimizer state blob size mismatch");
    }
    std::copy(flat.begin() + at, flat.begin() + at + dst.size(), dst.data());
    at += static_cast<std::size_t>(dst.size());
  };
  for (std::size_t i = 0; i < m_w_.size(); ++i) {
    take(m_w_[i]);
    take(m_b_[i]);
    take(v_w_[i]);
    take(v_b_[i]);
  }
  if (at != flat.size()) throw ConfigError("optimizer state blob size mismatch");
  t_ = t;
}

double weighted_bce_with_logits(const Matrix& logits, const Matrix& targets,
                                const Matrix& weights, Matrix* grad) {
  const auto z = logits.array();
  const auto t = targets.array();
  const auto w = weights.array();
  // max(z,0) - z*t + log(1 + exp(-|z|))
  const auto loss_elem = z.max(0.0) - z * t + (1.0 + (-z.abs()).exp()).log();
  const double denom = static_cast<double>(logits.size());
  const double loss = (w * loss_elem).sum() / denom;
  if (grad != nullptr) {
    const auto sig = 1.0 / (1.0 + (-z).exp());
    *grad = ((sig - t) * w / denom).matrix();
  }
  return loss;
}

Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const auto shifted = logits.row(r).array() - mx;
    const double lse = std::log(shifted.exp().sum());
    out.row(r) = (shifted - lse).matrix();
  }
  return out;
}

}  // namespace palletize::nn
