#include "merge_arena/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace merge_arena {

void Mlp::Grad::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

Mlp::Mlp(std::vector<int> dims, Head head) : dims_(std::move(dims)), head_(head) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least an input and an output");
  for (int d : dims_) {
    if (d <= 0) throw std::invalid_argument("Mlp layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights.push_back(Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]));
    biases.push_back(Eigen::VectorXd::Zero(dims_[l + 1]));
  }
}

void Mlp::init(std::mt19937_64& rng, double head_range) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const bool last = l + 1 == weights.size();
    const double r = last ? head_range : 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::uniform_real_distribution<double> dist(-r, r);
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = dist(rng);
    }
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = dist(rng);
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != input_dim()) {
    throw std::invalid_argument("Mlp input has " + std::to_string(input.rows()) +
                                " features, expected " + std::to_string(input_dim()));
  }
  if (cache) {
    cache->activations.resize(weights.size() + 1);
    cache->activations[0] = input;
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = weights[l] * a;
    z.colwise() += biases[l];
    if (l + 1 < weights.size()) {
      a = z.cwiseMax(0.0);
    } else if (head_ == Head::tanh) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
    if (cache) cache->activations[l + 1] = a;
  }
  return a;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output, Grad* grad,
                   Eigen::MatrixXd* d_input) const {
  const std::size_t layers = weights.size();
  Eigen::MatrixXd delta;
  if (head_ == Head::tanh) {
    const auto& y = cache.activations.back();
    delta = (d_output.array() * (1.0 - y.array().square())).matrix();
  } else {
    delta = d_output;
  }
  for (std::size_t l = layers; l-- > 0;) {
    const auto& a_in = cache.activations[l];
    if (grad) {
      grad->weights[l].noalias() += delta * a_in.transpose();
      grad->biases[l] += delta.rowwise().sum();
    }
    if (l == 0 && d_input == nullptr) break;
    Eigen::MatrixXd d_a = weights[l].transpose() * delta;
    if (l == 0) {
      *d_input = std::move(d_a);
      break;
    }
    // ReLU derivative taken as 0 at the kink.
    delta = (d_a.array() * (a_in.array() > 0.0).cast<double>()).matrix();
  }
}

Mlp::Grad Mlp::zero_grad() const {
  Grad g;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(biases[l].size()));
  }
  return g;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) out.push_back(weights[l](i, j));
    }
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) out.push_back(biases[l](i));
  }
  return out;
}

void Mlp::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("Mlp::assign expects " + std::to_string(parameter_count()) +
                                " values, got " + std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = flat[k++];
    }
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = flat[k++];
  }
}

bool Mlp::operator==(const Mlp& other) const {
  return dims_ == other.dims_ && head_ == other.head_ && flatten() == other.flatten();
}

void Adam::reset(const Mlp& net) {
  t = 0;
  m = net.zero_grad();
  v = net.zero_grad();
}

void Adam::step(Mlp& net, const Mlp::Grad& grad, double lr) {
  if (m.weights.size() != net.layer_count()) reset(net);
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  auto update = [&](auto& param, auto& m_, auto& v_, const auto& g) {
    m_ = beta1 * m_ + (1.0 - beta1) * g;
    v_ = beta2 * v_ + (1.0 - beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon);
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    update(net.weights[l], m.weights[l], v.weights[l], grad.weights[l]);
    update(net.biases[l], m.biases[l], v.biases[l], grad.biases[l]);
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.dims() != online.dims()) throw std::invalid_argument("soft_update: shape mismatch");
  for (std::size_t l = 0; l < online.layer_count(); ++l) {
    target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

bool all_finite(const Mlp& net) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    if (!net.weights[l].allFinite() || !net.biases[l].allFinite()) return false;
  }
  return true;
}

}  // namespace merge_arena
