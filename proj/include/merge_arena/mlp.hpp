#pragma once

#include <Eigen/Dense>
#include <random>
#include <span>
#include <vector>

namespace merge_arena {

// Fully connected network: rectified-linear hidden layers, tanh or linear head.
// Samples are columns; everything is double precision.
class Mlp {
 public:
  enum class Head { tanh, linear };

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [0] is the input, back() the output
  };

  struct Grad {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void set_zero();
  };

  Mlp() = default;
  Mlp(std::vector<int> dims, Head head);

  // Uniform fan-in init for hidden layers, +/- head_range for the output layer.
  void init(std::mt19937_64& rng, double head_range = 3e-3);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  Head head() const { return head_; }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;

  // `d_output` is dLoss/dOutput (post-activation). Gradients are accumulated
  // into `grad` when non-null; dLoss/dInput is written to `d_input` when non-null.
  void backward(const Cache& cache, const Eigen::MatrixXd& d_output, Grad* grad,
                Eigen::MatrixXd* d_input) const;

  Grad zero_grad() const;

  // Row-major weights then bias, layer by layer.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  bool operator==(const Mlp& other) const;

  std::vector<Eigen::MatrixXd> weights;  // layer l maps dims[l] -> dims[l + 1]
  std::vector<Eigen::VectorXd> biases;

 private:
  std::vector<int> dims_;
  Head head_ = Head::linear;
};

// Adaptive-moment optimizer state for one network.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long t = 0;
  Mlp::Grad m;
  Mlp::Grad v;

  void reset(const Mlp& net);
  void step(Mlp& net, const Mlp::Grad& grad, double lr);
};

// target <- tau * online + (1 - tau) * target
void soft_update(Mlp& target, const Mlp& online, double tau);

bool all_finite(const Mlp& net);

}  // namespace merge_arena
