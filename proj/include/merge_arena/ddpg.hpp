#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "merge_arena/mlp.hpp"
#include "merge_arena/observation.hpp"

namespace merge_arena {

inline constexpr int kHiddenWidth = 30;

// Actions live on [-5, 4] m/s^2; the networks see u = tanh(.) on [-1, 1].
inline constexpr double kActionScale = 4.5;
inline constexpr double kActionOffset = -0.5;

inline double action_from_unit(double u) { return kActionScale * u + kActionOffset; }
inline double unit_from_action(double a) { return (a - kActionOffset) / kActionScale; }

struct DdpgHyper {
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double gamma = 0.9;
  int batch = 32;
  int capacity = 10000;
  double tau = 1e-3;
  double noise_sigma0 = 4.5;   // m/s^2
  double noise_decay = 0.999995;  // per acting step

  void validate() const;
};

struct Transition {
  std::array<double, kMaxFeatures> obs{};       // network input (normalized features)
  double action = 0.0;                          // m/s^2, as applied
  double reward = 0.0;
  std::array<double, kMaxFeatures> next_obs{};  // ignored when done
  bool done = false;
};

// Thrown when an update produces a non-finite loss or weight.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(const Transition& t);
  // Uniform with replacement; throws std::logic_error when fewer than n items are held.
  std::vector<Transition> sample(std::mt19937_64& rng, std::size_t n) const;
  void sample_indices(std::mt19937_64& rng, std::span<std::size_t> out) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Oldest first.
  const Transition& operator[](std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
};

Mlp make_actor(int obs_dim);
Mlp make_critic(int obs_dim);

// `input` is the normalized feature vector; the result is an acceleration in [-5, 4].
double actor_forward(const Mlp& actor, std::span<const double> input);
double critic_forward(const Mlp& critic, std::span<const double> input, double action);

// Gradient of the actor's acceleration output w.r.t. every parameter.
Mlp::Grad actor_gradient(const Mlp& actor, std::span<const double> input);

struct CriticGradient {
  Mlp::Grad params;
  double d_action = 0.0;  // dQ/da with a in m/s^2
};
CriticGradient critic_gradient(const Mlp& critic, std::span<const double> input, double action);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

class DdpgLearner {
 public:
  DdpgLearner() = default;
  DdpgLearner(int obs_dim, const DdpgHyper& hyper, std::uint64_t seed);

  int obs_dim() const { return obs_dim_; }
  double act(std::span<const double> input) const { return actor_forward(actor, input); }
  double act(const ObservationVec& obs) const;

  // One critic step, one actor step, then a soft target update.
  UpdateStats update(std::span<const Transition> batch);
  // Samples hyper.batch transitions from the buffer; requires a prefilled buffer.
  UpdateStats update_from_buffer();
  bool ready() const { return buffer.size() >= static_cast<std::size_t>(hyper.batch); }

  DdpgHyper hyper;
  Mlp actor;
  Mlp critic;
  Mlp target_actor;
  Mlp target_critic;
  Adam actor_opt;
  Adam critic_opt;
  ReplayBuffer buffer;
  long long noise_step = 0;    // exploration decay counter
  long long update_count = 0;
  std::mt19937_64 rng;

 private:
  int obs_dim_ = 0;
};

double exploration_sigma(long long step, const DdpgHyper& hyper);
// a + N(0, sigma(step)^2), clipped to the action range.
double explore(double action, long long step, const DdpgHyper& hyper, std::mt19937_64& rng);

}  // namespace merge_arena
