#include "merge_arena/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace merge_arena {

namespace {

void check_dim(const Mlp& net, std::size_t got, int extra, const char* who) {
  if (static_cast<int>(got) + extra != net.input_dim()) {
    throw std::invalid_argument(std::string(who) + ": input has " + std::to_string(got) +
                                " features, network expects " +
                                std::to_string(net.input_dim() - extra));
  }
}

Eigen::MatrixXd column(std::span<const double> input, std::size_t rows) {
  Eigen::MatrixXd x(rows, 1);
  for (std::size_t i = 0; i < input.size(); ++i) x(i, 0) = input[i];
  return x;
}

}  // namespace

void DdpgHyper::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("ddpg.gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("ddpg.tau must lie in (0, 1]");
  if (batch <= 0 || capacity <= 0 || batch > capacity) {
    throw ConfigError("ddpg.batch must satisfy 0 < batch <= capacity");
  }
  if (!(lr_actor >= 0.0 && lr_critic >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (!(noise_sigma0 >= 0.0)) throw ConfigError("ddpg.noise_sigma0 must be >= 0");
  if (!(noise_decay > 0.0 && noise_decay <= 1.0)) {
    throw ConfigError("ddpg.noise_decay must lie in (0, 1]");
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (items_.size() < capacity_) {
    items_.push_back(t);
    return;
  }
  items_[head_] = t;
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  return items_[(head_ + i) % items_.size()];
}

void ReplayBuffer::sample_indices(std::mt19937_64& rng, std::span<std::size_t> out) const {
  if (items_.size() < out.size() || items_.empty()) {
    throw std::logic_error("replay buffer holds " + std::to_string(items_.size()) +
                           " transitions, cannot sample " + std::to_string(out.size()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  for (auto& i : out) i = pick(rng);
}

std::vector<Transition> ReplayBuffer::sample(std::mt19937_64& rng, std::size_t n) const {
  std::vector<std::size_t> idx(n);
  sample_indices(rng, idx);
  std::vector<Transition> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(items_[i]);
  return out;
}

Mlp make_actor(int obs_dim) {
  return Mlp({obs_dim, kHiddenWidth, kHiddenWidth, 1}, Mlp::Head::tanh);
}

Mlp make_critic(int obs_dim) {
  return Mlp({obs_dim + 1, kHiddenWidth, kHiddenWidth, 1}, Mlp::Head::linear);
}

double actor_forward(const Mlp& actor, std::span<const double> input) {
  check_dim(actor, input.size(), 0, "actor_forward");
  return action_from_unit(actor.forward(column(input, input.size()))(0, 0));
}

double critic_forward(const Mlp& critic, std::span<const double> input, double action) {
  check_dim(critic, input.size(), 1, "critic_forward");
  Eigen::MatrixXd x = column(input, input.size() + 1);
  x(input.size(), 0) = unit_from_action(action);
  return critic.forward(x)(0, 0);
}

Mlp::Grad actor_gradient(const Mlp& actor, std::span<const double> input) {
  check_dim(actor, input.size(), 0, "actor_gradient");
  Mlp::Cache cache;
  actor.forward(column(input, input.size()), &cache);
  Mlp::Grad grad = actor.zero_grad();
  actor.backward(cache, Eigen::MatrixXd::Constant(1, 1, kActionScale), &grad, nullptr);
  return grad;
}

CriticGradient critic_gradient(const Mlp& critic, std::span<const double> input, double action) {
  check_dim(critic, input.size(), 1, "critic_gradient");
  Eigen::MatrixXd x = column(input, input.size() + 1);
  x(input.size(), 0) = unit_from_action(action);
  Mlp::Cache cache;
  critic.forward(x, &cache);
  CriticGradient out;
  out.params = critic.zero_grad();
  Eigen::MatrixXd d_input;
  critic.backward(cache, Eigen::MatrixXd::Ones(1, 1), &out.params, &d_input);
  out.d_action = d_input(input.size(), 0) / kActionScale;
  return out;
}

DdpgLearner::DdpgLearner(int obs_dim, const DdpgHyper& hyper_, std::uint64_t seed)
    : hyper(hyper_),
      actor(make_actor(obs_dim)),
      critic(make_critic(obs_dim)),
      buffer(static_cast<std::size_t>(hyper_.capacity)),
      rng(seed),
      obs_dim_(obs_dim) {
  hyper.validate();
  actor.init(rng);
  critic.init(rng);
  target_actor = actor;
  target_critic = critic;
  actor_opt.reset(actor);
  critic_opt.reset(critic);
}

double DdpgLearner::act(const ObservationVec& obs) const {
  if (static_cast<int>(obs.size()) != obs_dim_) {
    throw std::invalid_argument("observation has " + std::to_string(obs.size()) +
                                " features, learner expects " + std::to_string(obs_dim_));
  }
  const auto x = obs.normalized();
  return act(std::span<const double>(x.data(), obs.size()));
}

UpdateStats DdpgLearner::update(std::span<const Transition> batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw std::invalid_argument("ddpg update needs a non-empty batch");
  const int d = obs_dim_;

  Eigen::MatrixXd s(d, n), s_next(d, n);
  Eigen::RowVectorXd u(n), r(n), not_done(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& tr = batch[k];
    for (int i = 0; i < d; ++i) {
      s(i, k) = tr.obs[i];
      s_next(i, k) = tr.next_obs[i];
    }
    u(k) = unit_from_action(tr.action);
    r(k) = tr.reward;
    not_done(k) = tr.done ? 0.0 : 1.0;
  }

  // Bootstrapped targets from the target networks.
  Eigen::MatrixXd target_in(d + 1, n);
  target_in.topRows(d) = s_next;
  target_in.row(d) = target_actor.forward(s_next);
  Eigen::RowVectorXd q_next = target_critic.forward(target_in);
  Eigen::RowVectorXd y = r;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (not_done(k) != 0.0) y(k) += hyper.gamma * q_next(k);
  }

  // Critic regression step.
  Eigen::MatrixXd critic_in(d + 1, n);
  critic_in.topRows(d) = s;
  critic_in.row(d) = u;
  Mlp::Cache critic_cache;
  Eigen::RowVectorXd q = critic.forward(critic_in, &critic_cache);
  Eigen::RowVectorXd err = q - y;
  const double critic_loss = err.squaredNorm() / static_cast<double>(n);
  Mlp::Grad critic_grad = critic.zero_grad();
  critic.backward(critic_cache, (2.0 / static_cast<double>(n)) * err, &critic_grad, nullptr);
  critic_opt.step(critic, critic_grad, hyper.lr_critic);

  // Actor ascends Q(s, mu(s)).
  Mlp::Cache actor_cache;
  Eigen::MatrixXd policy_in(d + 1, n);
  policy_in.topRows(d) = s;
  policy_in.row(d) = actor.forward(s, &actor_cache);
  Mlp::Cache policy_cache;
  Eigen::RowVectorXd q_pi = critic.forward(policy_in, &policy_cache);
  const double actor_objective = q_pi.mean();
  Eigen::MatrixXd d_policy_in;
  critic.backward(policy_cache, Eigen::MatrixXd::Constant(1, n, -1.0 / static_cast<double>(n)),
                  nullptr, &d_policy_in);
  Mlp::Grad actor_grad = actor.zero_grad();
  actor.backward(actor_cache, d_policy_in.row(d), &actor_grad, nullptr);
  actor_opt.step(actor, actor_grad, hyper.lr_actor);

  soft_update(target_critic, critic, hyper.tau);
  soft_update(target_actor, actor, hyper.tau);
  ++update_count;

  if (!std::isfinite(critic_loss) || !std::isfinite(actor_objective) || !all_finite(critic) ||
      !all_finite(actor)) {
    throw NumericalError("non-finite value in ddpg update " + std::to_string(update_count) +
                         " (critic loss " + std::to_string(critic_loss) + ", actor objective " +
                         std::to_string(actor_objective) + ")");
  }
  return {critic_loss, actor_objective};
}

UpdateStats DdpgLearner::update_from_buffer() {
  std::vector<std::size_t> idx(static_cast<std::size_t>(hyper.batch));
  buffer.sample_indices(rng, idx);
  std::vector<Transition> batch;
  batch.reserve(idx.size());
  for (auto i : idx) batch.push_back(buffer[i]);
  return update(batch);
}

double exploration_sigma(long long step, const DdpgHyper& hyper) {
  return hyper.noise_sigma0 * std::pow(hyper.noise_decay, static_cast<double>(step));
}

double explore(double action, long long step, const DdpgHyper& hyper, std::mt19937_64& rng) {
  const double sigma = exploration_sigma(step, hyper);
  double noisy = action;
  if (sigma > 0.0) noisy += std::normal_distribution<double>(0.0, sigma)(rng);
  return std::clamp(noisy, kActionOffset - kActionScale, kActionOffset + kActionScale);
}

}  // namespace merge_arena
