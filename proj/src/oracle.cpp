#include "merge_arena/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <unordered_set>

namespace merge_arena {

namespace {

constexpr double kQuantum = 1e7;  // state dedup resolution: 1e-7 m, 1e-7 m/s

std::uint64_t mix(std::uint64_t h, std::uint64_t x) {
  h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  return h ^ (h >> 27);
}

std::uint64_t q(double x) { return static_cast<std::uint64_t>(std::llround(x * kQuantum)); }

long long micro(double seconds) { return std::llround(seconds * 1e6); }

struct TrafficAccel {
  VehicleId id;
  double accel;
};

struct Node {
  Scene scene;
  std::vector<TrafficAccel> traffic;
  std::vector<std::uint8_t> plan;  // level indices
  long long sub = 0;
};

enum class Outcome { alive, dead, success };

// Coast first, then speeding up, then slowing down, strongest first within each.
std::vector<std::size_t> preference_order(const std::vector<double>& levels) {
  std::vector<std::size_t> order(levels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double x = levels[a];
    const double y = levels[b];
    const int ka = x == 0.0 ? 0 : (x > 0.0 ? 1 : 2);
    const int kb = y == 0.0 ? 0 : (y > 0.0 ? 1 : 2);
    return ka != kb ? ka < kb : std::abs(x) > std::abs(y);
  });
  return order;
}

class Search {
 public:
  Search(const SimParams& sim, const OracleSettings& settings, long long& nodes)
      : settings_(settings), nodes_(nodes) {
    const long long step = micro(sim.dt);
    const long long decision = micro(settings.decision_interval);
    const long long sub = std::gcd(step, decision);
    sub_dt_ = static_cast<double>(sub) / 1e6;
    subs_per_step_ = step / sub;
    subs_per_decision_ = decision / sub;
    const auto [lo, hi] = std::minmax_element(settings.levels.begin(), settings.levels.end());
    brake_ = *lo;
    boost_ = *hi;

    // The first branch tried at every node repeats the previous decision.
    order_ = preference_order(settings.levels);
  }

  bool run(Node root, std::vector<std::uint8_t>& plan) {
    visited_.clear();
    const long long limit = nodes_ + settings_.node_budget;
    std::vector<Node> stack;
    stack.push_back(std::move(root));
    std::vector<std::size_t> branch;
    while (!stack.empty()) {
      Node node = std::move(stack.back());
      stack.pop_back();
      branch = order_;
      if (!node.plan.empty()) {
        const auto it = std::find(branch.begin(), branch.end(), node.plan.back());
        std::rotate(branch.begin(), it, it + 1);
      }
      // Pushed in reverse so the preferred branch is expanded next.
      for (auto it = branch.rbegin(); it != branch.rend(); ++it) {
        if (++nodes_ > limit) {
          throw OracleOverflow("oracle node budget of " + std::to_string(settings_.node_budget) +
                               " exhausted");
        }
        Node child = node;
        child.plan.push_back(static_cast<std::uint8_t>(*it));
        const Outcome out = expand(child, settings_.levels[*it]);
        if (out == Outcome::success) {
          plan = std::move(child.plan);
          return true;
        }
        if (out == Outcome::dead) continue;
        if (visited_.insert(key(child)).second) stack.push_back(std::move(child));
      }
    }
    return false;
  }

  void assign_new(Node& node) const {
    const auto& ego = node.scene.ego();
    for (const auto& v : node.scene.vehicles) {
      if (v.role != Role::traffic) continue;
      const bool known = std::any_of(node.traffic.begin(), node.traffic.end(),
                                     [&](const TrafficAccel& t) { return t.id == v.id; });
      if (known) continue;
      double a = 0.0;
      if (settings_.mode == OracleMode::cooperative) a = v.pos < ego.pos ? brake_ : boost_;
      node.traffic.push_back({v.id, a});
    }
  }

 private:
  double traffic_accel(const Node& node, VehicleId id) const {
    for (const auto& t : node.traffic) {
      if (t.id == id) return t.accel;
    }
    return 0.0;
  }

  Outcome expand(Node& node, double level) const {
    Scene& s = node.scene;
    for (long long i = 0; i < subs_per_decision_; ++i) {
      const bool step_start = node.sub % subs_per_step_ == 0;
      for (auto& v : s.vehicles) {
        const double a = v.role == Role::ego ? level : traffic_accel(node, v.id);
        const double start = v.prev_pos;
        v = step_vehicle(v, a, sub_dt_, s.params);
        if (!step_start) v.prev_pos = start;  // fault rules look back one whole step
      }
      ++node.sub;
      if (node.sub % subs_per_step_ != 0) continue;
      resolve_step(s);
      if (s.status == Status::success) return Outcome::success;
      if (s.terminal()) return Outcome::dead;
      assign_new(node);
    }
    return Outcome::alive;
  }

  std::uint64_t key(const Node& node) const {
    std::uint64_t h = mix(0, static_cast<std::uint64_t>(node.sub));
    for (const auto& v : node.scene.vehicles) {
      h = mix(h, v.id);
      h = mix(h, q(v.pos));
      h = mix(h, q(v.vel));
      h = mix(h, q(v.prev_pos));
      h = mix(h, v.cleared_step ? static_cast<std::uint64_t>(*v.cleared_step) : ~0ULL);
      if (v.role == Role::traffic) h = mix(h, q(traffic_accel(node, v.id)));
    }
    return h;
  }

  const OracleSettings& settings_;
  long long& nodes_;
  double sub_dt_ = 0.1;
  long long subs_per_step_ = 1;
  long long subs_per_decision_ = 5;
  double brake_ = -5.0;
  double boost_ = 4.0;
  std::vector<std::size_t> order_;
  std::unordered_set<std::uint64_t> visited_;
};

}  // namespace

OracleSettings OracleSettings::fine(OracleMode mode) {
  OracleSettings s;
  s.mode = mode;
  s.decision_interval = 0.25;
  s.levels = {-5.0, -2.5, 0.0, 2.0, 4.0};
  s.node_budget = 40'000'000;
  return s;
}

void OracleSettings::validate(const SimParams& sim) const {
  if (!(decision_interval > 0.0)) throw ConfigError("oracle decision interval must be positive");
  const long long d = micro(decision_interval);
  if (std::abs(static_cast<double>(d) / 1e6 - decision_interval) > 1e-12 || d <= 0) {
    throw ConfigError("oracle decision interval must be a whole number of microseconds");
  }
  if (levels.empty()) throw ConfigError("oracle needs at least one action level");
  for (double a : levels) {
    if (a < sim.accel_min || a > sim.accel_max) {
      throw ConfigError("oracle action levels must lie inside the acceleration bounds");
    }
  }
  if (node_budget <= 0) throw ConfigError("oracle node budget must be positive");
}

OracleVerdict ideal_oracle(const SceneConfig& cell, const SimParams& sim,
                           const OracleSettings& settings) {
  if (cell.variant != Variant::three_vehicle) {
    throw ConfigError("the ideal oracle covers the three-vehicle scene only");
  }
  settings.validate(sim);
  const Scene start = init_episode(cell, sim);

  std::vector<double> traffic_levels{0.0};
  if (settings.mode == OracleMode::cooperative) {
    traffic_levels.clear();
    for (auto i : preference_order(settings.levels)) traffic_levels.push_back(settings.levels[i]);
  }

  // Each traffic pair gets the full budget. A pair that runs out does not
  // decide the cell: another pair may still succeed, and only a cell with no
  // success and an incomplete pair is reported as an overflow.
  OracleVerdict verdict;
  Search search(sim, settings, verdict.nodes);
  std::optional<OracleOverflow> overflow;
  for (double rear : traffic_levels) {
    for (double front : traffic_levels) {
      Node root{start, {}, {}, 0};
      // init_episode lists the ego, then the rear and front traffic vehicles.
      root.traffic.push_back({start.vehicles[1].id, rear});
      root.traffic.push_back({start.vehicles[2].id, front});
      std::vector<std::uint8_t> plan;
      try {
        if (!search.run(std::move(root), plan)) continue;
      } catch (const OracleOverflow& e) {
        if (!overflow) overflow = e;
        continue;
      }
      verdict.avoidable = true;
      verdict.rear_traffic_accel = rear;
      verdict.front_traffic_accel = front;
      for (auto i : plan) verdict.ego_plan.push_back(settings.levels[i]);
      return verdict;
    }
  }
  if (overflow) throw *overflow;
  return verdict;
}

std::vector<int> oracle_grid(const TestGrid& grid, const SimParams& sim,
                             const OracleSettings& settings, int jobs) {
  grid.validate();
  std::vector<SceneConfig> cells;
  for (double g : grid.gaps) {
    for (double r : grid.ramp_lengths) {
      for (double d : grid.start_differentials) {
        cells.push_back(test_scene_config(grid, Variant::three_vehicle, r, d, g,
                                          PolicyKind::constant, sim));
      }
    }
  }
  std::vector<int> out(cells.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out[i] = ideal_oracle(cells[i], sim, settings).avoidable ? 1 : 0;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace merge_arena
