#include "merge_arena/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "merge_arena/seeding.hpp"
#include "merge_arena/training.hpp"

namespace merge_arena {

namespace {

std::vector<double> steps(double lo, double hi, double step) {
  std::vector<double> out;
  for (double x = lo; x <= hi + 1e-9; x += step) out.push_back(std::round(x * 1e6) / 1e6);
  return out;
}

struct CellRun {
  std::vector<CellStats> per_policy;
  ActionSummary actions;
};

CellRun run_cell(const Mlp& merge_actor, const Mlp& traffic_actor, const TestGrid& grid,
                 Variant variant, const SimParams& sim, std::size_t index, double gap, double ramp,
                 double diff) {
  CellRun run;
  const auto cell_seed = derive_seed(grid.seed, index);
  for (std::size_t p = 0; p < grid.policies.size(); ++p) {
    CellStats stats;
    stats.gap = gap;
    stats.ramp_length = ramp;
    stats.start_differential = diff;
    stats.policy = grid.policies[p];
    std::vector<double> actions;
    for (int k = 0; k < grid.episodes_per_cell; ++k) {
      SceneConfig cfg = test_scene_config(grid, variant, ramp, diff, gap, grid.policies[p], sim);
      cfg.rng_seed = derive_seed(cell_seed, p * static_cast<std::size_t>(grid.episodes_per_cell) + k);
      const auto out = run_episode(cfg, sim, RewardSpec{}, Actors{&merge_actor, &traffic_actor});
      ++stats.episodes;
      switch (out.status) {
        case Status::collision: ++stats.collisions; break;
        case Status::success: ++stats.successes; break;
        default: ++stats.timeouts; break;
      }
      actions.insert(actions.end(), out.ego_actions.begin(), out.ego_actions.end());
    }
    stats.collision_pct = 100.0 * stats.collisions / stats.episodes;
    if (!actions.empty()) stats.actions = summarize_actions(actions);
    run.actions.merge(stats.actions);
    run.per_policy.push_back(stats);
  }
  return run;
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

}  // namespace

TestGrid TestGrid::defaults(Variant variant) {
  TestGrid g;
  g.ramp_lengths = steps(40.0, 260.0, 20.0);
  g.start_differentials = steps(-20.0, 20.0, 5.0);
  g.gaps = variant == Variant::three_vehicle ? std::vector<double>{5, 10, 15, 25, 100}
                                             : std::vector<double>{5, 15, 25};
  return g;
}

void TestGrid::validate() const {
  if (ramp_lengths.empty() || start_differentials.empty() || gaps.empty() || policies.empty()) {
    throw ConfigError("test grid axes must be non-empty");
  }
  if (episodes_per_cell < 1) throw ConfigError("grid.episodes_per_cell must be at least 1");
  for (double g : gaps) {
    if (!(g > 0.0)) throw ConfigError("grid gaps must be positive");
  }
  for (double r : ramp_lengths) {
    if (!(r > 0.0)) throw ConfigError("grid ramp lengths must be positive");
  }
  for (auto p : policies) {
    if (p == PolicyKind::merge_network) throw ConfigError("grid policies must be traffic policies");
  }
  if (!(tiv_test >= 0.0) || !(initial_speed >= 0.0)) {
    throw ConfigError("grid tiv and initial_speed must be non-negative");
  }
}

void ActionSummary::merge(const ActionSummary& other) {
  const double accel_sum = avg_accel * accel_count + other.avg_accel * other.accel_count;
  const double decel_sum = avg_decel * decel_count + other.avg_decel * other.decel_count;
  accel_count += other.accel_count;
  decel_count += other.decel_count;
  total += other.total;
  avg_accel = accel_count ? accel_sum / accel_count : 0.0;
  avg_decel = decel_count ? decel_sum / decel_count : 0.0;
  bias = total ? double(decel_count - accel_count) / double(total) : 0.0;
}

ActionSummary summarize_actions(std::span<const double> actions) {
  if (actions.empty()) throw std::invalid_argument("summarize_actions needs at least one action");
  ActionSummary s;
  double accel = 0.0;
  double decel = 0.0;
  for (double a : actions) {
    if (a > 0.0) {
      accel += a;
      ++s.accel_count;
    } else if (a < 0.0) {
      decel -= a;
      ++s.decel_count;
    }
  }
  s.total = static_cast<long long>(actions.size());
  s.avg_accel = s.accel_count ? accel / s.accel_count : 0.0;
  s.avg_decel = s.decel_count ? decel / s.decel_count : 0.0;
  s.bias = double(s.decel_count - s.accel_count) / double(s.total);
  return s;
}

int CollisionTable::total_collisions() const {
  int n = 0;
  for (const auto& c : cells) n += c.collisions;
  return n;
}

int CollisionTable::total_episodes() const {
  int n = 0;
  for (const auto& c : cells) n += c.episodes;
  return n;
}

const CellStats& CollisionTable::cell(double gap, double ramp, double diff) const {
  for (const auto& c : cells) {
    if (c.gap == gap && c.ramp_length == ramp && c.start_differential == diff) return c;
  }
  throw std::out_of_range("no cell at gap " + num(gap) + ", ramp " + num(ramp) + ", diff " + num(diff));
}

int GridResult::total_collisions() const {
  int n = 0;
  for (const auto& t : per_policy) n += t.total_collisions();
  return n;
}

int GridResult::total_episodes() const {
  int n = 0;
  for (const auto& t : per_policy) n += t.total_episodes();
  return n;
}

SceneConfig test_scene_config(const TestGrid& grid, Variant variant, double ramp, double diff,
                              double gap, PolicyKind policy, const SimParams& sim) {
  SceneConfig cfg;
  cfg.variant = variant;
  cfg.ramp_length = ramp;
  cfg.start_differential = diff;
  cfg.traffic_gap = gap;
  cfg.stream_tiv = grid.tiv_test;
  cfg.initial_speed = grid.initial_speed;
  cfg.merge_length = sim.test_vehicle_length;
  cfg.traffic_length = sim.test_vehicle_length;
  cfg.traffic_policy = policy;
  return cfg;
}

GridResult run_test_grid(const Mlp& merge_actor, const Mlp& traffic_actor, const TestGrid& grid,
                         Variant variant, const SimParams& sim, int jobs) {
  grid.validate();
  struct Coord {
    double gap, ramp, diff;
  };
  std::vector<Coord> coords;
  for (double g : grid.gaps) {
    for (double r : grid.ramp_lengths) {
      for (double d : grid.start_differentials) coords.push_back({g, r, d});
    }
  }
  std::vector<CellRun> runs(coords.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < coords.size(); i = next++) {
      try {
        runs[i] = run_cell(merge_actor, traffic_actor, grid, variant, sim, i, coords[i].gap,
                           coords[i].ramp, coords[i].diff);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = coords.size();
      }
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(coords.size(), 1)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  GridResult result;
  result.variant = variant;
  result.grid = grid;
  for (auto p : grid.policies) result.per_policy.push_back({p, {}});
  for (std::size_t i = 0; i < runs.size(); ++i) {
    CellStats mix;
    mix.gap = coords[i].gap;
    mix.ramp_length = coords[i].ramp;
    mix.start_differential = coords[i].diff;
    for (std::size_t p = 0; p < runs[i].per_policy.size(); ++p) {
      const auto& c = runs[i].per_policy[p];
      result.per_policy[p].cells.push_back(c);
      mix.episodes += c.episodes;
      mix.collisions += c.collisions;
      mix.successes += c.successes;
      mix.timeouts += c.timeouts;
      mix.collision_pct += c.collision_pct / double(runs[i].per_policy.size());
    }
    mix.actions = runs[i].actions;
    result.mixture.cells.push_back(mix);
    result.actions.merge(runs[i].actions);
  }
  return result;
}

long long select_best(std::span<const CheckpointSummary> summaries) {
  if (summaries.empty()) throw std::invalid_argument("select_best needs at least one summary");
  const auto better = [](const CheckpointSummary& a, const CheckpointSummary& b) {
    if (a.total_collisions != b.total_collisions) return a.total_collisions < b.total_collisions;
    if (a.decel_bias != b.decel_bias) return a.decel_bias > b.decel_bias;
    return a.episode < b.episode;
  };
  const CheckpointSummary* best = &summaries.front();
  for (const auto& s : summaries) {
    if (better(s, *best)) best = &s;
  }
  return best->episode;
}

CheckpointSummary summarize(const GridResult& result, long long episode) {
  CheckpointSummary s;
  s.episode = episode;
  s.total_collisions = result.total_collisions();
  s.decel_bias = result.actions.bias;
  s.avg_accel = result.actions.avg_accel;
  s.avg_decel = result.actions.avg_decel;
  return s;
}

std::string policy_label(const std::optional<PolicyKind>& policy) {
  return policy ? std::string(to_string(*policy)) : "mixture";
}

void write_table_csv(std::ostream& out, const CollisionTable& table, const std::vector<int>* oracle) {
  if (oracle && oracle->size() != table.cells.size()) {
    throw std::invalid_argument("oracle column does not match the table cells");
  }
  out << "gap,ramp_length,start_differential,policy,episodes,collisions,successes,timeouts,"
         "collision_pct,avg_accel,avg_decel,accel_count,decel_count";
  if (oracle) out << ",oracle_avoidable";
  out << '\n';
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    const auto& c = table.cells[i];
    out << num(c.gap) << ',' << num(c.ramp_length) << ',' << num(c.start_differential) << ','
        << policy_label(table.policy) << ',' << c.episodes << ',' << c.collisions << ','
        << c.successes << ',' << c.timeouts << ',' << num(c.collision_pct) << ','
        << num(c.actions.avg_accel) << ',' << num(c.actions.avg_decel) << ','
        << c.actions.accel_count << ',' << c.actions.decel_count;
    if (oracle) out << ',' << (*oracle)[i];
    out << '\n';
  }
}

void write_pivot_csv(std::ostream& out, const CollisionTable& table, const TestGrid& grid,
                     double gap) {
  out << "ramp_length";
  for (double d : grid.start_differentials) out << ',' << num(d);
  out << '\n';
  for (double r : grid.ramp_lengths) {
    out << num(r);
    for (double d : grid.start_differentials) out << ',' << num(table.cell(gap, r, d).collision_pct);
    out << '\n';
  }
}

}  // namespace merge_arena
