#include "pimpc/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pimpc/error.hpp"

namespace pimpc {

Task Task::standard() {
  Task t;
  const double side = 2.5;
  const double radius = side / std::sqrt(3.0);
  const double altitude = 1.0;
  t.waypoints = {Vec3(0.0, radius, altitude),
                 Vec3(-side / 2.0, -radius / 2.0, altitude),
                 Vec3(side / 2.0, -radius / 2.0, altitude)};
  for (int i = 0; i < 3; ++i) {
    const Vec3 mid = 0.5 * (t.waypoints[static_cast<std::size_t>(i)] +
                            t.waypoints[static_cast<std::size_t>((i + 1) % 3)]);
    t.obstacles.emplace_back(mid(0), mid(1));
  }
  t.spawn = t.waypoints[2];
  return t;
}

void Task::validate() const {
  if (!(waypoint_radius > 0.0)) throw InputError("waypoint_radius must be > 0");
  if (laps < 1) throw InputError("laps must be >= 1");
  if (!(arena.lo.array() < arena.hi.array()).all()) {
    throw InputError("arena bounds are empty");
  }
  for (const Vec3& w : waypoints) {
    if (!arena.contains(w)) throw InputError("arena bounds must contain all waypoints");
  }
  if (!arena.contains(spawn)) throw InputError("spawn point lies outside the arena");
}

CrashKind crash_predicate(const QuadState& s, const Task& task) {
  if (s.position(2) <= task.z_floor) return CrashKind::kCrashed;
  if (!task.arena.contains(s.position)) return CrashKind::kOutOfBounds;
  return CrashKind::kNone;
}

double obstacle_cost(const Vec2& xy, const Task& task) {
  double sum = 0.0;
  for (const Vec2& o : task.obstacles) {
    const double dx = xy(0) - o(0);
    const double dy = xy(1) - o(1);
    sum += std::exp(-task.weights.obstacle_sharpness * (dx * dx + dy * dy));
  }
  return task.weights.obstacle * sum;
}

double stage_cost(const QuadState& s, const Task& task, const Vec3& waypoint, bool crashed) {
  const CostWeights& w = task.weights;
  const Vec3 e = s.position - waypoint;
  return w.position_xy * (e(0) * e(0) + e(1) * e(1)) + w.position_z * e(2) * e(2) +
         w.angles * s.angles.squaredNorm() + w.velocity * s.velocity.squaredNorm() +
         obstacle_cost(s.position.head<2>(), task) + (crashed ? w.crash : 0.0);
}

double instantaneous_cost(const QuadState& s, const Task& task, const ProgressState& progress) {
  const bool crashed = crash_predicate(s, task) != CrashKind::kNone;
  return stage_cost(s, task, task.waypoints[static_cast<std::size_t>(progress.waypoint)], crashed);
}

ProgressState advance_progress(const QuadState& s, const Task& task, ProgressState progress) {
  if (progress.switches >= task.required_switches()) return progress;
  const Vec3& target = task.waypoints[static_cast<std::size_t>(progress.waypoint)];
  if ((s.position - target).norm() < task.waypoint_radius) {
    progress.waypoint = (progress.waypoint + 1) % 3;
    ++progress.switches;
  }
  return progress;
}

NavigationCost::NavigationCost(const Task& task, int waypoint)
    : task_(&task), waypoint_(task.waypoints.at(static_cast<std::size_t>(waypoint))) {}

bool NavigationCost::crashed(const QuadState& s) const {
  return crash_predicate(s, *task_) != CrashKind::kNone;
}

double NavigationCost::cost(const QuadState& s, bool crashed) const {
  return stage_cost(s, *task_, waypoint_, crashed);
}

// ---------------------------------------------------------------------------

ClosestPasses closest_pass_metric(std::span<const double> distances, double hysteresis,
                                  std::size_t count) {
  ClosestPasses out;
  if (distances.empty()) return out;
  bool seeking_min = true;
  double low = distances.front();
  double high = distances.front();
  for (double d : distances) {
    if (seeking_min) {
      if (d < low) {
        low = d;
      } else if (d >= low + hysteresis) {
        out.passes.push_back(low);
        seeking_min = false;
        high = d;
      }
    } else {
      if (d > high) {
        high = d;
      } else if (d <= high - hysteresis) {
        seeking_min = true;
        low = d;
      }
    }
  }
  if (seeking_min) out.passes.push_back(low);

  std::vector<double> sorted = out.passes;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = std::min(count, sorted.size());
  if (n > 0) {
    out.avg_closest = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(n), 0.0) /
                      static_cast<double>(n);
  }
  return out;
}

ClosestPasses closest_pass_metric(std::span<const Vec3> positions,
                                  std::span<const Vec2> obstacles, double hysteresis,
                                  std::size_t count) {
  if (obstacles.empty()) return {};
  std::vector<double> d;
  d.reserve(positions.size());
  for (const Vec3& p : positions) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& o : obstacles) best = std::min(best, (p.head<2>() - o).norm());
    d.push_back(best);
  }
  return closest_pass_metric(d, hysteresis, count);
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kCompleted: return "completed";
    case Outcome::kCrashed: return "crashed";
    case Outcome::kOutOfBounds: return "out_of_bounds";
    case Outcome::kTimeout: return "timeout";
  }
  return "unknown";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "completed") return Outcome::kCompleted;
  if (s == "crashed") return Outcome::kCrashed;
  if (s == "out_of_bounds") return Outcome::kOutOfBounds;
  if (s == "timeout") return Outcome::kTimeout;
  throw FormatError("unknown outcome '" + s + "'", 0);
}

TrialMetrics metrics_from_log(const FlightLog& log, const Task& task, double dt,
                              double horizon_seconds) {
  TrialMetrics m;
  const auto& rows = log.rows;
  m.completion_time = static_cast<double>(rows.size()) * dt;
  std::vector<Vec3> positions;
  positions.reserve(rows.size());
  Vec3 var_sum = Vec3::Zero();
  double plan_sum = 0.0;
  for (const LogRow& r : rows) {
    m.total_cost += r.q_cost * dt;
    plan_sum += r.plan_cost / horizon_seconds;
    var_sum += r.lwpr_variance;
    positions.push_back(r.state.position);
  }
  if (!rows.empty()) {
    const auto n = static_cast<double>(rows.size());
    m.avg_cost_per_sec_horizon = plan_sum / n;
    m.mean_prediction_variance = var_sum / n;
  }
  m.closest = closest_pass_metric(positions, task.obstacles);
  return m;
}

TrialResult run_trial(const Task& task, PiConfig config, const DynamicsModel& control_model,
                      const DynamicsModel& truth, std::uint64_t seed,
                      const TrialOptions& options) {
  task.validate();
  config.rng_seed = seed;
  const PathIntegralController controller(config, options.workers);
  const QuadParams& params = truth.params();
  const double dt = params.dt;
  const auto horizon = static_cast<std::size_t>(config.horizon_steps);

  QuadState state;
  state.position = task.spawn;
  ControlPlan plan = ControlPlan::hover(horizon, control_model.params());
  ProgressState progress;

  TrialResult result;
  result.log.extended = true;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int step = 0;; ++step) {
    progress = advance_progress(state, task, progress);
    const CrashKind crash = crash_predicate(state, task);
    if (crash == CrashKind::kCrashed) {
      result.outcome = Outcome::kCrashed;
      break;
    }
    if (crash == CrashKind::kOutOfBounds) {
      result.outcome = Outcome::kOutOfBounds;
      break;
    }
    if (progress.switches >= task.required_switches()) {
      result.outcome = Outcome::kCompleted;
      break;
    }
    if (step >= options.step_cap) {
      result.outcome = Outcome::kTimeout;
      break;
    }

    const NavigationCost cost(task, progress.waypoint);
    const StepResult planned =
        controller.step(state, plan, control_model, cost, static_cast<std::uint64_t>(step));

    // Nominal (mean-mode) cost of the optimized plan over the horizon.
    const Propagation nominal =
        propagate(control_model, state, planned.optimized.controls, horizon);
    double plan_cost = 0.0;
    bool sticky = false;
    for (std::size_t i = 1; i < nominal.states.size(); ++i) {
      sticky = sticky || cost.crashed(nominal.states[i]);
      plan_cost += cost.cost(nominal.states[i], sticky) * control_model.params().dt;
    }

    LogRow row;
    row.t = static_cast<double>(step) * dt;
    row.state = state;
    row.command = planned.control;
    row.active_waypoint = progress.waypoint;
    row.q_cost = instantaneous_cost(state, task, progress);
    row.plan_cost = plan_cost;
    if (options.variance_probe != nullptr) {
      row.lwpr_variance = options.variance_probe->predict(state, planned.control).variance;
    } else {
      row.lwpr_variance = Vec3::Constant(nan);
    }

    const QuadState next = truth.step(state, planned.control, nullptr);
    row.accel = (next.velocity - state.velocity) / dt;
    result.log.rows.push_back(row);

    state = next;
    plan = planned.carried;
  }
  result.completed_switches = progress.switches;
  result.metrics = metrics_from_log(result.log, task, dt,
                                    static_cast<double>(config.horizon_steps) * dt);
  return result;
}

void write_obstacle_grid(const std::string& path, const Task& task, double resolution) {
  if (!(resolution > 0.0)) throw InputError("grid resolution must be > 0");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "x,y,obstacle_cost\n";
  const auto nx = static_cast<int>(std::floor((task.arena.hi(0) - task.arena.lo(0)) / resolution));
  const auto ny = static_cast<int>(std::floor((task.arena.hi(1) - task.arena.lo(1)) / resolution));
  char buf[96];
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const Vec2 p(task.arena.lo(0) + i * resolution, task.arena.lo(1) + j * resolution);
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.9g\n", p(0), p(1), obstacle_cost(p, task));
      os << buf;
    }
  }
}

}  // namespace pimpc
