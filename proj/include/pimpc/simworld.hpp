#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pimpc/controller.hpp"
#include "pimpc/dynamics.hpp"
#include "pimpc/flight_log.hpp"

namespace pimpc {

using Vec2 = Eigen::Vector2d;

struct Box {
  Vec3 lo = Vec3(-2.0, -2.0, 0.0);
  Vec3 hi = Vec3(2.0, 2.0, 2.5);
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

// Weights of the navigation state cost
//   q = (x-Wx)^2 + (y-Wy)^2 + 10 (z-Wz)^2 + 1/5 |angles|^2 + 1/10 |v|^2
//       + 100 sum_i exp(-10 (dx_i^2 + dy_i^2)) + 10 C
struct CostWeights {
  double position_xy = 1.0;
  double position_z = 10.0;
  double angles = 0.2;
  double velocity = 0.1;
  double obstacle = 100.0;
  double obstacle_sharpness = 10.0;
  double crash = 10.0;
};

struct Task {
  std::array<Vec3, 3> waypoints;
  std::vector<Vec2> obstacles;
  double waypoint_radius = 0.25;
  int laps = 4;
  Box arena;
  double z_floor = 0.05;
  Vec3 spawn = Vec3::Zero();
  CostWeights weights;

  // 4 x 4 x 2.5 m arena, waypoint triangle of side 2.5 m at 1 m altitude,
  // one obstacle at the midpoint of each leg, spawn on the last waypoint.
  static Task standard();
  int required_switches() const { return 3 * laps; }
  void validate() const;  // throws InputError
};

struct ProgressState {
  int waypoint = 0;
  int switches = 0;
  bool crashed = false;
};

enum class CrashKind { kNone, kCrashed, kOutOfBounds };

CrashKind crash_predicate(const QuadState& s, const Task& task);

double obstacle_cost(const Vec2& xy, const Task& task);

// q(x) against an explicit waypoint and crash indicator.
double stage_cost(const QuadState& s, const Task& task, const Vec3& waypoint, bool crashed);

// q(x) with the active waypoint from `progress` and C from the crash
// predicate evaluated at `s`.
double instantaneous_cost(const QuadState& s, const Task& task, const ProgressState& progress);

// Switches to the next waypoint when strictly inside waypoint_radius (3-D).
ProgressState advance_progress(const QuadState& s, const Task& task, ProgressState progress);

// Planner-side cost: fixed active waypoint, no knowledge of future switches.
class NavigationCost final : public StageCost {
 public:
  NavigationCost(const Task& task, int waypoint);
  bool crashed(const QuadState& s) const override;
  double cost(const QuadState& s, bool crashed) const override;

 private:
  const Task* task_;
  Vec3 waypoint_;
};

struct ClosestPasses {
  std::vector<double> passes;  // per-pass minimum xy obstacle distance, in order
  double avg_closest = std::numeric_limits<double>::quiet_NaN();
};

// A pass is a local minimum of the distance to the nearest obstacle, closed
// once the distance rises `hysteresis` above it. The average is over the
// `count` smallest passes (or all of them if fewer).
ClosestPasses closest_pass_metric(std::span<const Vec3> positions,
                                  std::span<const Vec2> obstacles,
                                  double hysteresis = 0.1, std::size_t count = 8);
ClosestPasses closest_pass_metric(std::span<const double> distances,
                                  double hysteresis = 0.1, std::size_t count = 8);

enum class Outcome { kCompleted, kCrashed, kOutOfBounds, kTimeout };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);  // throws FormatError

struct TrialMetrics {
  double completion_time = 0.0;
  double total_cost = 0.0;
  double avg_cost_per_sec_horizon = 0.0;
  ClosestPasses closest;
  Vec3 mean_prediction_variance = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
};

struct TrialResult {
  Outcome outcome = Outcome::kTimeout;
  int completed_switches = 0;
  TrialMetrics metrics;
  FlightLog log;
};

// Metrics are a pure function of the trajectory log.
TrialMetrics metrics_from_log(const FlightLog& log, const Task& task, double dt,
                              double horizon_seconds);

struct TrialOptions {
  int step_cap = 8000;
  std::size_t workers = 1;
  // When set, per-step predictive variances of this model at the executed
  // (state, command) are logged.
  const HybridModel* variance_probe = nullptr;
};

// Closed loop: the controller plans on `control_model`, `truth` advances the
// real state. The seed replaces config.rng_seed.
TrialResult run_trial(const Task& task, PiConfig config, const DynamicsModel& control_model,
                      const DynamicsModel& truth, std::uint64_t seed,
                      const TrialOptions& options = {});

// Gridded obstacle cost over the arena xy plane: rows of "x,y,cost".
void write_obstacle_grid(const std::string& path, const Task& task, double resolution);

}  // namespace pimpc
