#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pimpc/dynamics.hpp"
#include "pimpc/parallel.hpp"

namespace pimpc {

struct PiConfig {
  int num_rollouts = 1000;
  // Stochastic propagations per rollout; 1 means a single mean-mode pass.
  int sub_rollouts = 1;
  int horizon_steps = 50;
  int iterations_per_step = 2;
  double temperature = 0.1;
  // Per-channel standard deviation: roll, pitch, yaw rate (rad/s), thrust (N).
  std::array<double, 4> exploration_std = {3.0, 3.0, 1.5, 0.05};
  std::uint64_t rng_seed = 0;
  // Tail costs are capped here; capped rollouts are flagged as diverged.
  double cost_ceiling = 1e8;

  void validate() const;  // throws InputError
};

struct ControlPlan {
  std::vector<Control> controls;
  double dt = 0.02;
  double origin_time = 0.0;

  std::size_t size() const { return controls.size(); }
  static ControlPlan hover(std::size_t steps, const QuadParams& params);
};

// K x N x 4 control perturbations, rollout-major.
class NoiseArray {
 public:
  NoiseArray() = default;
  NoiseArray(int rollouts, int steps);

  int rollouts() const { return rollouts_; }
  int steps() const { return steps_; }
  std::array<double, 4>& at(int k, int i) { return data_[index(k, i)]; }
  const std::array<double, 4>& at(int k, int i) const { return data_[index(k, i)]; }
  bool operator==(const NoiseArray&) const = default;

 private:
  std::size_t index(int k, int i) const {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(steps_) +
           static_cast<std::size_t>(i);
  }
  int rollouts_ = 0;
  int steps_ = 0;
  std::vector<std::array<double, 4>> data_;
};

struct RolloutBatch {
  NoiseArray noise;
  // Entry (k, i): tail cost from step i, averaged over sub-rollouts.
  std::vector<double> costs_to_go;
  std::vector<std::uint8_t> crash_flags;
  std::vector<std::uint8_t> diverged_flags;

  int rollouts() const { return noise.rollouts(); }
  int steps() const { return noise.steps(); }
  double cost(int k, int i) const {
    return costs_to_go[static_cast<std::size_t>(k) * static_cast<std::size_t>(steps()) +
                       static_cast<std::size_t>(i)];
  }
};

// Instantaneous state cost seen by the planner.
class StageCost {
 public:
  virtual ~StageCost() = default;
  virtual bool crashed(const QuadState& s) const = 0;
  // `crashed` is sticky within a rollout once the crash predicate fires.
  virtual double cost(const QuadState& s, bool crashed) const = 0;
};

// Counter-based draws. Every entry is a pure function of
// (seed, cycle, iteration, rollout, [sub-rollout,] timestep).
NoiseArray sample_noise(const PiConfig& config, std::uint64_t cycle, int iteration);
AccelNoise subrollout_noise(std::uint64_t seed, std::uint64_t cycle, int iteration,
                            int rollout, int sub_rollout, int step);

struct RolloutContext {
  int sub_rollouts = 1;
  std::uint64_t seed = 0;
  std::uint64_t cycle = 0;
  int iteration = 0;
  double cost_ceiling = 1e8;
};

// Propagates plan + noise_k through the model (M times in sample mode for
// stochastic models, once in mean mode otherwise) and accumulates
// S(k, i) = sum_{j >= i} q(x_{j+1}) dt, with zero terminal cost.
RolloutBatch evaluate_rollouts(const QuadState& state, const ControlPlan& plan,
                               NoiseArray noise, const DynamicsModel& model,
                               const StageCost& cost, const RolloutContext& context,
                               WorkerPool& pool);

// w_k = exp(-(S_k - min S) / lambda) / Z, summed in index order.
std::vector<double> path_weights(std::span<const double> costs, double temperature);

// Per-timestep exponentially weighted average of the injected noise, added to
// the plan and clamped to actuator limits.
ControlPlan path_integral_update(const ControlPlan& plan, const RolloutBatch& batch,
                                 double temperature, const QuadParams& params);

// Drops the first control and repeats the last one at the horizon end.
ControlPlan shift_plan(const ControlPlan& plan);

struct StepResult {
  Control control;         // executed now
  ControlPlan carried;     // warm start for the next cycle
  ControlPlan optimized;   // full plan before shifting
};

class PathIntegralController {
 public:
  explicit PathIntegralController(PiConfig config, std::size_t workers = 1);

  const PiConfig& config() const { return config_; }
  std::size_t workers() const { return pool_->size(); }

  // iterations_per_step rounds of sample -> evaluate -> update.
  ControlPlan optimize(const QuadState& state, ControlPlan plan, const DynamicsModel& model,
                       const StageCost& cost, std::uint64_t cycle) const;

  StepResult step(const QuadState& state, const ControlPlan& plan,
                  const DynamicsModel& model, const StageCost& cost,
                  std::uint64_t cycle) const;

 private:
  PiConfig config_;
  std::unique_ptr<WorkerPool> pool_;
};

}  // namespace pimpc
