#include "pimpc/controller.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "pimpc/error.hpp"
#include "pimpc/rng.hpp"

namespace pimpc {

namespace {

constexpr std::uint64_t kControlDomain = 0x636f6e74726f6cull;   // "control"
constexpr std::uint64_t kDynamicsDomain = 0x64796e616d696373ull;  // "dynamics"

}  // namespace

void PiConfig::validate() const {
  if (num_rollouts < 1) throw InputError("num_rollouts must be >= 1");
  if (sub_rollouts < 1) throw InputError("sub_rollouts must be >= 1");
  if (horizon_steps < 1) throw InputError("horizon_steps must be >= 1");
  if (iterations_per_step < 0) throw InputError("iterations_per_step must be >= 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InputError("temperature must be positive and finite");
  }
  for (double s : exploration_std) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InputError("exploration_std entries must be positive and finite");
    }
  }
  if (!(cost_ceiling > 0.0)) throw InputError("cost_ceiling must be > 0");
}

ControlPlan ControlPlan::hover(std::size_t steps, const QuadParams& params) {
  ControlPlan plan;
  plan.controls.assign(steps, hover_control(params));
  plan.dt = params.dt;
  return plan;
}

NoiseArray::NoiseArray(int rollouts, int steps)
    : rollouts_(rollouts),
      steps_(steps),
      data_(static_cast<std::size_t>(rollouts) * static_cast<std::size_t>(steps)) {}

NoiseArray sample_noise(const PiConfig& config, std::uint64_t cycle, int iteration) {
  NoiseArray noise(config.num_rollouts, config.horizon_steps);
  const PhiloxKey key = derive_key(config.rng_seed, kControlDomain, cycle);
  const auto iter = static_cast<std::uint32_t>(iteration);
  for (int k = 0; k < config.num_rollouts; ++k) {
    for (int i = 0; i < config.horizon_steps; ++i) {
      const PhiloxCounter base{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k),
                               0u, 2u * iter};
      PhiloxCounter second = base;
      second[3] += 1u;
      const auto a = normal_pair(base, key);
      const auto b = normal_pair(second, key);
      auto& e = noise.at(k, i);
      e[0] = config.exploration_std[0] * a[0];
      e[1] = config.exploration_std[1] * a[1];
      e[2] = config.exploration_std[2] * b[0];
      e[3] = config.exploration_std[3] * b[1];
    }
  }
  return noise;
}

AccelNoise subrollout_noise(std::uint64_t seed, std::uint64_t cycle, int iteration,
                            int rollout, int sub_rollout, int step) {
  const PhiloxKey key = derive_key(seed, kDynamicsDomain, cycle);
  const PhiloxCounter base{static_cast<std::uint32_t>(step),
                           static_cast<std::uint32_t>(rollout),
                           static_cast<std::uint32_t>(sub_rollout),
                           2u * static_cast<std::uint32_t>(iteration)};
  PhiloxCounter second = base;
  second[3] += 1u;
  const auto a = normal_pair(base, key);
  const auto b = normal_pair(second, key);
  return {a[0], a[1], b[0]};
}

RolloutBatch evaluate_rollouts(const QuadState& state, const ControlPlan& plan,
                               NoiseArray noise, const DynamicsModel& model,
                               const StageCost& cost, const RolloutContext& context,
                               WorkerPool& pool) {
  const int K = noise.rollouts();
  const int N = noise.steps();
  if (static_cast<int>(plan.size()) != N) {
    throw InputError("noise horizon (" + std::to_string(N) +
                     ") does not match plan length (" + std::to_string(plan.size()) + ")");
  }
  if (context.sub_rollouts < 1) throw InputError("sub_rollouts must be >= 1");

  const QuadParams& params = model.params();
  const double dt = params.dt;
  const bool sampled = model.stochastic() && context.sub_rollouts > 1;
  const int passes = sampled ? context.sub_rollouts : 1;
  const SanityBox box;

  RolloutBatch batch;
  batch.costs_to_go.assign(static_cast<std::size_t>(K) * static_cast<std::size_t>(N), 0.0);
  batch.crash_flags.assign(static_cast<std::size_t>(K), 0);
  batch.diverged_flags.assign(static_cast<std::size_t>(K), 0);
  batch.noise = std::move(noise);
  const NoiseArray& eps = batch.noise;

  pool.parallel_for(static_cast<std::size_t>(K), [&](std::size_t begin, std::size_t end) {
    std::vector<Control> perturbed(static_cast<std::size_t>(N));
    std::vector<double> tail(static_cast<std::size_t>(N));
    for (std::size_t kk = begin; kk < end; ++kk) {
      const int k = static_cast<int>(kk);
      for (int i = 0; i < N; ++i) {
        const auto& e = eps.at(k, i);
        Control u = plan.controls[static_cast<std::size_t>(i)];
        u.desired_rates += Vec3(e[0], e[1], e[2]);
        u.thrust += e[3];
        perturbed[static_cast<std::size_t>(i)] = clamp_control(u, params);
      }
      double* row = batch.costs_to_go.data() + kk * static_cast<std::size_t>(N);
      bool any_crash = false;
      bool any_diverged = false;
      for (int m = 0; m < passes; ++m) {
        QuadState s = state;
        bool crashed = false;
        bool alive = true;
        for (int i = 0; i < N; ++i) {
          double q = std::numeric_limits<double>::infinity();
          if (alive) {
            if (sampled) {
              const AccelNoise z = subrollout_noise(context.seed, context.cycle,
                                                    context.iteration, k, m, i);
              s = model.step(s, perturbed[static_cast<std::size_t>(i)], &z);
            } else {
              s = model.step(s, perturbed[static_cast<std::size_t>(i)], nullptr);
            }
            if (box.contains(s)) {
              crashed = crashed || cost.crashed(s);
              q = cost.cost(s, crashed);
            } else {
              alive = false;
            }
          }
          tail[static_cast<std::size_t>(i)] = q * dt;
        }
        double acc = 0.0;
        for (int i = N - 1; i >= 0; --i) {
          acc += tail[static_cast<std::size_t>(i)];
          double v = acc;
          if (!(v <= context.cost_ceiling)) {  // also catches NaN
            v = context.cost_ceiling;
            any_diverged = true;
          }
          // Running mean keeps identical sub-rollouts bit-exact.
          row[i] += (v - row[i]) / static_cast<double>(m + 1);
        }
        any_crash = any_crash || crashed;
      }
      batch.crash_flags[kk] = any_crash ? 1 : 0;
      batch.diverged_flags[kk] = any_diverged ? 1 : 0;
    }
  });
  return batch;
}

std::vector<double> path_weights(std::span<const double> costs, double temperature) {
  std::vector<double> w(costs.size());
  if (costs.empty()) return w;
  const double best = *std::min_element(costs.begin(), costs.end());
  double total = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    w[k] = std::exp(-(costs[k] - best) / temperature);
    total += w[k];
  }
  // The minimum contributes exp(0) = 1.
  assert(total >= 1.0);
  for (double& v : w) v /= total;
  return w;
}

ControlPlan path_integral_update(const ControlPlan& plan, const RolloutBatch& batch,
                                 double temperature, const QuadParams& params) {
  const int K = batch.rollouts();
  const int N = batch.steps();
  if (static_cast<int>(plan.size()) != N ||
      batch.costs_to_go.size() != static_cast<std::size_t>(K) * static_cast<std::size_t>(N)) {
    throw InputError("rollout batch does not match plan dimensions");
  }
  if (!(temperature > 0.0)) throw InputError("temperature must be > 0");

  ControlPlan out = plan;
  std::vector<double> column(static_cast<std::size_t>(K));
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < K; ++k) column[static_cast<std::size_t>(k)] = batch.cost(k, i);
    const std::vector<double> w = path_weights(column, temperature);
    std::array<double, 4> delta{};
    for (int k = 0; k < K; ++k) {
      const auto& e = batch.noise.at(k, i);
      for (int c = 0; c < 4; ++c) delta[c] += w[static_cast<std::size_t>(k)] * e[c];
    }
    Control u = plan.controls[static_cast<std::size_t>(i)];
    u.desired_rates += Vec3(delta[0], delta[1], delta[2]);
    u.thrust += delta[3];
    out.controls[static_cast<std::size_t>(i)] = clamp_control(u, params);
  }
  return out;
}

ControlPlan shift_plan(const ControlPlan& plan) {
  ControlPlan out = plan;
  if (!out.controls.empty()) {
    std::rotate(out.controls.begin(), out.controls.begin() + 1, out.controls.end());
    out.controls.back() = plan.controls.back();
  }
  out.origin_time = plan.origin_time + plan.dt;
  return out;
}

PathIntegralController::PathIntegralController(PiConfig config, std::size_t workers)
    : config_(config), pool_(std::make_unique<WorkerPool>(workers)) {
  config_.validate();
}

ControlPlan PathIntegralController::optimize(const QuadState& state, ControlPlan plan,
                                             const DynamicsModel& model, const StageCost& cost,
                                             std::uint64_t cycle) const {
  if (static_cast<int>(plan.size()) != config_.horizon_steps) {
    throw InputError("plan length must equal horizon_steps");
  }
  for (int it = 0; it < config_.iterations_per_step; ++it) {
    RolloutContext ctx{config_.sub_rollouts, config_.rng_seed, cycle, it, config_.cost_ceiling};
    RolloutBatch batch = evaluate_rollouts(state, plan, sample_noise(config_, cycle, it),
                                           model, cost, ctx, *pool_);
    plan = path_integral_update(plan, batch, config_.temperature, model.params());
  }
  return plan;
}

StepResult PathIntegralController::step(const QuadState& state, const ControlPlan& plan,
                                        const DynamicsModel& model, const StageCost& cost,
                                        std::uint64_t cycle) const {
  StepResult r;
  r.optimized = optimize(state, plan, model, cost, cycle);
  r.control = r.optimized.controls.front();
  r.carried = shift_plan(r.optimized);
  return r;
}

}  // namespace pimpc
