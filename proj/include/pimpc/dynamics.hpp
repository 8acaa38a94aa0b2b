#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pimpc/lwpr.hpp"

namespace pimpc {

using Vec3 = Eigen::Vector3d;

// Vehicle state. Angles are roll, pitch, yaw (Z-Y-X Euler); `rates` are the
// actual attitude rates tracked by the onboard rate loop.
struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 angles = Vec3::Zero();
  Vec3 rates = Vec3::Zero();

  bool operator==(const QuadState&) const = default;
};

// Desired attitude rates (rad/s) and total thrust (N).
struct Control {
  Vec3 desired_rates = Vec3::Zero();
  double thrust = 0.0;

  bool operator==(const Control&) const = default;
};

struct QuadParams {
  double mass = 0.019;      // kg
  double gravity = 9.81;    // m/s^2
  double rate_gain = 25.0;  // 1/s, first-order rate tracking
  double thrust_max = 2.0 * 0.019 * 9.81;
  double rate_max = 10.0;   // rad/s
  double dt = 0.02;         // s

  double hover_thrust() const { return mass * gravity; }
  void validate() const;  // throws InputError
};

Control clamp_control(Control u, const QuadParams& params);
Control hover_control(const QuadParams& params);

double wrap_angle(double a);  // to (-pi, pi]

// World-frame acceleration of the rigid-body model: (F/m) R(roll, pitch, yaw) e_z - g e_z.
Vec3 accel_analytic(const QuadState& s, const Control& u, const QuadParams& params);

// One explicit Euler step given the translational acceleration. Position
// integrates the pre-step velocity, angles the pre-step rates.
QuadState integrate(const QuadState& s, const Control& u, const Vec3& accel,
                    const QuadParams& params);

QuadState step_analytic(const QuadState& s, const Control& u, const QuadParams& params);

// ---------------------------------------------------------------------------
// learned model

// Input vector (roll, pitch, yaw, thrust) fed to each acceleration regressor.
std::array<double, 4> learned_input(const QuadState& s, const Control& u);

struct AccelPrediction {
  Vec3 mean = Vec3::Zero();
  Vec3 variance = Vec3::Zero();
};

// Three independent regressors for the world-frame accelerations.
class HybridModel {
 public:
  explicit HybridModel(std::array<lwpr::LwprModel, 3> axes);

  static HybridModel untrained(const lwpr::Hyperparams& params);

  const lwpr::LwprModel& axis(int i) const { return axes_[static_cast<std::size_t>(i)]; }
  lwpr::LwprModel& axis(int i) { return axes_[static_cast<std::size_t>(i)]; }
  bool trained() const;

  // Throws ModelError if any axis has no receptive fields.
  AccelPrediction predict(const QuadState& s, const Control& u) const;

  // Three concatenated LWPR1 streams (x, y, z).
  std::vector<std::uint8_t> save() const;
  static HybridModel load(std::span<const std::uint8_t> bytes);

 private:
  std::array<lwpr::LwprModel, 3> axes_;
};

enum class PredictionMode { kMean, kSample };

using AccelNoise = std::array<double, 3>;

// mean: accelerations are the predicted means. sample: mean + sqrt(var) *
// noise per axis.
QuadState step_learned(const QuadState& s, const Control& u, const QuadParams& params,
                       const HybridModel& model, PredictionMode mode,
                       const AccelNoise& noise = {0.0, 0.0, 0.0});

// ---------------------------------------------------------------------------
// polymorphic models used by rollouts and trials

class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  // True when step() consumes noise; deterministic models ignore it.
  virtual bool stochastic() const = 0;
  virtual const QuadParams& params() const = 0;
  // noise == nullptr selects the mean prediction.
  virtual QuadState step(const QuadState& s, const Control& u,
                         const AccelNoise* noise) const = 0;
};

class AnalyticModel final : public DynamicsModel {
 public:
  explicit AnalyticModel(QuadParams params = {});
  bool stochastic() const override { return false; }
  const QuadParams& params() const override { return params_; }
  QuadState step(const QuadState& s, const Control& u,
                 const AccelNoise* noise) const override;

 private:
  QuadParams params_;
};

class LearnedModel final : public DynamicsModel {
 public:
  LearnedModel(HybridModel model, QuadParams params = {});
  bool stochastic() const override { return true; }
  const QuadParams& params() const override { return params_; }
  QuadState step(const QuadState& s, const Control& u,
                 const AccelNoise* noise) const override;
  const HybridModel& hybrid() const { return model_; }
  // Same values as hybrid().predict; evaluates kernels once when the three
  // regressors share their fields.
  AccelPrediction predict(const QuadState& s, const Control& u) const;

 private:
  HybridModel model_;
  QuadParams params_;
  bool shared_ = false;
};

// Experiment ground truth: the rigid-body model with a thrust-scale bias and
// linear velocity drag.
struct Perturbation {
  double drag = 0.0;          // 1/s, a -= drag * v
  double thrust_scale = 1.0;  // effective thrust = thrust_scale * F
};

class GroundTruthModel final : public DynamicsModel {
 public:
  GroundTruthModel(Perturbation perturbation, QuadParams params = {});
  bool stochastic() const override { return false; }
  const QuadParams& params() const override { return params_; }
  QuadState step(const QuadState& s, const Control& u,
                 const AccelNoise* noise) const override;
  Vec3 accel(const QuadState& s, const Control& u) const;
  const Perturbation& perturbation() const { return perturbation_; }

 private:
  Perturbation perturbation_;
  QuadParams params_;
};

// ---------------------------------------------------------------------------
// propagation

struct SanityBox {
  double max_position = 1e3;
  double max_velocity = 1e3;
  bool contains(const QuadState& s) const;
};

struct Propagation {
  std::vector<QuadState> states;  // initial state plus one per step
  bool diverged = false;          // some state left the sanity box
};

// Iterates model steps over the first `horizon_steps` controls. In sample
// mode `noise` must hold one AccelNoise per step.
Propagation propagate(const DynamicsModel& model, const QuadState& initial,
                      std::span<const Control> controls, std::size_t horizon_steps,
                      PredictionMode mode = PredictionMode::kMean,
                      std::span<const AccelNoise> noise = {},
                      const SanityBox& box = {});

}  // namespace pimpc
