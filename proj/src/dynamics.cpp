#include "pimpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pimpc/error.hpp"

namespace pimpc {

void QuadParams::validate() const {
  if (!(mass > 0.0)) throw InputError("mass must be > 0");
  if (!(dt > 0.0)) throw InputError("dt must be > 0");
  if (!(rate_gain > 0.0)) throw InputError("rate_gain must be > 0");
  if (!(thrust_max > 0.0)) throw InputError("thrust_max must be > 0");
  if (!(rate_max > 0.0)) throw InputError("rate_max must be > 0");
}

Control clamp_control(Control u, const QuadParams& params) {
  for (int i = 0; i < 3; ++i) {
    u.desired_rates(i) =
        std::clamp(u.desired_rates(i), -params.rate_max, params.rate_max);
  }
  u.thrust = std::clamp(u.thrust, 0.0, params.thrust_max);
  return u;
}

Control hover_control(const QuadParams& params) {
  return Control{Vec3::Zero(), params.hover_thrust()};
}

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  // remainder() is exact, so no drift is introduced by wrapping.
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

Vec3 accel_analytic(const QuadState& s, const Control& u, const QuadParams& params) {
  const double cr = std::cos(s.angles(0)), sr = std::sin(s.angles(0));
  const double cp = std::cos(s.angles(1)), sp = std::sin(s.angles(1));
  const double cy = std::cos(s.angles(2)), sy = std::sin(s.angles(2));
  // Third column of Rz(yaw) Ry(pitch) Rx(roll).
  const Vec3 thrust_dir(cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr);
  Vec3 a = (u.thrust / params.mass) * thrust_dir;
  a(2) -= params.gravity;
  return a;
}

QuadState integrate(const QuadState& s, const Control& u, const Vec3& accel,
                    const QuadParams& params) {
  const double dt = params.dt;
  QuadState next;
  next.position = s.position + s.velocity * dt;
  next.velocity = s.velocity + accel * dt;
  for (int i = 0; i < 3; ++i) {
    next.angles(i) = wrap_angle(s.angles(i) + s.rates(i) * dt);
  }
  next.rates = s.rates + params.rate_gain * (u.desired_rates - s.rates) * dt;
  return next;
}

QuadState step_analytic(const QuadState& s, const Control& u, const QuadParams& params) {
  return integrate(s, u, accel_analytic(s, u, params), params);
}

// ---------------------------------------------------------------------------

std::array<double, 4> learned_input(const QuadState& s, const Control& u) {
  return {s.angles(0), s.angles(1), s.angles(2), u.thrust};
}

HybridModel::HybridModel(std::array<lwpr::LwprModel, 3> axes) : axes_(std::move(axes)) {
  for (const auto& m : axes_) {
    if (m.input_dim() != 4) {
      throw InputError("hybrid model regressors take 4 inputs (roll, pitch, yaw, thrust)");
    }
  }
}

HybridModel HybridModel::untrained(const lwpr::Hyperparams& params) {
  return HybridModel({lwpr::LwprModel(4, params), lwpr::LwprModel(4, params),
                      lwpr::LwprModel(4, params)});
}

bool HybridModel::trained() const {
  return !axes_[0].empty() && !axes_[1].empty() && !axes_[2].empty();
}

AccelPrediction HybridModel::predict(const QuadState& s, const Control& u) const {
  static constexpr const char* kAxis[3] = {"x", "y", "z"};
  const auto input = learned_input(s, u);
  AccelPrediction out;
  for (int i = 0; i < 3; ++i) {
    const auto& m = axes_[static_cast<std::size_t>(i)];
    if (m.empty()) {
      throw ModelError(std::string("acceleration model for axis ") + kAxis[i] +
                       " is untrained");
    }
    const lwpr::Prediction p = m.predict(input);
    out.mean(i) = p.mean;
    out.variance(i) = p.variance;
  }
  return out;
}

std::vector<std::uint8_t> HybridModel::save() const {
  std::vector<std::uint8_t> out;
  for (const auto& m : axes_) {
    const auto bytes = lwpr::save_model(m);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

HybridModel HybridModel::load(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  auto next = [&]() {
    std::size_t used = 0;
    try {
      auto m = lwpr::load_model(bytes.subspan(offset), &used);
      offset += used;
      return m;
    } catch (const FormatError& e) {
      throw FormatError(std::string("hybrid model: ") + e.what(), offset + e.offset());
    }
  };
  auto ax = next();
  auto ay = next();
  auto az = next();
  if (offset != bytes.size()) {
    throw FormatError("trailing bytes after hybrid model", offset);
  }
  return HybridModel({std::move(ax), std::move(ay), std::move(az)});
}

namespace {

QuadState step_predicted(const QuadState& s, const Control& u, const QuadParams& params,
                         const AccelPrediction& p, PredictionMode mode,
                         const AccelNoise& noise) {
  Vec3 accel = p.mean;
  if (mode == PredictionMode::kSample) {
    for (int i = 0; i < 3; ++i) {
      accel(i) += std::sqrt(p.variance(i)) * noise[static_cast<std::size_t>(i)];
    }
  }
  return integrate(s, u, accel, params);
}

}  // namespace

QuadState step_learned(const QuadState& s, const Control& u, const QuadParams& params,
                       const HybridModel& model, PredictionMode mode,
                       const AccelNoise& noise) {
  return step_predicted(s, u, params, model.predict(s, u), mode, noise);
}

// ---------------------------------------------------------------------------

AnalyticModel::AnalyticModel(QuadParams params) : params_(params) { params_.validate(); }

QuadState AnalyticModel::step(const QuadState& s, const Control& u,
                              const AccelNoise* /*noise*/) const {
  return step_analytic(s, u, params_);
}

LearnedModel::LearnedModel(HybridModel model, QuadParams params)
    : model_(std::move(model)), params_(params) {
  params_.validate();
  if (!model_.trained()) throw ModelError("learned model requires trained regressors");
  shared_ = lwpr::same_kernels(model_.axis(0), model_.axis(1)) &&
            lwpr::same_kernels(model_.axis(0), model_.axis(2));
}

AccelPrediction LearnedModel::predict(const QuadState& s, const Control& u) const {
  if (!shared_) return model_.predict(s, u);
  const auto input = learned_input(s, u);
  const std::array<const lwpr::LwprModel*, 3> axes = {&model_.axis(0), &model_.axis(1),
                                                      &model_.axis(2)};
  std::array<lwpr::Prediction, 3> p;
  lwpr::predict_shared(axes, input, p);
  AccelPrediction out;
  for (int i = 0; i < 3; ++i) {
    out.mean(i) = p[static_cast<std::size_t>(i)].mean;
    out.variance(i) = p[static_cast<std::size_t>(i)].variance;
  }
  return out;
}

QuadState LearnedModel::step(const QuadState& s, const Control& u,
                             const AccelNoise* noise) const {
  const AccelPrediction p = predict(s, u);
  if (noise == nullptr) return step_predicted(s, u, params_, p, PredictionMode::kMean, {});
  return step_predicted(s, u, params_, p, PredictionMode::kSample, *noise);
}

GroundTruthModel::GroundTruthModel(Perturbation perturbation, QuadParams params)
    : perturbation_(perturbation), params_(params) {
  params_.validate();
  if (!(perturbation_.drag >= 0.0)) throw InputError("drag must be >= 0");
  if (!(perturbation_.thrust_scale > 0.0)) throw InputError("thrust_scale must be > 0");
}

Vec3 GroundTruthModel::accel(const QuadState& s, const Control& u) const {
  Control scaled = u;
  scaled.thrust *= perturbation_.thrust_scale;
  return accel_analytic(s, scaled, params_) - perturbation_.drag * s.velocity;
}

QuadState GroundTruthModel::step(const QuadState& s, const Control& u,
                                 const AccelNoise* /*noise*/) const {
  return integrate(s, u, accel(s, u), params_);
}

// ---------------------------------------------------------------------------

bool SanityBox::contains(const QuadState& s) const {
  return s.position.allFinite() && s.velocity.allFinite() && s.angles.allFinite() &&
         s.rates.allFinite() && s.position.cwiseAbs().maxCoeff() <= max_position &&
         s.velocity.cwiseAbs().maxCoeff() <= max_velocity;
}

Propagation propagate(const DynamicsModel& model, const QuadState& initial,
                      std::span<const Control> controls, std::size_t horizon_steps,
                      PredictionMode mode, std::span<const AccelNoise> noise,
                      const SanityBox& box) {
  if (horizon_steps > controls.size()) {
    throw InputError("horizon exceeds plan length");
  }
  if (mode == PredictionMode::kSample && noise.size() < horizon_steps) {
    throw InputError("sample mode needs one noise triple per step");
  }
  Propagation out;
  out.states.reserve(horizon_steps + 1);
  out.states.push_back(initial);
  for (std::size_t i = 0; i < horizon_steps; ++i) {
    const AccelNoise* z = mode == PredictionMode::kSample ? &noise[i] : nullptr;
    out.states.push_back(model.step(out.states.back(), controls[i], z));
    if (!box.contains(out.states.back())) out.diverged = true;
  }
  return out;
}

}  // namespace pimpc
