#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pimpc::lwpr {

// Largest supported input dimension; predict() works out of fixed-size stack
// buffers to stay allocation free inside rollout loops.
inline constexpr int kMaxInputDim = 16;

struct Hyperparams {
  // A sample whose largest unnormalized activation falls below this spawns a
  // new receptive field centered on it.
  double w_gen = 0.1;
  // Fields with activation at or below this are skipped by update().
  double participation = 0.001;
  double forgetting = 1.0;
  // Ridge penalty on the affine coefficients of every field.
  double ridge = 1e-6;
  // Metric given to new fields, input_dim x input_dim, symmetric PD.
  Eigen::MatrixXd init_metric;
  bool allow_generation = true;
};

// Metric diag(1 / length_scale_d^2), i.e. one kernel width per input.
Eigen::MatrixXd metric_from_length_scales(std::span<const double> length_scales);

// One local linear model with a Gaussian activation kernel. The affine model
// is expressed in coordinates centered on `center`: y_j(x) = b0 + b·(x - c).
struct ReceptiveField {
  Eigen::VectorXd center;
  Eigen::MatrixXd metric;
  Eigen::VectorXd coefficients;  // [b0, b_1 .. b_d]
  double local_variance = 0.0;
  double weighted_count = 0.0;
  // Recursive-least-squares state: inverse of the regularized weighted
  // second-moment matrix of [1, x - c].
  Eigen::MatrixXd inverse_moment;
  // Activation mass folded into local_variance (excludes the sample that
  // created the field, which has no a-priori residual).
  double residual_weight = 0.0;

  double local_prediction(std::span<const double> x) const;
  double activation(std::span<const double> x) const;  // unnormalized
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
  double max_activation = 0.0;
};

class LwprModel {
 public:
  LwprModel(int input_dim, Hyperparams params);

  int input_dim() const noexcept { return input_dim_; }
  const Hyperparams& hyperparams() const noexcept { return params_; }
  const std::vector<ReceptiveField>& fields() const noexcept { return fields_; }
  std::size_t size() const noexcept { return fields_.size(); }
  bool empty() const noexcept { return fields_.empty(); }

  // Normalized kernel weights, one per field, in field order.
  std::vector<double> activations(std::span<const double> x) const;

  // Blended mean and variance:
  //   mean = sum_j w_j y_j(x)
  //   var  = sum_j w_j ((mean - y_j(x))^2 + sigma_j^2)
  Prediction predict(std::span<const double> x) const;

  // Incorporates one sample. Throws InputError on non-finite data, leaving
  // the model untouched.
  void update(std::span<const double> x, double y);

  void set_generation_enabled(bool enabled) noexcept {
    params_.allow_generation = enabled;
  }

  // Direct field insertion for tests and model construction. The field must
  // match input_dim and have a symmetric positive-definite metric.
  void add_field(ReceptiveField field);
  ReceptiveField make_field(std::span<const double> center) const;

 private:
  friend void predict_shared(std::span<const LwprModel* const> models,
                             std::span<const double> x, std::span<Prediction> out);

  void check_input(std::span<const double> x) const;
  void rls_update(ReceptiveField& field, std::span<const double> x, double y,
                  double weight, bool fold_residual) const;
  void repack();


  int input_dim_;
  Hyperparams params_;
  std::vector<ReceptiveField> fields_;
  // Contiguous copy of what predict() reads, per field: center, coefficients,
  // metric, local variance.
  std::vector<double> packed_;
  bool diagonal_ = true;
};

// True when both models have the same field centers and metrics in the same
// order, so one kernel evaluation serves both.
bool same_kernels(const LwprModel& a, const LwprModel& b);

// predict() for several models at once. Every model must pass same_kernels
// against models[0]; results are bit identical to calling predict() on each.
void predict_shared(std::span<const LwprModel* const> models, std::span<const double> x,
                    std::span<Prediction> out);

// Binary persistence: "LWPR1" magic, then little-endian fixed-width fields.
// Round trips are bit exact, including the regression state, so a loaded
// model can keep training.
std::vector<std::uint8_t> save_model(const LwprModel& model);

// Parses one model from the front of `bytes`. If `consumed` is non-null it
// receives the number of bytes used, so streams can be concatenated.
// Throws FormatError carrying the failing byte offset.
LwprModel load_model(std::span<const std::uint8_t> bytes,
                     std::size_t* consumed = nullptr);

}  // namespace pimpc::lwpr
