#include "pimpc/lwpr.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <string>

#include "pimpc/error.hpp"

namespace pimpc::lwpr {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model persistence assumes a little-endian host");

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

void validate(int input_dim, const Hyperparams& p) {
  if (input_dim < 1 || input_dim > kMaxInputDim) {
    throw InputError("input_dim must be in [1, " +
                     std::to_string(kMaxInputDim) + "]");
  }
  if (!(p.w_gen > 0.0 && p.w_gen < 1.0)) {
    throw InputError("w_gen must lie in (0, 1)");
  }
  if (!(p.participation >= 0.0 && p.participation < 1.0)) {
    throw InputError("participation threshold must lie in [0, 1)");
  }
  if (!(p.forgetting > 0.0 && p.forgetting <= 1.0)) {
    throw InputError("forgetting factor must lie in (0, 1]");
  }
  if (!(p.ridge >= 0.0) || !std::isfinite(p.ridge)) {
    throw InputError("ridge must be finite and >= 0");
  }
  if (p.init_metric.rows() != input_dim || !is_spd(p.init_metric)) {
    throw InputError("init_metric must be a symmetric positive-definite " +
                     std::to_string(input_dim) + "x" +
                     std::to_string(input_dim) + " matrix");
  }
}

// Squared Mahalanobis distance and centered local prediction for one field,
// without heap allocation.
struct FieldEval {
  double quad;
  double local;
};

inline FieldEval evaluate(const ReceptiveField& f, const double* x, int d) {
  std::array<double, kMaxInputDim> diff{};
  const double* c = f.center.data();
  const double* b = f.coefficients.data();
  double local = b[0];
  for (int a = 0; a < d; ++a) {
    diff[a] = x[a] - c[a];
    local += b[a + 1] * diff[a];
  }
  // Column-major metric; symmetric, so column a equals row a.
  const double* m = f.metric.data();
  double quad = 0.0;
  for (int a = 0; a < d; ++a) {
    double row = 0.0;
    const double* col = m + static_cast<std::ptrdiff_t>(a) * d;
    for (int k = 0; k < d; ++k) row += col[k] * diff[k];
    quad += diff[a] * row;
  }
  return {quad, local};
}

constexpr std::size_t packed_stride(int d) {
  const auto n = static_cast<std::size_t>(d);
  return n + (n + 1) + n * n + 1;
}

}  // namespace

Eigen::MatrixXd metric_from_length_scales(std::span<const double> length_scales) {
  const auto d = static_cast<Eigen::Index>(length_scales.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double s = length_scales[static_cast<std::size_t>(i)];
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InputError("length scales must be positive and finite");
    }
    m(i, i) = 1.0 / (s * s);
  }
  return m;
}

double ReceptiveField::local_prediction(std::span<const double> x) const {
  return evaluate(*this, x.data(), static_cast<int>(center.size())).local;
}

double ReceptiveField::activation(std::span<const double> x) const {
  return std::exp(
      -0.5 * evaluate(*this, x.data(), static_cast<int>(center.size())).quad);
}

LwprModel::LwprModel(int input_dim, Hyperparams params)
    : input_dim_(input_dim), params_(std::move(params)) {
  if (params_.init_metric.size() == 0 && input_dim >= 1 &&
      input_dim <= kMaxInputDim) {
    params_.init_metric = Eigen::MatrixXd::Identity(input_dim, input_dim);
  }
  validate(input_dim_, params_);
}

void LwprModel::check_input(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim_) {
    throw InputError("expected " + std::to_string(input_dim_) +
                     " inputs, got " + std::to_string(x.size()));
  }
  if (!all_finite(x)) throw InputError("non-finite input");
}

std::vector<double> LwprModel::activations(std::span<const double> x) const {
  if (fields_.empty()) throw ModelError("no receptive fields");
  check_input(x);
  std::vector<double> w(fields_.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < fields_.size(); ++j) {
    w[j] = -0.5 * evaluate(fields_[j], x.data(), input_dim_).quad;
    max_log = std::max(max_log, w[j]);
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - max_log);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

namespace {

// Fields this far below the strongest one in log space contribute less than
// double rounding to any sum, so their kernels are never exponentiated.
constexpr double kNegligibleLog = -40.0;

// Blends packed fields for a compile-time input dimension D (D = 0 falls back
// to the runtime dimension d). Diag skips the off-diagonal metric terms.
// Every pack must share the centers and metrics of packs[0]; kernels are
// evaluated once and each pack contributes its own local fits. K > 0 fixes
// the pack count at compile time.
template <int D, bool Diag, int K = 0>
void blend(std::span<const std::vector<double>* const> packs, const double* x, int d,
           Prediction* out) {
  if constexpr (D > 0) d = D;
  const std::size_t stride = packed_stride(d);
  const std::vector<double>& kernels = *packs[0];
  const std::size_t n = kernels.size() / stride;
  const std::size_t k = K > 0 ? static_cast<std::size_t>(K) : packs.size();
  std::array<const double*, 8> base{};
  for (std::size_t p = 0; p < k; ++p) base[p] = packs[p]->data();
  thread_local std::vector<double> scratch;
  if (scratch.size() < (k + 1) * n) scratch.resize((k + 1) * n);
  double* act = scratch.data();
  double* local = act + n;

  const auto ud = static_cast<std::size_t>(d);
  const std::size_t metric_at = 2 * ud + 1;
  const std::size_t var_at = metric_at + ud * ud;
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const double* c = kernels.data() + j * stride;
    const double* m = c + metric_at;
    double diff[kMaxInputDim];
    for (int a = 0; a < d; ++a) diff[a] = x[a] - c[a];
    for (std::size_t p = 0; p < k; ++p) {
      const double* b = base[p] + j * stride + ud;
      double y = b[0];
      for (int a = 0; a < d; ++a) y += b[a + 1] * diff[a];
      local[p * n + j] = y;
    }
    double quad = 0.0;
    if constexpr (Diag) {
      for (int a = 0; a < d; ++a) quad += m[a * d + a] * diff[a] * diff[a];
    } else {
      for (int a = 0; a < d; ++a) {
        double row = 0.0;
        for (int c2 = 0; c2 < d; ++c2) row += m[a * d + c2] * diff[c2];
        quad += diff[a] * row;
      }
    }
    act[j] = -0.5 * quad;
    max_log = std::max(max_log, act[j]);
  }

  double weight = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double rel = act[j] - max_log;
    act[j] = rel < kNegligibleLog ? 0.0 : std::exp(rel);
    weight += act[j];
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* y = local + p * n;
    const double* pack = base[p];
    double sum = 0.0;
    double noise = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sum += act[j] * y[j];
      noise += act[j] * pack[j * stride + var_at];
    }
    const double mean = sum / weight;
    double spread = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = y[j] - mean;
      spread += act[j] * e * e;
    }
    out[p].mean = mean;
    out[p].variance = std::max(0.0, (spread + noise) / weight);
    out[p].max_activation = std::exp(max_log);
  }
}

using BlendFn = void (*)(std::span<const std::vector<double>* const>, const double*, int,
                         Prediction*);

BlendFn pick_blend(int d, bool diagonal, std::size_t count) {
  if (d == 4 && count == 1) return diagonal ? &blend<4, true, 1> : &blend<4, false, 1>;
  if (d == 4 && count == 3) return diagonal ? &blend<4, true, 3> : &blend<4, false, 3>;
  if (d == 4) return diagonal ? &blend<4, true> : &blend<4, false>;
  return diagonal ? &blend<0, true> : &blend<0, false>;
}

}  // namespace

Prediction LwprModel::predict(std::span<const double> x) const {
  if (fields_.empty()) throw ModelError("no receptive fields");
  check_input(x);
  const std::vector<double>* pack = &packed_;
  Prediction p;
  pick_blend(input_dim_, diagonal_, 1)({&pack, 1}, x.data(), input_dim_, &p);
  return p;
}

bool same_kernels(const LwprModel& a, const LwprModel& b) {
  if (a.input_dim() != b.input_dim() || a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const ReceptiveField& fa = a.fields()[j];
    const ReceptiveField& fb = b.fields()[j];
    if (fa.center != fb.center || fa.metric != fb.metric) return false;
  }
  return true;
}

void predict_shared(std::span<const LwprModel* const> models, std::span<const double> x,
                    std::span<Prediction> out) {
  if (models.empty() || out.size() != models.size()) {
    throw InputError("predict_shared needs one output per model");
  }
  const LwprModel& first = *models[0];
  if (first.fields_.empty()) throw ModelError("no receptive fields");
  first.check_input(x);
  std::array<const std::vector<double>*, 8> packs{};
  if (models.size() > packs.size()) throw InputError("predict_shared takes at most 8 models");
  for (std::size_t p = 0; p < models.size(); ++p) packs[p] = &models[p]->packed_;
  pick_blend(first.input_dim_, first.diagonal_, models.size())({packs.data(), models.size()}, x.data(),
                                               first.input_dim_, out.data());
}

void LwprModel::repack() {
  const int d = input_dim_;
  packed_.clear();
  packed_.reserve(fields_.size() * packed_stride(d));
  diagonal_ = true;
  for (const ReceptiveField& f : fields_) {
    diagonal_ = diagonal_ && f.metric.isDiagonal(0.0);
    packed_.insert(packed_.end(), f.center.data(), f.center.data() + d);
    packed_.insert(packed_.end(), f.coefficients.data(), f.coefficients.data() + d + 1);
    packed_.insert(packed_.end(), f.metric.data(), f.metric.data() + d * d);
    packed_.push_back(f.local_variance);
  }
}

ReceptiveField LwprModel::make_field(std::span<const double> center) const {
  check_input(center);
  const int d = input_dim_;
  ReceptiveField f;
  f.center = Eigen::Map<const Eigen::VectorXd>(center.data(), d);
  f.metric = params_.init_metric;
  f.coefficients = Eigen::VectorXd::Zero(d + 1);
  const double ridge = std::max(params_.ridge, 1e-12);
  f.inverse_moment = Eigen::MatrixXd::Identity(d + 1, d + 1) / ridge;
  return f;
}

void LwprModel::add_field(ReceptiveField field) {
  const int d = input_dim_;
  if (field.center.size() != d || field.coefficients.size() != d + 1 ||
      !field.center.allFinite() || !field.coefficients.allFinite()) {
    throw InputError("receptive field does not match model input_dim");
  }
  if (field.metric.rows() != d || !is_spd(field.metric)) {
    throw InputError("receptive field metric must be symmetric positive-definite");
  }
  if (!(field.local_variance >= 0.0) || !(field.weighted_count >= 0.0)) {
    throw InputError("receptive field variance and count must be >= 0");
  }
  if (field.inverse_moment.rows() != d + 1 ||
      field.inverse_moment.cols() != d + 1) {
    const double ridge = std::max(params_.ridge, 1e-12);
    field.inverse_moment = Eigen::MatrixXd::Identity(d + 1, d + 1) / ridge;
  }
  fields_.push_back(std::move(field));
  repack();
}

void LwprModel::rls_update(ReceptiveField& f, std::span<const double> x,
                           double y, double weight, bool fold_residual) const {
  const int d = input_dim_;
  const double lambda = params_.forgetting;
  Eigen::VectorXd z(d + 1);
  z(0) = 1.0;
  for (int a = 0; a < d; ++a) z(a + 1) = x[static_cast<std::size_t>(a)] - f.center(a);

  const double residual = y - f.coefficients.dot(z);
  const Eigen::VectorXd pz = f.inverse_moment * z;
  const double denom = lambda / weight + z.dot(pz);
  const Eigen::VectorXd gain = pz / denom;
  f.coefficients += gain * residual;
  f.inverse_moment = (f.inverse_moment - gain * pz.transpose()) / lambda;
  f.inverse_moment = 0.5 * (f.inverse_moment + f.inverse_moment.transpose()).eval();
  f.weighted_count = lambda * f.weighted_count + weight;

  if (fold_residual) {
    // Activation-weighted running mean of a-priori squared residuals.
    const double previous = lambda * f.residual_weight;
    f.residual_weight = previous + weight;
    f.local_variance =
        (previous * f.local_variance + weight * residual * residual) /
        f.residual_weight;
  }
}

void LwprModel::update(std::span<const double> x, double y) {
  check_input(x);
  if (!std::isfinite(y)) throw InputError("non-finite target");
  if (fields_.empty() && !params_.allow_generation) {
    throw ModelError("no receptive fields and field generation is disabled");
  }

  double max_act = 0.0;
  for (ReceptiveField& f : fields_) {
    const double a = f.activation(x);
    max_act = std::max(max_act, a);
    if (a > params_.participation) rls_update(f, x, y, a, true);
  }
  if (params_.allow_generation && max_act < params_.w_gen) {
    ReceptiveField f = make_field(x);
    rls_update(f, x, y, 1.0, false);
    fields_.push_back(std::move(f));
  }
  repack();
}

// ---------------------------------------------------------------------------
// persistence

namespace {

constexpr char kMagic[5] = {'L', 'W', 'P', 'R', '1'};

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put(m.data()[i]);
  }
  void put(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v(i));
  }
  void raw(const char* data, std::size_t n) {
    bytes_.insert(bytes_.end(), data, data + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - offset_ < sizeof(T)) {
      throw FormatError(std::string("truncated stream reading ") + what, offset_);
    }
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }
  double get_finite(const char* what) {
    const std::size_t at = offset_;
    const double v = get<double>(what);
    if (!std::isfinite(v)) {
      throw FormatError(std::string("non-finite ") + what, at);
    }
    return v;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, const char* what) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_finite(what);
    return m;
  }
  Eigen::VectorXd vector(Eigen::Index n, const char* what) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = get_finite(what);
    return v;
  }
  std::size_t offset() const noexcept { return offset_; }
  std::size_t remaining() const noexcept { return bytes_.size() - offset_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_model(const LwprModel& model) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  const Hyperparams& p = model.hyperparams();
  w.put(static_cast<std::uint32_t>(model.input_dim()));
  w.put(p.w_gen);
  w.put(p.participation);
  w.put(p.forgetting);
  w.put(p.ridge);
  w.put(static_cast<std::uint8_t>(p.allow_generation ? 1 : 0));
  w.put(p.init_metric);
  w.put(static_cast<std::uint64_t>(model.size()));
  for (const ReceptiveField& f : model.fields()) {
    w.put(f.center);
    w.put(f.metric);
    w.put(f.coefficients);
    w.put(f.inverse_moment);
    w.put(f.local_variance);
    w.put(f.weighted_count);
    w.put(f.residual_weight);
  }
  return w.take();
}

LwprModel load_model(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  ByteReader r(bytes);
  for (char expected : kMagic) {
    const std::size_t at = r.offset();
    if (r.get<char>("magic") != expected) {
      throw FormatError("bad magic, expected LWPR1", at);
    }
  }
  const std::size_t dim_at = r.offset();
  const auto dim = static_cast<int>(r.get<std::uint32_t>("input_dim"));
  if (dim < 1 || dim > kMaxInputDim) {
    throw FormatError("input_dim out of range", dim_at);
  }
  const std::size_t params_at = r.offset();
  Hyperparams p;
  p.w_gen = r.get_finite("w_gen");
  p.participation = r.get_finite("participation");
  p.forgetting = r.get_finite("forgetting");
  p.ridge = r.get_finite("ridge");
  const auto gen = r.get<std::uint8_t>("allow_generation");
  if (gen > 1) throw FormatError("bad allow_generation flag", r.offset() - 1);
  p.allow_generation = gen == 1;
  p.init_metric = r.matrix(dim, dim, "init_metric");

  std::optional<LwprModel> model;
  try {
    model.emplace(dim, std::move(p));
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid hyperparameters: ") + e.what(), params_at);
  }

  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint64_t>("field count");
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t field_bytes =
      8 * (d + d * d + (d + 1) + (d + 1) * (d + 1) + 3);
  if (count > r.remaining() / field_bytes) {
    throw FormatError("field count exceeds stream length", count_at);
  }
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::size_t field_at = r.offset();
    ReceptiveField f;
    f.center = r.vector(dim, "center");
    f.metric = r.matrix(dim, dim, "metric");
    f.coefficients = r.vector(dim + 1, "coefficients");
    f.inverse_moment = r.matrix(dim + 1, dim + 1, "inverse_moment");
    f.local_variance = r.get_finite("local_variance");
    f.weighted_count = r.get_finite("weighted_count");
    f.residual_weight = r.get_finite("residual_weight");
    try {
      model->add_field(std::move(f));
    } catch (const InputError& e) {
      throw FormatError(std::string("invalid receptive field: ") + e.what(), field_at);
    }
  }
  if (consumed != nullptr) *consumed = r.offset();
  return std::move(*model);
}

}  // namespace pimpc::lwpr
