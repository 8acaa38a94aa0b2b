#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "pimpc/error.hpp"
#include "pimpc/lwpr.hpp"

using namespace pimpc;
using namespace pimpc::lwpr;

namespace {

Hyperparams scalar_params(double metric = 1.0) {
  Hyperparams p;
  p.init_metric = Eigen::MatrixXd::Constant(1, 1, metric);
  return p;
}

// Field with explicit affine model y = b0 + b1 (x - c).
ReceptiveField scalar_field(double c, double d, double b0, double b1, double var) {
  ReceptiveField f;
  f.center = Eigen::VectorXd::Constant(1, c);
  f.metric = Eigen::MatrixXd::Constant(1, 1, d);
  f.coefficients = Eigen::Vector2d(b0, b1);
  f.local_variance = var;
  f.inverse_moment = Eigen::MatrixXd::Identity(2, 2);
  return f;
}

ReceptiveField random_field(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ReceptiveField f;
  f.center = Eigen::VectorXd::NullaryExpr(dim, [&] { return u(rng); });
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return u(rng); });
  f.metric = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
  f.coefficients = Eigen::VectorXd::NullaryExpr(dim + 1, [&] { return 2.0 * u(rng); });
  f.local_variance = 0.5 * (u(rng) + 1.0);
  f.inverse_moment = Eigen::MatrixXd::Identity(dim + 1, dim + 1);
  return f;
}

LwprModel random_model(std::mt19937_64& rng, int dim, int fields) {
  Hyperparams p;
  p.init_metric = Eigen::MatrixXd::Identity(dim, dim);
  LwprModel m(dim, p);
  for (int j = 0; j < fields; ++j) m.add_field(random_field(rng, dim));
  return m;
}

std::vector<double> random_point(std::mt19937_64& rng, int dim, double scale = 1.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("activations: single field is always weight one") {
  LwprModel m(1, scalar_params());
  m.add_field(scalar_field(0.3, 2.0, 0.0, 0.0, 0.0));
  for (double x : {-5.0, 0.3, 12.0}) {
    const auto w = m.activations(std::vector<double>{x});
    REQUIRE(w.size() == 1);
    CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("activations: equidistant query splits evenly") {
  LwprModel m(1, scalar_params());
  m.add_field(scalar_field(0.0, 1.0, 0.0, 0.0, 0.0));
  m.add_field(scalar_field(1.0, 1.0, 0.0, 0.0, 0.0));
  const auto w = m.activations(std::vector<double>{0.5});
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("activations and predict match a hand-evaluated scalar kernel") {
  LwprModel m(1, scalar_params());
  m.add_field(scalar_field(0.0, 1.0, 0.0, 1.0, 0.0));   // y1 = x
  m.add_field(scalar_field(1.0, 1.0, 1.0, -1.0, 0.0));  // y2 = 2 - x
  const double x = 0.25;
  const double k1 = std::exp(-0.03125), k2 = std::exp(-0.28125);
  const double w1 = k1 / (k1 + k2), w2 = k2 / (k1 + k2);
  const auto w = m.activations(std::vector<double>{x});
  CHECK(std::abs(w[0] - w1) < 1e-15);
  CHECK(std::abs(w[1] - w2) < 1e-15);

  const double y1 = x, y2 = 2.0 - x;
  const double mean = w1 * y1 + w2 * y2;
  const double var = w1 * (mean - y1) * (mean - y1) + w2 * (mean - y2) * (mean - y2);
  const Prediction p = m.predict(std::vector<double>{x});
  CHECK(std::abs(p.mean - mean) < 1e-14);
  CHECK(std::abs(p.variance - var) < 1e-14);
  CHECK(std::abs(p.max_activation - k1) < 1e-15);
}

TEST_CASE("predict examples") {
  SUBCASE("single field at its center") {
    LwprModel m(1, scalar_params());
    m.add_field(scalar_field(0.7, 3.0, 2.0, 5.0, 0.5));
    const Prediction p = m.predict(std::vector<double>{0.7});
    CHECK(p.mean == 2.0);
    CHECK(p.variance == 0.5);
    CHECK(p.max_activation == 1.0);
  }
  SUBCASE("two symmetric fields disagreeing") {
    LwprModel m(1, scalar_params());
    m.add_field(scalar_field(-1.0, 1.0, 1.0, 0.0, 0.1));
    m.add_field(scalar_field(1.0, 1.0, 3.0, 0.0, 0.1));
    const Prediction p = m.predict(std::vector<double>{0.0});
    CHECK(p.mean == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(p.variance == doctest::Approx(1.1).epsilon(1e-14));
  }
}

TEST_CASE("errors: empty model and non-finite input") {
  LwprModel m(2, Hyperparams{});
  CHECK_THROWS_AS(m.predict(std::vector<double>{0.0, 0.0}), ModelError);
  CHECK_THROWS_AS(m.activations(std::vector<double>{0.0, 0.0}), ModelError);
  m.update(std::vector<double>{0.0, 0.0}, 1.0);
  CHECK_THROWS_AS(m.predict(std::vector<double>{NAN, 0.0}), InputError);
  CHECK_THROWS_AS(m.predict(std::vector<double>{0.0}), InputError);
  const auto before = save_model(m);
  CHECK_THROWS_AS(m.update(std::vector<double>{INFINITY, 0.0}, 1.0), InputError);
  CHECK_THROWS_AS(m.update(std::vector<double>{0.0, 0.0}, NAN), InputError);
  CHECK(save_model(m) == before);
}

TEST_CASE("update: first sample creates a field that reproduces it") {
  LwprModel m(1, scalar_params());
  m.update(std::vector<double>{0.4}, 1.7);
  REQUIRE(m.size() == 1);
  CHECK(m.fields()[0].center(0) == 0.4);
  CHECK(m.fields()[0].metric(0, 0) == 1.0);
  CHECK(m.predict(std::vector<double>{0.4}).mean == doctest::Approx(1.7).epsilon(1e-5));
}

TEST_CASE("update: far query adds exactly one field, near query none") {
  LwprModel m(1, scalar_params(100.0));
  m.update(std::vector<double>{0.0}, 1.0);
  m.update(std::vector<double>{0.01}, 1.0);
  CHECK(m.size() == 1);
  m.update(std::vector<double>{3.0}, 1.0);
  CHECK(m.size() == 2);
  m.set_generation_enabled(false);
  m.update(std::vector<double>{-3.0}, 1.0);
  CHECK(m.size() == 2);
}

TEST_CASE("update: noisy line agrees with batch least squares") {
  LwprModel m(1, scalar_params(4.0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  Eigen::MatrixXd a(500, 2);
  Eigen::VectorXd b(500);
  for (int i = 0; i < 500; ++i) {
    const double x = ux(rng), y = 2.0 * x + 1.0 + noise(rng);
    m.update(std::vector<double>{x}, y);
    a.row(i) << 1.0, x;
    b(i) = y;
  }
  const Eigen::Vector2d ols = a.colPivHouseholderQr().solve(b);
  CHECK(std::abs(m.predict(std::vector<double>{0.5}).mean - 2.0) < 0.05);
  for (int i = 0; i < 20; ++i) {
    const double x = (i + 0.5) / 20.0;
    CHECK(std::abs(m.predict(std::vector<double>{x}).mean - (ols(0) + ols(1) * x)) < 0.02);
  }
}

TEST_CASE("update: exact linear data with frozen fields converges") {
  Hyperparams p;
  p.init_metric = metric_from_length_scales(std::vector<double>{0.3, 0.3});
  LwprModel m(2, p);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto f = [](double a, double b) { return 0.5 - 1.5 * a + 2.0 * b; };
  for (int i = 0; i < 400; ++i) {
    const double a = u(rng), b = u(rng);
    m.update(std::vector<double>{a, b}, f(a, b));
  }
  m.set_generation_enabled(false);
  for (int i = 0; i < 4000; ++i) {
    const double a = u(rng), b = u(rng);
    m.update(std::vector<double>{a, b}, f(a, b));
  }
  for (int i = 0; i < 50; ++i) {
    const double a = 0.9 * u(rng), b = 0.9 * u(rng);
    CHECK(std::abs(m.predict(std::vector<double>{a, b}).mean - f(a, b)) < 1e-3);
  }
}

TEST_CASE("local variance tracks the noise level") {
  LwprModel m(1, scalar_params(1.0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(-0.5, 0.5);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (int i = 0; i < 5000; ++i) {
    const double x = ux(rng);
    m.update(std::vector<double>{x}, x + noise(rng));
  }
  const Prediction p = m.predict(std::vector<double>{0.0});
  CHECK(p.variance == doctest::Approx(0.04).epsilon(0.15));
}

// Independent Eq. 1 evaluation straight from the field list.
TEST_CASE("predict matches a direct evaluation on random models") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 4);
    const int fields = 1 + static_cast<int>(rng() % 5);
    const LwprModel m = random_model(rng, dim, fields);
    const auto x = random_point(rng, dim);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim);

    std::vector<double> k, y;
    for (const auto& f : m.fields()) {
      const Eigen::VectorXd d = xv - f.center;
      k.push_back(std::exp(-0.5 * d.dot(f.metric * d)));
      y.push_back(f.coefficients(0) + f.coefficients.tail(dim).dot(d));
    }
    double z = 0;
    for (double v : k) z += v;
    double mean = 0;
    for (std::size_t j = 0; j < k.size(); ++j) mean += k[j] / z * y[j];
    double var = 0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      var += k[j] / z * ((mean - y[j]) * (mean - y[j]) + m.fields()[j].local_variance);
    }
    const Prediction p = m.predict(x);
    CHECK(std::abs(p.mean - mean) < 1e-10);
    CHECK(std::abs(p.variance - var) < 1e-10);
    CHECK(std::abs(p.max_activation - *std::max_element(k.begin(), k.end())) < 1e-12);
  }
}

TEST_CASE("shared kernels give bit-identical predictions") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 4);
    const LwprModel a = random_model(rng, dim, 1 + static_cast<int>(rng() % 6));
    LwprModel b(dim, a.hyperparams());
    LwprModel c(dim, a.hyperparams());
    for (ReceptiveField f : a.fields()) {
      f.coefficients = Eigen::VectorXd::NullaryExpr(dim + 1, [&] { return u(rng); });
      f.local_variance = 0.5 * (u(rng) + 1.0);
      b.add_field(f);
      // c gets a diagonal metric so the diagonal path is exercised too
      f.metric = Eigen::MatrixXd(f.metric.diagonal().asDiagonal());
      c.add_field(f);
    }
    CHECK(same_kernels(a, b));
    if (dim > 1) CHECK_FALSE(same_kernels(a, c));
    const auto x = random_point(rng, dim);
    const std::array<const LwprModel*, 2> ab = {&a, &b};
    std::array<Prediction, 2> out;
    predict_shared(ab, x, out);
    CHECK(out[0].mean == a.predict(x).mean);
    CHECK(out[0].variance == a.predict(x).variance);
    CHECK(out[1].mean == b.predict(x).mean);
    CHECK(out[1].variance == b.predict(x).variance);
    CHECK(out[1].max_activation == b.predict(x).max_activation);
    const std::array<const LwprModel*, 1> cc = {&c};
    std::array<Prediction, 1> one;
    predict_shared(cc, x, one);
    CHECK(one[0].mean == c.predict(x).mean);
  }
}

TEST_CASE("properties on random models") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 4);
    const int fields = 1 + static_cast<int>(rng() % 6);
    const LwprModel m = random_model(rng, dim, fields);
    const auto x = random_point(rng, dim);

    const auto w = m.activations(x);
    double sum = 0;
    for (double v : w) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);

    const Prediction p = m.predict(x);
    double floor = 0;
    for (std::size_t j = 0; j < w.size(); ++j) floor += w[j] * m.fields()[j].local_variance;
    CHECK(p.variance >= floor - 1e-12);

    // Permutation invariance.
    std::vector<ReceptiveField> shuffled = m.fields();
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    LwprModel perm(dim, m.hyperparams());
    for (auto& f : shuffled) perm.add_field(f);
    const Prediction q = perm.predict(x);
    CHECK(std::abs(q.mean - p.mean) < 1e-12);
    CHECK(std::abs(q.variance - p.variance) < 1e-12);

    // Translation covariance.
    const auto shift = random_point(rng, dim, 3.0);
    LwprModel moved(dim, m.hyperparams());
    for (auto f : m.fields()) {
      for (int d = 0; d < dim; ++d) f.center(d) += shift[static_cast<std::size_t>(d)];
      moved.add_field(f);
    }
    auto xs = x;
    for (int d = 0; d < dim; ++d) xs[static_cast<std::size_t>(d)] += shift[static_cast<std::size_t>(d)];
    const Prediction r = moved.predict(xs);
    CHECK(std::abs(r.mean - p.mean) < 1e-12);
    CHECK(std::abs(r.variance - p.variance) < 1e-12);
  }
}

TEST_CASE("variance vanishes only with agreeing noiseless fields") {
  LwprModel m(1, scalar_params());
  m.add_field(scalar_field(0.0, 1.0, 1.0, 2.0, 0.0));
  m.add_field(scalar_field(1.0, 1.0, 3.0, 2.0, 0.0));  // same line y = 1 + 2x
  CHECK(m.predict(std::vector<double>{0.3}).variance < 1e-12);
  m.add_field(scalar_field(0.5, 1.0, 2.0, 2.0, 1e-3));
  CHECK(m.predict(std::vector<double>{0.3}).variance > 1e-4);
}

TEST_CASE("far queries stay finite when every kernel underflows") {
  LwprModel m(1, scalar_params());
  m.add_field(scalar_field(0.0, 1.0, 1.0, 0.0, 0.1));
  m.add_field(scalar_field(1.0, 1.0, 3.0, 0.0, 0.1));
  const Prediction p = m.predict(std::vector<double>{1e3});
  CHECK(p.mean == doctest::Approx(3.0));
  CHECK(std::isfinite(p.variance));
  CHECK(p.max_activation == 0.0);
}

TEST_CASE("metric validation") {
  Hyperparams bad;
  bad.init_metric = Eigen::MatrixXd::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(LwprModel(1, bad), InputError);
  CHECK_THROWS_AS(LwprModel(0, Hyperparams{}), InputError);
  CHECK_THROWS_AS(metric_from_length_scales(std::vector<double>{1.0, 0.0}), InputError);
  LwprModel m(1, scalar_params());
  ReceptiveField f = scalar_field(0.0, 1.0, 0.0, 0.0, 0.0);
  f.metric(0, 0) = 0.0;
  CHECK_THROWS_AS(m.add_field(f), InputError);
}

TEST_CASE("persistence round trips bit exactly") {
  SUBCASE("empty model") {
    LwprModel m(3, Hyperparams{});
    const LwprModel back = load_model(save_model(m));
    CHECK(back.empty());
    CHECK(back.input_dim() == 3);
    CHECK(save_model(back) == save_model(m));
  }
  SUBCASE("trained model") {
    Hyperparams p;
    p.init_metric = metric_from_length_scales(std::vector<double>{0.2, 0.2});
    LwprModel m(2, p);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
      const double a = u(rng), b = u(rng);
      m.update(std::vector<double>{a, b}, std::sin(2 * a) * b);
    }
    CHECK(m.size() >= 15);
    const auto bytes = save_model(m);
    CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "LWPR1");
    std::size_t used = 0;
    LwprModel back = load_model(bytes, &used);
    CHECK(used == bytes.size());
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{1.2 * u(rng), 1.2 * u(rng)};
      const Prediction a = m.predict(x), b = back.predict(x);
      CHECK(a.mean == b.mean);
      CHECK(a.variance == b.variance);
      CHECK(a.max_activation == b.max_activation);
    }
    // Training continues identically after a reload.
    m.update(std::vector<double>{0.1, 0.2}, 0.3);
    back.update(std::vector<double>{0.1, 0.2}, 0.3);
    CHECK(save_model(m) == save_model(back));

    SUBCASE("truncated streams are rejected with an offset") {
      for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{5}, bytes.size() / 2,
                              bytes.size() - 1}) {
        const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
        try {
          (void)load_model(part);
          FAIL("accepted a truncated stream");
        } catch (const FormatError& e) {
          CHECK(e.offset() <= cut);
        }
      }
    }
    SUBCASE("bad magic") {
      auto broken = bytes;
      broken[0] = 'X';
      CHECK_THROWS_AS(load_model(broken), FormatError);
    }
  }
}

TEST_CASE("predict and update cost grows linearly in the field count") {
  std::mt19937_64 rng(3);
  auto time_per_call = [&](int fields) {
    const LwprModel m = random_model(rng, 4, fields);
    LwprModel trainable = m;
    trainable.set_generation_enabled(false);
    const auto x = random_point(rng, 4, 0.2);
    double best = 1e9;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      double sink = 0;
      for (int i = 0; i < 2000; ++i) {
        sink += m.predict(x).mean;
        trainable.update(x, sink * 1e-9);
      }
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
      CHECK(std::isfinite(sink));
    }
    return best;
  };
  const double t16 = time_per_call(16);
  const double t64 = time_per_call(64);
  const double ratio = t64 / t16;
  MESSAGE("64/16 field time ratio " << ratio);
  CHECK(ratio > 2.0);
  CHECK(ratio < 8.0);
}
