// Acceptance gate. Each criterion prints one PASS/FAIL line; the exit code is
// non-zero if any selected criterion fails.
//
//   acceptance            run everything
//   acceptance 1 2 12     run a subset

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pimpc/controller.hpp"
#include "pimpc/harness.hpp"
#include "pimpc/lwpr.hpp"
#include "pimpc/parallel.hpp"
#include "pimpc/simworld.hpp"

using namespace pimpc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. weight normalization

Verdict weight_normalization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng() % 1000;
    const double scale = std::pow(10.0, 4.0 * u(rng) - 1.0);
    std::vector<double> costs(k);
    for (auto& c : costs) c = scale * u(rng);
    const double lambda = std::pow(10.0, 3.0 * u(rng) - 2.0);
    const auto w = path_weights(costs, lambda);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    const double shift = 1e3 * (u(rng) - 0.5);
    for (auto& c : costs) c += shift;
    const auto ws = path_weights(costs, lambda);
    for (std::size_t i = 0; i < k; ++i) worst_shift = std::max(worst_shift, std::abs(w[i] - ws[i]));
  }
  const double elapsed = seconds_since(t0);
  return {worst_sum <= 1e-9 && worst_shift <= 1e-12 && elapsed < 1.0,
          format("max |sum-1| %.2e, max shift change %.2e, %.3f s", worst_sum, worst_shift, elapsed)};
}

// ---------------------------------------------------------------------------
// 2. temperature limits

Verdict temperature_limits() {
  const auto t0 = std::chrono::steady_clock::now();
  const int k = 200, n = 50;
  PiConfig config;
  config.num_rollouts = k;
  config.horizon_steps = n;
  config.rng_seed = 17;
  config.exploration_std = {0.5, 0.5, 0.3, 0.01};
  const QuadParams quad;
  const ControlPlan plan = ControlPlan::hover(static_cast<std::size_t>(n), quad);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RolloutBatch batch;
  batch.noise = sample_noise(config, 0, 0);
  const double cost_scale = 100.0;
  for (int r = 0; r < k; ++r)
    for (int i = 0; i < n; ++i) batch.costs_to_go.push_back(cost_scale * u(rng));

  const ControlPlan greedy = path_integral_update(plan, batch, 1e-12 * cost_scale, quad);
  const ControlPlan flat = path_integral_update(plan, batch, 1e12, quad);
  double err_greedy = 0.0, err_flat = 0.0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    std::array<double, 4> mean{};
    for (int r = 0; r < k; ++r) {
      if (batch.cost(r, i) < batch.cost(best, i)) best = r;
      for (std::size_t c = 0; c < 4; ++c) mean[c] += batch.noise.at(r, i)[c] / k;
    }
    const auto idx = static_cast<std::size_t>(i);
    for (int c = 0; c < 4; ++c) {
      const auto ch = static_cast<std::size_t>(c);
      auto delta = [&](const ControlPlan& p) {
        return c < 3 ? p.controls[idx].desired_rates(c) - plan.controls[idx].desired_rates(c)
                     : p.controls[idx].thrust - plan.controls[idx].thrust;
      };
      err_greedy = std::max(err_greedy, std::abs(delta(greedy) - batch.noise.at(best, i)[ch]));
      err_flat = std::max(err_flat, std::abs(delta(flat) - mean[ch]));
    }
  }
  const double elapsed = seconds_since(t0);
  return {err_greedy <= 1e-6 && err_flat <= 1e-6 && elapsed < 1.0,
          format("argmin error %.2e, uniform-mean error %.2e, %.3f s", err_greedy, err_flat, elapsed)};
}

// ---------------------------------------------------------------------------
// 3. regression recovery against batch least squares

Verdict lwpr_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  lwpr::Hyperparams p;
  p.init_metric = lwpr::metric_from_length_scales(std::vector<double>{0.2});
  lwpr::LwprModel model(1, p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  Eigen::MatrixXd a(500, 2);
  Eigen::VectorXd b(500);
  for (int i = 0; i < 500; ++i) {
    const double x = ux(rng);
    const double y = 2.0 * x + 1.0 + noise(rng);
    model.update(std::vector<double>{x}, y);
    a.row(i) << 1.0, x;
    b(i) = y;
  }
  const Eigen::Vector2d ols = a.colPivHouseholderQr().solve(b);
  const double at_half = model.predict(std::vector<double>{0.5}).mean;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double x = (i + 0.5) / 20.0;
    worst = std::max(worst, std::abs(model.predict(std::vector<double>{x}).mean - (ols(0) + ols(1) * x)));
  }
  const double elapsed = seconds_since(t0);
  return {std::abs(at_half - 2.0) <= 0.05 && worst <= 0.02 && elapsed < 5.0,
          format("predict(0.5) = %.5f, max |lwpr - ols| %.2e over 20 probes, %zu fields, %.3f s",
                 at_half, worst, model.size(), elapsed)};
}

// ---------------------------------------------------------------------------
// 4. blended prediction against a direct evaluation

Verdict blend_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 4);
    const int fields = 1 + static_cast<int>(rng() % 5);
    lwpr::Hyperparams p;
    p.init_metric = Eigen::MatrixXd::Identity(dim, dim);
    lwpr::LwprModel model(dim, p);
    std::vector<Eigen::VectorXd> centers;
    std::vector<Eigen::MatrixXd> metrics;
    std::vector<Eigen::VectorXd> coefs;
    std::vector<double> vars;
    for (int j = 0; j < fields; ++j) {
      lwpr::ReceptiveField f;
      f.center = Eigen::VectorXd::NullaryExpr(dim, [&] { return u(rng); });
      const Eigen::MatrixXd g = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return u(rng); });
      f.metric = g * g.transpose() + 0.3 * Eigen::MatrixXd::Identity(dim, dim);
      f.coefficients = Eigen::VectorXd::NullaryExpr(dim + 1, [&] { return 3.0 * u(rng); });
      f.local_variance = 0.5 * (1.0 + u(rng));
      centers.push_back(f.center);
      metrics.push_back(f.metric);
      coefs.push_back(f.coefficients);
      vars.push_back(f.local_variance);
      model.add_field(f);
    }
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = 1.5 * u(rng);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim);

    // y(x) = sum_j w_j y_j(x); var = sum_j w_j ((y - y_j)^2 + sigma_j^2)
    std::vector<double> kernel, local;
    for (int j = 0; j < fields; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const Eigen::VectorXd d = xv - centers[jj];
      kernel.push_back(std::exp(-0.5 * d.dot(metrics[jj] * d)));
      local.push_back(coefs[jj](0) + coefs[jj].tail(dim).dot(d));
    }
    const double z = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    double mean = 0.0;
    for (int j = 0; j < fields; ++j) mean += kernel[static_cast<std::size_t>(j)] / z * local[static_cast<std::size_t>(j)];
    double var = 0.0;
    for (int j = 0; j < fields; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      var += kernel[jj] / z * ((mean - local[jj]) * (mean - local[jj]) + vars[jj]);
    }
    const lwpr::Prediction pr = model.predict(x);
    worst = std::max({worst, std::abs(pr.mean - mean), std::abs(pr.variance - var)});
  }
  return {worst <= 1e-10, format("max deviation %.2e over 100 random models", worst)};
}

// ---------------------------------------------------------------------------
// 5. determinism under parallelism

Verdict parallel_determinism() {
  const std::size_t max_workers = std::max<std::size_t>(WorkerPool::max_workers(), 4);
  std::mt19937_64 rng(5);
  const Task task = Task::standard();
  const AnalyticModel analytic;

  // A small trained model so the stochastic path is covered too.
  lwpr::Hyperparams lp = default_hybrid_hyperparams();
  HybridModel hybrid = HybridModel::untrained(lp);
  const GroundTruthModel truth(Perturbation{0.3, 0.92});
  std::uniform_real_distribution<double> ang(-0.5, 0.5), thr(0.1, 0.3);
  for (int i = 0; i < 400; ++i) {
    QuadState s;
    s.angles = Vec3(ang(rng), ang(rng), ang(rng));
    Control c;
    c.thrust = thr(rng);
    const Vec3 a = truth.accel(s, c);
    for (int axis = 0; axis < 3; ++axis) hybrid.axis(axis).update(learned_input(s, c), a(axis));
  }
  const LearnedModel learned(hybrid);

  int identical = 0;
  for (int trial = 0; trial < 10; ++trial) {
    PiConfig c;
    c.num_rollouts = 20 + static_cast<int>(rng() % 300);
    c.horizon_steps = 10 + static_cast<int>(rng() % 41);
    c.iterations_per_step = 1 + static_cast<int>(rng() % 2);
    c.sub_rollouts = trial % 2 == 0 ? 1 : 1 + static_cast<int>(rng() % 6);
    c.temperature = 0.05 + 0.01 * static_cast<double>(rng() % 100);
    c.rng_seed = rng();
    const DynamicsModel& model = trial % 2 == 0 ? static_cast<const DynamicsModel&>(analytic) : learned;
    QuadState s;
    s.position = task.waypoints[static_cast<std::size_t>(trial % 3)] + Vec3(0.1, -0.2, 0.05);
    s.velocity = Vec3(0.3, 0.1, -0.1);
    const NavigationCost cost(task, (trial + 1) % 3);
    const ControlPlan start = ControlPlan::hover(static_cast<std::size_t>(c.horizon_steps), QuadParams{});
    const auto cycle = static_cast<std::uint64_t>(rng() % 1000);
    const ControlPlan one = PathIntegralController(c, 1).optimize(s, start, model, cost, cycle);
    const ControlPlan many = PathIntegralController(c, max_workers).optimize(s, start, model, cost, cycle);
    if (one.controls == many.controls) ++identical;
  }
  return {identical == 10,
          format("%d/10 configs bitwise identical for 1 vs %zu workers", identical, max_workers)};
}

// ---------------------------------------------------------------------------
// 6. closed-loop completion with the analytic model

Verdict closed_loop_completion() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig e = ExperimentConfig::from_config(Config{});
  PiConfig c = e.controller;
  c.num_rollouts = 1000;
  c.horizon_steps = 50;
  c.iterations_per_step = 2;
  const AnalyticModel analytic(e.quad);
  const GroundTruthModel truth(e.truth, e.quad);
  TrialOptions opt;
  opt.step_cap = e.fallback_step_cap;
  opt.workers = WorkerPool::max_workers();
  int completed = 0;
  std::string times;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrialResult r = run_trial(e.task, c, analytic, truth, seed, opt);
    if (r.outcome == Outcome::kCompleted) ++completed;
    times += format(" %s/%.1fs", to_string(r.outcome).c_str(), r.metrics.completion_time);
  }
  return {completed >= 4, format("%d/5 seeds completed (%s ), %.0f s wall", completed,
                                 times.c_str(), seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 7. learned vs analytic open-loop propagation

Verdict propagation_comparison() {
  const ExperimentConfig e = ExperimentConfig::from_config(Config{});
  const LearnedModelBundle bundle = generate_and_train(e);
  const AnalyticModel analytic(e.quad);
  const LearnedModel learned(bundle.model, e.quad);
  const int horizon = static_cast<int>(std::lround(1.0 / e.quad.dt));
  const PropagationError pa = propagation_error(bundle.heldout, analytic, "analytic", horizon);
  const PropagationError pl = propagation_error(bundle.heldout, learned, "learned", horizon);
  const bool better = (pl.position.array() < pa.position.array()).all();
  return {better && pl.segments >= 50,
          format("%d held-out segments; position error analytic (%.3f %.3f %.3f) m vs learned "
                 "(%.3f %.3f %.3f) m; fields %zu/%zu/%zu",
                 pl.segments, pa.position(0), pa.position(1), pa.position(2), pl.position(0),
                 pl.position(1), pl.position(2), bundle.summary.field_counts[0],
                 bundle.summary.field_counts[1], bundle.summary.field_counts[2])};
}

// ---------------------------------------------------------------------------
// 8 + 9. sub-rollout trends over the sweep

// Desk-scale sweep: every learned setting gets the same reduced rollout
// budget so the five settings fit on a single core. Two iterations for all;
// with one iteration at this K the high-M settings stall near waypoints.
constexpr int kTrendRollouts = 128;
constexpr int kTrendIterations = 2;

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

struct TrendRun {
  MetricsReport report;
  double wall = 0.0;
};

const TrendRun& trend_run() {
  static const TrendRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream cfg;
    cfg << "settings = M1, M4, M8, M16, M32\n"
        << "trials = 5\n"
        << "step_cap = 3000\n";
    for (int m : {1, 4, 8, 16, 32}) {
      cfg << "[setting.M" << m << "]\nrollouts = " << kTrendRollouts
          << "\niterations = " << kTrendIterations << "\n";
    }
    const ExperimentConfig e = ExperimentConfig::from_config(Config::from_string(cfg.str()));
    const LearnedModelBundle bundle = generate_and_train(e);
    ExperimentResult r = run_experiment(e, &bundle.model, {}, {}, [&](const TrialRecord& t) {
      std::fprintf(stderr, "  %s seed %llu: %s, %.0f s elapsed\n", t.setting.c_str(),
                   static_cast<unsigned long long>(t.seed), to_string(t.outcome).c_str(),
                   seconds_since(t0));
    });
    std::printf("%s\n", report_table(r.report).c_str());
    return TrendRun{std::move(r.report), seconds_since(t0)};
  }();
  return run;
}

Verdict variance_trend() {
  const TrendRun& run = trend_run();
  std::vector<double> ms, var;
  std::string listing;
  for (const SettingRow& row : run.report.settings) {
    ms.push_back(std::stod(row.setting.substr(1)));
    var.push_back(row.prediction_variance.mean());
    listing += format(" %s=%.4f(%d/%d)", row.setting.c_str(), var.back(), row.completed, row.trials);
  }
  int inversions = 0;
  bool small = true;
  for (std::size_t i = 0; i + 1 < var.size(); ++i) {
    if (var[i + 1] > var[i]) {
      ++inversions;
      if (var[i + 1] > 1.05 * var[i]) small = false;
    }
  }
  const bool finite = std::all_of(var.begin(), var.end(), [](double v) { return std::isfinite(v); });
  const double rho = finite ? spearman(ms, var) : NAN;
  return {finite && inversions <= 1 && small && rho <= -0.8,
          format("mean variance%s; inversions %d, spearman %.2f; sweep %.0f s", listing.c_str(),
                 inversions, rho, run.wall)};
}

Verdict closest_pass_trend() {
  const TrendRun& run = trend_run();
  double m1 = NAN, m32 = NAN;
  for (const SettingRow& row : run.report.settings) {
    if (row.setting == "M1") m1 = row.avg_8_closest;
    if (row.setting == "M32") m32 = row.avg_8_closest;
  }
  const double gain = m32 / m1 - 1.0;
  return {std::isfinite(gain) && gain >= 0.2,
          format("avg of 8 closest passes M1 %.3f m, M32 %.3f m (%+.0f%%)", m1, m32, 100.0 * gain)};
}

// ---------------------------------------------------------------------------
// 10. sub-rollout averaging on a two-point model

// One axis moves with acceleration +a or -a, each with probability 1/2, drawn
// from the sign of the first sub-rollout noise channel.
class TwoPointModel final : public DynamicsModel {
 public:
  explicit TwoPointModel(double accel) : accel_(accel) {}
  bool stochastic() const override { return true; }
  const QuadParams& params() const override { return params_; }
  QuadState step(const QuadState& s, const Control&, const AccelNoise* noise) const override {
    QuadState n = s;
    const double a = noise == nullptr ? 0.0 : ((*noise)[0] >= 0.0 ? accel_ : -accel_);
    n.position(0) += s.velocity(0) * params_.dt;
    n.velocity(0) += a * params_.dt;
    return n;
  }

 private:
  double accel_;
  QuadParams params_;
};

// q = 1 while beyond the threshold.
class ThresholdCost final : public StageCost {
 public:
  explicit ThresholdCost(double threshold) : threshold_(threshold) {}
  bool crashed(const QuadState&) const override { return false; }
  double cost(const QuadState& s, bool) const override { return s.position(0) > threshold_ ? 1.0 : 0.0; }

 private:
  double threshold_;
};

Verdict subrollout_convergence() {
  const int n = 12;
  const double accel = 5.0, threshold = 0.004, dt = QuadParams{}.dt;
  // Exact expectation by enumerating all 2^n sign sequences.
  double expected = 0.0;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    double x = 0.0, v = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i) {
      x += v * dt;
      v += ((bits >> i) & 1u ? accel : -accel) * dt;
      total += (x > threshold ? 1.0 : 0.0) * dt;
    }
    expected += total / static_cast<double>(1u << n);
  }

  const TwoPointModel model(accel);
  const ThresholdCost cost(threshold);
  WorkerPool pool(1);
  const int k = 4000;
  const ControlPlan plan = ControlPlan::hover(static_cast<std::size_t>(n), QuadParams{});
  std::map<int, double> se;
  std::map<int, double> mean;
  for (int m : {4, 16, 64}) {
    RolloutContext ctx;
    ctx.sub_rollouts = m;
    ctx.seed = 10;
    const RolloutBatch b = evaluate_rollouts(QuadState{}, plan, NoiseArray(k, n), model, cost, ctx, pool);
    double s = 0, s2 = 0;
    for (int r = 0; r < k; ++r) {
      s += b.cost(r, 0);
      s2 += b.cost(r, 0) * b.cost(r, 0);
    }
    mean[m] = s / k;
    se[m] = std::sqrt(s2 / k - mean[m] * mean[m]);
  }
  const double r1 = se[16] / se[4], r2 = se[64] / se[16];
  bool means_ok = true;
  for (int m : {4, 16, 64}) means_ok = means_ok && std::abs(mean[m] - expected) < 4.0 * se[m] / std::sqrt(k);
  const bool pass = std::abs(r1 - 0.5) <= 0.125 && std::abs(r2 - 0.5) <= 0.125 && means_ok;
  return {pass, format("expected cost %.5f; std error M4 %.5f, M16 %.5f, M64 %.5f; ratios %.3f %.3f",
                       expected, se[4], se[16], se[64], r1, r2)};
}

// ---------------------------------------------------------------------------
// 11. throughput report

Verdict throughput() {
  const ExperimentConfig e = ExperimentConfig::from_config(Config{});
  // Any trained model works for timing; fit one on synthetic ground-truth samples.
  HybridModel model = HybridModel::untrained(e.lwpr);
  const GroundTruthModel truth(e.truth, e.quad);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-0.8, 0.8), thr(0.09, 0.37);
  for (int i = 0; i < 2000; ++i) {
    QuadState s;
    s.angles = Vec3(ang(rng), ang(rng), 0.5 * ang(rng));
    Control c;
    c.thrust = thr(rng);
    const Vec3 a = truth.accel(s, c);
    for (int axis = 0; axis < 3; ++axis) model.axis(axis).update(learned_input(s, c), a(axis));
  }
  std::vector<std::size_t> workers{1};
  if (WorkerPool::max_workers() > 1) workers.push_back(WorkerPool::max_workers());
  const auto cases = default_bench_cases();
  const BenchReport a = benchmark(cases, e.controller, &model, e.quad, e.task, workers, 5);
  const BenchReport b = benchmark(cases, e.controller, &model, e.quad, e.task, workers, 5);
  std::printf("%s", bench_csv(a).c_str());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    worst = std::max(worst, std::abs(a.rows[i].ms_per_iteration / b.rows[i].ms_per_iteration - 1.0));
  }
  auto ms = [&](const std::string& name) {
    for (const auto& r : a.rows)
      if (r.name == name && r.workers == 1) return r.ms_per_iteration;
    return std::numeric_limits<double>::quiet_NaN();
  };
  const double analytic = ms("analytic_M1"), m1 = ms("learned_M1"), m32 = ms("learned_M32");
  return {worst <= 0.2 && m32 > m1 && a.deterministic && b.deterministic,
          format("ms/iteration analytic %.1f, learned M1 %.1f, learned M32 %.1f; run-to-run "
                 "deviation %.1f%%",
                 analytic, m1, m32, 100.0 * worst)};
}

// ---------------------------------------------------------------------------
// 12. cost formula point checks

Verdict cost_points() {
  Task t = Task::standard();
  t.obstacles = {Vec2(1e6, 1e6)};
  QuadState s;
  s.position = t.waypoints[0];
  const double at_waypoint = instantaneous_cost(s, t, ProgressState{});
  t.obstacles = {Vec2(s.position(0), s.position(1))};
  const double over_obstacle = instantaneous_cost(s, t, ProgressState{});
  t.waypoints[0] = Vec3(0, 0, 1);
  t.obstacles = {Vec2(0.5, 0.0)};
  s.position = Vec3(1, 0, 1);
  s.angles = Vec3(0.1, 0, 0);
  s.velocity = Vec3(0.5, 0, 0);
  const double mixed = instantaneous_cost(s, t, ProgressState{});
  const bool pass = at_waypoint == 0.0 && std::abs(over_obstacle - 100.0) < 1e-12 &&
                    std::abs(mixed - 9.2350) <= 1e-3;
  return {pass, format("costs %.6f, %.6f, %.6f", at_waypoint, over_obstacle, mixed)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, weight_normalization},  {2, temperature_limits},   {3, lwpr_recovery},
      {4, blend_oracle},          {5, parallel_determinism}, {6, closed_loop_completion},
      {7, propagation_comparison}, {8, variance_trend},      {9, closest_pass_trend},
      {10, subrollout_convergence}, {11, throughput},        {12, cost_points}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && selected.count(id) == 0) continue;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
