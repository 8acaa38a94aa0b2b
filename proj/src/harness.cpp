#include "pimpc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pimpc/error.hpp"

namespace pimpc {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// training data

TrainingSet samples_from_log(const FlightLog& log) {
  TrainingSet set;
  set.samples.reserve(log.rows.size());
  for (const LogRow& r : log.rows) {
    set.samples.push_back({learned_input(r.state, r.command), r.accel});
  }
  return set;
}

TrainingSet ingest_logs(const std::vector<std::string>& paths) {
  TrainingSet set;
  for (const auto& path : paths) {
    ParsedLog parsed = read_flight_log(path);
    TrainingSet part = samples_from_log(parsed.log);
    set.samples.insert(set.samples.end(), part.samples.begin(), part.samples.end());
    for (auto& r : parsed.rejected) {
      set.rejected.push_back(r);
      set.rejected_files.push_back(path);
    }
  }
  return set;
}

lwpr::Hyperparams default_hybrid_hyperparams() {
  lwpr::Hyperparams p;
  const std::array<double, 4> scales = {0.25, 0.25, 0.5, 0.05};
  p.init_metric = lwpr::metric_from_length_scales(scales);
  return p;
}

HybridModel train_hybrid(const TrainingSet& data, const lwpr::Hyperparams& params,
                         TrainSummary* summary) {
  if (data.samples.empty()) throw InputError("no training samples");
  HybridModel model = HybridModel::untrained(params);
  for (const TrainingSample& s : data.samples) {
    for (int axis = 0; axis < 3; ++axis) model.axis(axis).update(s.input, s.target(axis));
  }
  if (summary != nullptr) {
    summary->samples = data.samples.size();
    for (int axis = 0; axis < 3; ++axis) {
      summary->field_counts[static_cast<std::size_t>(axis)] = model.axis(axis).size();
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// configuration

SettingSpec default_setting(const std::string& name) {
  SettingSpec s;
  s.name = name;
  if (name == "analytic") {
    s.learned = false;
    s.num_rollouts = 1000;
    s.iterations = 2;
    return s;
  }
  if (name.size() < 2 || name[0] != 'M') {
    throw ConfigError("unknown setting '" + name + "' (expected analytic or M<n>)");
  }
  int m = 0;
  try {
    std::size_t used = 0;
    m = std::stoi(name.substr(1), &used);
    if (used != name.size() - 1) throw std::invalid_argument(name);
  } catch (const std::exception&) {
    throw ConfigError("unknown setting '" + name + "' (expected analytic or M<n>)");
  }
  if (m < 1) throw ConfigError("setting '" + name + "' needs at least one sub-rollout");
  s.learned = true;
  s.sub_rollouts = m;
  s.num_rollouts = m == 16 ? 970 : m == 32 ? 950 : 1000;
  s.iterations = m <= 4 ? 2 : 1;
  return s;
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
  ExperimentConfig e;
  e.trials = c.get_int("trials", e.trials);
  e.seed = c.get_u64("seed", e.seed);
  e.workers = static_cast<std::size_t>(c.get_int("workers", static_cast<int>(e.workers)));
  e.step_cap = c.get_int("step_cap", e.step_cap);
  e.fallback_step_cap = c.get_int("fallback_step_cap", e.fallback_step_cap);
  e.training_flights = c.get_int("training_flights", e.training_flights);
  e.training_rollouts = c.get_int("training_rollouts", e.training_rollouts);
  e.model_path = c.get_string("model_path", e.model_path);
  e.out_dir = c.get_string("out", e.out_dir);

  PiConfig& pi = e.controller;
  pi.horizon_steps = c.get_int("controller.horizon_steps", pi.horizon_steps);
  pi.temperature = c.get_double("controller.temperature", pi.temperature);
  pi.cost_ceiling = c.get_double("controller.cost_ceiling", pi.cost_ceiling);
  pi.num_rollouts = c.get_int("controller.num_rollouts", pi.num_rollouts);
  pi.sub_rollouts = c.get_int("controller.sub_rollouts", pi.sub_rollouts);
  pi.iterations_per_step = c.get_int("controller.iterations", pi.iterations_per_step);
  const auto stds = c.get_doubles("controller.exploration_std",
                                  {pi.exploration_std.begin(), pi.exploration_std.end()});
  if (stds.size() != 4) throw ConfigError("controller.exploration_std needs 4 values");
  std::copy(stds.begin(), stds.end(), pi.exploration_std.begin());

  QuadParams& q = e.quad;
  q.mass = c.get_double("quad.mass", q.mass);
  q.gravity = c.get_double("quad.gravity", q.gravity);
  q.rate_gain = c.get_double("quad.rate_gain", q.rate_gain);
  q.thrust_max = c.get_double("quad.thrust_max", 2.0 * q.mass * q.gravity);
  q.rate_max = c.get_double("quad.rate_max", q.rate_max);
  q.dt = c.get_double("quad.dt", q.dt);

  e.truth.drag = c.get_double("truth.drag", e.truth.drag);
  e.truth.thrust_scale = c.get_double("truth.thrust_scale", e.truth.thrust_scale);

  Task& t = e.task;
  t.laps = c.get_int("task.laps", t.laps);
  t.waypoint_radius = c.get_double("task.waypoint_radius", t.waypoint_radius);
  t.z_floor = c.get_double("task.z_floor", t.z_floor);
  for (int i = 0; i < 3; ++i) {
    const std::string key = "task.waypoint" + std::to_string(i);
    auto& w = t.waypoints[static_cast<std::size_t>(i)];
    const auto v = c.get_doubles(key, {w(0), w(1), w(2)});
    if (v.size() != 3) throw ConfigError(key + " needs 3 values");
    w = Vec3(v[0], v[1], v[2]);
  }
  if (c.has("task.obstacles")) {
    const auto v = c.get_doubles("task.obstacles", {});
    if (v.size() % 2 != 0) throw ConfigError("task.obstacles needs x,y pairs");
    t.obstacles.clear();
    for (std::size_t i = 0; i < v.size(); i += 2) t.obstacles.emplace_back(v[i], v[i + 1]);
  }
  const auto spawn = c.get_doubles("task.spawn", {t.spawn(0), t.spawn(1), t.spawn(2)});
  if (spawn.size() != 3) throw ConfigError("task.spawn needs 3 values");
  t.spawn = Vec3(spawn[0], spawn[1], spawn[2]);
  const auto lo = c.get_doubles("task.arena_lo", {t.arena.lo(0), t.arena.lo(1), t.arena.lo(2)});
  const auto hi = c.get_doubles("task.arena_hi", {t.arena.hi(0), t.arena.hi(1), t.arena.hi(2)});
  if (lo.size() != 3 || hi.size() != 3) throw ConfigError("task.arena_lo/hi need 3 values");
  t.arena.lo = Vec3(lo[0], lo[1], lo[2]);
  t.arena.hi = Vec3(hi[0], hi[1], hi[2]);

  lwpr::Hyperparams& l = e.lwpr;
  l.w_gen = c.get_double("lwpr.w_gen", l.w_gen);
  l.participation = c.get_double("lwpr.participation", l.participation);
  l.forgetting = c.get_double("lwpr.forgetting", l.forgetting);
  l.ridge = c.get_double("lwpr.ridge", l.ridge);
  if (c.has("lwpr.length_scales")) {
    const auto s = c.get_doubles("lwpr.length_scales", {});
    if (s.size() != 4) throw ConfigError("lwpr.length_scales needs 4 values");
    try {
      l.init_metric = lwpr::metric_from_length_scales(s);
    } catch (const InputError& err) {
      throw ConfigError(std::string("lwpr.length_scales: ") + err.what());
    }
  }

  const auto names = c.get_list("settings", {"analytic", "M1", "M4", "M8", "M16", "M32"});
  const double scale = c.get_double("rollout_scale", 1.0);
  for (const auto& raw : names) {
    const std::string name = raw == "analytic" || raw[0] == 'M' ? raw : "M" + raw;
    SettingSpec s = default_setting(name);
    s.num_rollouts = std::max(1, static_cast<int>(std::lround(s.num_rollouts * scale)));
    s.num_rollouts = c.get_int("setting." + name + ".rollouts", s.num_rollouts);
    s.iterations = c.get_int("setting." + name + ".iterations", s.iterations);
    e.settings.push_back(s);
  }
  e.validate();
  return e;
}

void ExperimentConfig::validate() const {
  try {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (step_cap < 0 || fallback_step_cap < 1) throw ConfigError("step caps must be positive");
    if (training_flights < 1) throw ConfigError("training_flights must be >= 1");
    if (training_rollouts < 1) throw ConfigError("training_rollouts must be >= 1");
    if (settings.empty()) throw ConfigError("no settings configured");
    for (const auto& s : settings) {
      if (s.num_rollouts < 1 || s.iterations < 0 || s.sub_rollouts < 1) {
        throw ConfigError("setting " + s.name + " has invalid budgets");
      }
    }
    controller.validate();
    quad.validate();
    task.validate();
    GroundTruthModel check(truth, quad);
    lwpr::LwprModel probe(4, lwpr);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// reporting

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

MetricsReport build_report(const std::vector<TrialRecord>& trials, const Task& task,
                           double dt, double horizon_seconds) {
  MetricsReport report;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<TrialMetrics>> completed;
  for (const TrialRecord& t : trials) {
    auto it = index.find(t.setting);
    if (it == index.end()) {
      it = index.emplace(t.setting, report.settings.size()).first;
      report.settings.push_back({});
      report.settings.back().setting = t.setting;
      completed.emplace_back();
    }
    SettingRow& row = report.settings[it->second];
    ++row.trials;
    switch (t.outcome) {
      case Outcome::kCompleted:
        ++row.completed;
        completed[it->second].push_back(metrics_from_log(t.log, task, dt, horizon_seconds));
        break;
      case Outcome::kCrashed: ++row.crashed; break;
      case Outcome::kOutOfBounds: ++row.out_of_bounds; break;
      case Outcome::kTimeout: ++row.timeout; break;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < report.settings.size(); ++i) {
    SettingRow& row = report.settings[i];
    const auto& ms = completed[i];
    if (ms.empty()) {
      row.avg_time = row.avg_total_cost = row.avg_cost_per_sec = row.avg_8_closest = nan;
      row.prediction_variance = Vec3::Constant(nan);
      continue;
    }
    const auto n = static_cast<double>(ms.size());
    for (const TrialMetrics& m : ms) {
      row.avg_time += m.completion_time / n;
      row.avg_total_cost += m.total_cost / n;
      row.avg_cost_per_sec += m.avg_cost_per_sec_horizon / n;
      row.avg_8_closest += m.closest.avg_closest / n;
      row.prediction_variance += m.mean_prediction_variance / n;
    }
  }
  return report;
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "setting,trials,completed,crashed,out_of_bounds,timeout,avg_time,avg_total_cost,"
        "avg_cost_per_sec,avg_8_closest,var_ax,var_ay,var_az\n";
  for (const SettingRow& r : report.settings) {
    os << r.setting << ',' << r.trials << ',' << r.completed << ',' << r.crashed << ','
       << r.out_of_bounds << ',' << r.timeout << ',' << fmt(r.avg_time) << ','
       << fmt(r.avg_total_cost) << ',' << fmt(r.avg_cost_per_sec) << ','
       << fmt(r.avg_8_closest) << ',' << fmt(r.prediction_variance(0)) << ','
       << fmt(r.prediction_variance(1)) << ',' << fmt(r.prediction_variance(2)) << '\n';
  }
  return os.str();
}

std::string propagation_csv(const std::vector<PropagationError>& rows) {
  std::ostringstream os;
  os << "model,segments,pos_err_x,pos_err_y,pos_err_z,vel_err_x,vel_err_y,vel_err_z\n";
  for (const auto& r : rows) {
    os << r.model << ',' << r.segments;
    for (int i = 0; i < 3; ++i) os << ',' << fmt(r.position(i));
    for (int i = 0; i < 3; ++i) os << ',' << fmt(r.velocity(i));
    os << '\n';
  }
  return os.str();
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream os;
  char buf[256];
  os << "Performance (averages over completed trials)\n";
  std::snprintf(buf, sizeof(buf), "%-10s %6s %6s %6s %6s %6s %9s %11s %10s %9s\n", "setting",
                "trials", "done", "crash", "oob", "tmo", "time[s]", "total_cost", "cost/sec",
                "closest8");
  os << buf;
  for (const SettingRow& r : report.settings) {
    std::snprintf(buf, sizeof(buf), "%-10s %6d %6d %6d %6d %6d %9.2f %11.2f %10.2f %9.3f\n",
                  r.setting.c_str(), r.trials, r.completed, r.crashed, r.out_of_bounds,
                  r.timeout, r.avg_time, r.avg_total_cost, r.avg_cost_per_sec, r.avg_8_closest);
    os << buf;
  }
  os << "\nMean predictive variance of the acceleration regressors\n";
  std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s\n", "setting", "ax", "ay", "az");
  os << buf;
  for (const SettingRow& r : report.settings) {
    std::snprintf(buf, sizeof(buf), "%-10s %10.4f %10.4f %10.4f\n", r.setting.c_str(),
                  r.prediction_variance(0), r.prediction_variance(1), r.prediction_variance(2));
    os << buf;
  }
  if (!report.propagation.empty()) {
    os << "\nOpen-loop propagation error after the horizon\n";
    std::snprintf(buf, sizeof(buf), "%-10s %8s %8s %8s %8s %8s %8s %8s\n", "model", "segments",
                  "pos_x", "pos_y", "pos_z", "vel_x", "vel_y", "vel_z");
    os << buf;
    for (const auto& p : report.propagation) {
      std::snprintf(buf, sizeof(buf), "%-10s %8d %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f\n",
                    p.model.c_str(), p.segments, p.position(0), p.position(1), p.position(2),
                    p.velocity(0), p.velocity(1), p.velocity(2));
      os << buf;
    }
  }
  return os.str();
}

void write_trials(const std::string& dir, std::vector<TrialRecord>& trials) {
  fs::create_directories(fs::path(dir) / "trials");
  std::ofstream index(fs::path(dir) / "trials.csv", std::ios::binary);
  if (!index) throw std::runtime_error("cannot write " + dir + "/trials.csv");
  index << "setting,trial,seed,outcome,switches,log\n";
  for (TrialRecord& t : trials) {
    if (t.log_file.empty()) {
      t.log_file = "trials/" + t.setting + "_trial" + std::to_string(t.trial) + ".csv";
    }
    write_flight_log((fs::path(dir) / t.log_file).string(), t.log);
    index << t.setting << ',' << t.trial << ',' << t.seed << ',' << to_string(t.outcome) << ','
          << t.switches << ',' << t.log_file << '\n';
  }
}

std::vector<TrialRecord> load_trials(const std::string& dir) {
  const fs::path index_path = fs::path(dir) / "trials.csv";
  std::ifstream is(index_path);
  if (!is) throw std::runtime_error("cannot read " + index_path.string());
  std::string line;
  std::getline(is, line);
  std::vector<TrialRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw FormatError("trials.csv: expected 6 fields", line_no);
    TrialRecord t;
    t.setting = cells[0];
    t.trial = std::stoi(cells[1]);
    t.seed = std::stoull(cells[2]);
    t.outcome = outcome_from_string(cells[3]);
    t.switches = std::stoi(cells[4]);
    t.log_file = cells[5];
    ParsedLog parsed = read_flight_log((fs::path(dir) / t.log_file).string());
    if (!parsed.rejected.empty()) {
      throw FormatError(t.log_file + ": " + parsed.rejected.front().reason,
                        parsed.rejected.front().line);
    }
    t.log = std::move(parsed.log);
    out.push_back(std::move(t));
  }
  return out;
}

PropagationError propagation_error(const std::vector<FlightLog>& logs,
                                   const DynamicsModel& model, const std::string& name,
                                   int horizon, int stride) {
  if (horizon < 1 || stride < 1) throw InputError("horizon and stride must be >= 1");
  PropagationError out;
  out.model = name;
  const auto h = static_cast<std::size_t>(horizon);
  std::vector<Control> commands(h);
  for (const FlightLog& log : logs) {
    const auto& rows = log.rows;
    for (std::size_t start = 0; start + h < rows.size(); start += static_cast<std::size_t>(stride)) {
      for (std::size_t i = 0; i < h; ++i) commands[i] = rows[start + i].command;
      const Propagation p = propagate(model, rows[start].state, commands, h);
      const QuadState& predicted = p.states.back();
      const QuadState& actual = rows[start + h].state;
      out.position += (predicted.position - actual.position).cwiseAbs();
      out.velocity += (predicted.velocity - actual.velocity).cwiseAbs();
      ++out.segments;
    }
  }
  if (out.segments > 0) {
    out.position /= out.segments;
    out.velocity /= out.segments;
  }
  return out;
}

// ---------------------------------------------------------------------------
// orchestration

namespace {

constexpr std::uint64_t kTrainingSeedOffset = 10000;
constexpr std::uint64_t kHeldoutSeedOffset = 20000;

PiConfig setting_config(const PiConfig& base, const SettingSpec& s) {
  PiConfig c = base;
  c.num_rollouts = s.num_rollouts;
  c.sub_rollouts = s.sub_rollouts;
  c.iterations_per_step = s.iterations;
  return c;
}

}  // namespace

LearnedModelBundle generate_and_train(const ExperimentConfig& config) {
  const AnalyticModel analytic(config.quad);
  const GroundTruthModel truth(config.truth, config.quad);
  PiConfig pi = config.controller;
  pi.num_rollouts = config.training_rollouts;
  pi.sub_rollouts = 1;
  pi.iterations_per_step = 2;
  TrialOptions options;
  options.step_cap = config.fallback_step_cap;
  options.workers = config.workers;

  std::vector<FlightLog> training;
  for (int i = 0; i < config.training_flights; ++i) {
    training.push_back(run_trial(config.task, pi, analytic, truth,
                                 config.seed + kTrainingSeedOffset + static_cast<std::uint64_t>(i),
                                 options)
                           .log);
  }
  std::vector<FlightLog> heldout;
  heldout.push_back(
      run_trial(config.task, pi, analytic, truth, config.seed + kHeldoutSeedOffset, options).log);

  TrainingSet data;
  for (const auto& log : training) {
    TrainingSet part = samples_from_log(log);
    data.samples.insert(data.samples.end(), part.samples.begin(), part.samples.end());
  }
  TrainSummary summary;
  HybridModel model = train_hybrid(data, config.lwpr, &summary);
  return {std::move(model), summary, std::move(training), std::move(heldout)};
}

ExperimentResult run_experiment(const ExperimentConfig& config, const HybridModel* model,
                                const std::vector<FlightLog>& heldout,
                                const std::string& out_dir,
                                const std::function<void(const TrialRecord&)>& progress) {
  config.validate();
  const GroundTruthModel truth(config.truth, config.quad);
  const AnalyticModel analytic(config.quad);
  std::optional<LearnedModel> learned;
  if (model != nullptr) learned.emplace(*model, config.quad);

  // Analytic first: its completion length sets the automatic step cap.
  std::vector<SettingSpec> order = config.settings;
  std::stable_partition(order.begin(), order.end(),
                        [](const SettingSpec& s) { return !s.learned; });

  ExperimentResult result;
  int cap = config.step_cap > 0 ? config.step_cap : config.fallback_step_cap;
  bool cap_fixed = config.step_cap > 0;
  for (const SettingSpec& s : order) {
    if (s.learned && !learned) {
      throw ModelError("setting " + s.name + " needs a trained learned model");
    }
    const DynamicsModel& control_model =
        s.learned ? static_cast<const DynamicsModel&>(*learned) : analytic;
    TrialOptions options;
    options.step_cap = cap;
    options.workers = config.workers;
    options.variance_probe = model;
    std::vector<double> analytic_steps;
    for (int t = 0; t < config.trials; ++t) {
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
      TrialResult r = run_trial(config.task, setting_config(config.controller, s), control_model,
                                truth, seed, options);
      if (!s.learned && r.outcome == Outcome::kCompleted) {
        analytic_steps.push_back(static_cast<double>(r.log.rows.size()));
      }
      TrialRecord rec;
      rec.setting = s.name;
      rec.trial = t;
      rec.seed = seed;
      rec.outcome = r.outcome;
      rec.switches = r.completed_switches;
      rec.log = std::move(r.log);
      if (progress) progress(rec);
      result.trials.push_back(std::move(rec));
    }
    if (!cap_fixed && !s.learned && !analytic_steps.empty()) {
      double mean = 0.0;
      for (double v : analytic_steps) mean += v / static_cast<double>(analytic_steps.size());
      cap = static_cast<int>(std::ceil(4.0 * mean));
      cap_fixed = true;
    }
  }
  result.step_cap = cap;

  const double dt = config.quad.dt;
  result.report = build_report(result.trials, config.task, dt,
                               config.controller.horizon_steps * dt);
  if (!heldout.empty()) {
    result.report.propagation.push_back(
        propagation_error(heldout, analytic, "analytic", config.controller.horizon_steps));
    if (learned) {
      result.report.propagation.push_back(
          propagation_error(heldout, *learned, "learned", config.controller.horizon_steps));
    }
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_trials(out_dir, result.trials);
    std::ofstream(fs::path(out_dir) / "report.csv", std::ios::binary) << report_csv(result.report);
    std::ofstream(fs::path(out_dir) / "report.txt", std::ios::binary) << report_table(result.report);
    if (!result.report.propagation.empty()) {
      std::ofstream(fs::path(out_dir) / "propagation_error.csv", std::ios::binary)
          << propagation_csv(result.report.propagation);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// throughput

std::vector<BenchCase> default_bench_cases() {
  return {{"analytic_M1", false, 1, 1000},
          {"learned_M1", true, 1, 1000},
          {"learned_M32", true, 32, 1000}};
}

constexpr double kBenchMinMs = 2000.0;
constexpr int kBenchMaxFactor = 50;

BenchReport benchmark(const std::vector<BenchCase>& cases, const PiConfig& base,
                      const HybridModel* model, const QuadParams& quad, const Task& task,
                      std::vector<std::size_t> worker_counts, int repeats) {
  if (repeats < 1) throw InputError("repeats must be >= 1");
  if (worker_counts.empty()) worker_counts = {1, WorkerPool::max_workers()};
  const AnalyticModel analytic(quad);
  std::optional<LearnedModel> learned;
  if (model != nullptr) learned.emplace(*model, quad);

  QuadState state;
  state.position = task.spawn;
  const NavigationCost cost(task, 0);

  BenchReport report;
  for (const BenchCase& c : cases) {
    if (c.learned && !learned) throw ModelError("bench case " + c.name + " needs a learned model");
    const DynamicsModel& dyn = c.learned ? static_cast<const DynamicsModel&>(*learned) : analytic;
    PiConfig pi = base;
    pi.num_rollouts = c.num_rollouts;
    pi.sub_rollouts = c.sub_rollouts;
    pi.iterations_per_step = 1;
    const ControlPlan start = ControlPlan::hover(static_cast<std::size_t>(pi.horizon_steps), quad);

    std::optional<ControlPlan> reference;
    for (std::size_t workers : worker_counts) {
      const PathIntegralController controller(pi, workers);
      std::vector<double> ms;
      ControlPlan plan = controller.optimize(state, start, dyn, cost, 0);  // warm-up
      // Short cases repeat until two seconds of samples are collected.
      double total = 0.0;
      for (int r = 0; r < repeats || (total < kBenchMinMs && r < kBenchMaxFactor * repeats);
           ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        plan = controller.optimize(state, start, dyn, cost, 0);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        total += ms.back();
      }
      std::sort(ms.begin(), ms.end());
      const double median = ms[ms.size() / 2];
      if (!reference) {
        reference = plan;
      } else if (reference->controls != plan.controls) {
        report.deterministic = false;
      }
      const int passes = c.learned ? c.sub_rollouts : 1;
      ThroughputRow row;
      row.name = c.name;
      row.workers = workers;
      row.num_rollouts = c.num_rollouts;
      row.sub_rollouts = c.sub_rollouts;
      row.horizon = pi.horizon_steps;
      row.ms_per_iteration = median;
      row.rollout_steps_per_sec = static_cast<double>(c.num_rollouts) * passes *
                                  pi.horizon_steps / (median / 1000.0);
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::ostringstream os;
  os << "case,workers,rollouts,sub_rollouts,horizon,ms_per_iteration,rollout_steps_per_sec\n";
  for (const auto& r : report.rows) {
    os << r.name << ',' << r.workers << ',' << r.num_rollouts << ',' << r.sub_rollouts << ','
       << r.horizon << ',' << fmt(r.ms_per_iteration) << ',' << fmt(r.rollout_steps_per_sec)
       << '\n';
  }
  return os.str();
}

}  // namespace pimpc
