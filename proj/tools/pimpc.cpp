// Command line front end: train, fly, sweep, bench, plotdata, report.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>

#include "pimpc/error.hpp"
#include "pimpc/harness.hpp"
#include "pimpc/parallel.hpp"

namespace fs = std::filesystem;
using namespace pimpc;

namespace {

struct CommonFlags {
  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.configs, "Config file (repeatable, later files win)");
  app->add_option("--set", f.overrides, "Override one key, key=value (repeatable)");
  app->add_option("--seed", f.seed, "Base seed");
  app->add_option("--out", f.out, "Output directory or file");
  app->add_option("--workers", f.workers, "Rollout worker threads");
}

Config load_config(const CommonFlags& f) {
  Config c;
  for (const auto& path : f.configs) c.merge(Config::from_file(path));
  for (const auto& o : f.overrides) c.apply_override(o);
  if (f.seed) c.set("seed", std::to_string(*f.seed));
  if (f.out) c.set("out", *f.out);
  if (f.workers) c.set("workers", std::to_string(*f.workers));
  return c;
}

void warn_unused(const Config& c) {
  for (const auto& key : c.unused_keys()) std::fprintf(stderr, "warning: unused key '%s'\n", key.c_str());
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(is), {}};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("cannot write " + path);
}

HybridModel load_hybrid(const std::string& path) {
  const auto bytes = read_bytes(path);
  return HybridModel::load(bytes);
}

void print_summary(const TrainSummary& s) {
  std::printf("trained on %zu samples; fields per axis: ax=%zu ay=%zu az=%zu\n", s.samples,
              s.field_counts[0], s.field_counts[1], s.field_counts[2]);
}

int cmd_train(const CommonFlags& flags, const std::vector<std::string>& logs,
              const std::string& model_out) {
  const Config c = load_config(flags);
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  warn_unused(c);
  TrainSummary summary;
  std::vector<std::uint8_t> bytes;
  if (logs.empty()) {
    std::printf("no logs given; flying %d training flights with the analytic model\n",
                e.training_flights);
    LearnedModelBundle bundle = generate_and_train(e);
    fs::create_directories(e.out_dir);
    for (std::size_t i = 0; i < bundle.training.size(); ++i) {
      write_flight_log((fs::path(e.out_dir) / ("training_" + std::to_string(i) + ".csv")).string(),
                       bundle.training[i]);
    }
    write_flight_log((fs::path(e.out_dir) / "heldout.csv").string(), bundle.heldout.front());
    summary = bundle.summary;
    bytes = bundle.model.save();
  } else {
    const TrainingSet data = ingest_logs(logs);
    for (std::size_t i = 0; i < data.rejected.size(); ++i) {
      std::fprintf(stderr, "%s:%zu: rejected: %s\n", data.rejected_files[i].c_str(),
                   data.rejected[i].line, data.rejected[i].reason.c_str());
    }
    if (!data.rejected.empty()) std::printf("%zu rows rejected\n", data.rejected.size());
    bytes = train_hybrid(data, e.lwpr, &summary).save();
  }
  const std::string path = model_out.empty() ? (fs::path(e.out_dir) / "model.bin").string() : model_out;
  write_bytes(path, bytes);
  print_summary(summary);
  std::printf("model written to %s\n", path.c_str());
  return 0;
}

int cmd_fly(const CommonFlags& flags, const std::string& setting) {
  const Config c = load_config(flags);
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  warn_unused(c);
  SettingSpec s = default_setting(setting);
  for (const auto& configured : e.settings) {
    if (configured.name == setting) s = configured;
  }
  std::optional<HybridModel> model;
  std::optional<LearnedModel> learned;
  const AnalyticModel analytic(e.quad);
  if (s.learned) {
    if (e.model_path.empty()) throw ConfigError("learned settings need model_path");
    model = load_hybrid(e.model_path);
    learned.emplace(*model, e.quad);
  }
  const DynamicsModel& dyn = s.learned ? static_cast<const DynamicsModel&>(*learned) : analytic;
  PiConfig pi = e.controller;
  pi.num_rollouts = s.num_rollouts;
  pi.sub_rollouts = s.sub_rollouts;
  pi.iterations_per_step = s.iterations;
  TrialOptions options;
  options.step_cap = e.step_cap > 0 ? e.step_cap : e.fallback_step_cap;
  options.workers = e.workers;
  options.variance_probe = model ? &*model : nullptr;
  const GroundTruthModel truth(e.truth, e.quad);
  const TrialResult r = run_trial(e.task, pi, dyn, truth, e.seed, options);
  const TrialMetrics m = metrics_from_log(r.log, e.task, e.quad.dt, pi.horizon_steps * e.quad.dt);

  fs::create_directories(e.out_dir);
  const std::string path =
      (fs::path(e.out_dir) / (s.name + "_seed" + std::to_string(e.seed) + ".csv")).string();
  write_flight_log(path, r.log);
  std::printf("outcome=%s switches=%d time=%.2f total_cost=%.2f closest8=%.3f\n",
              to_string(r.outcome).c_str(), r.completed_switches, m.completion_time, m.total_cost,
              m.closest.avg_closest);
  std::printf("log written to %s\n", path.c_str());
  return 0;
}

int cmd_sweep(const CommonFlags& flags) {
  const Config c = load_config(flags);
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  warn_unused(c);
  std::optional<HybridModel> model;
  std::vector<FlightLog> heldout;
  const bool needs_model = std::any_of(e.settings.begin(), e.settings.end(),
                                       [](const SettingSpec& s) { return s.learned; });
  if (!e.model_path.empty()) {
    model = load_hybrid(e.model_path);
  } else if (needs_model) {
    std::printf("training the hybrid model from %d analytic flights\n", e.training_flights);
    LearnedModelBundle bundle = generate_and_train(e);
    print_summary(bundle.summary);
    fs::create_directories(e.out_dir);
    write_bytes((fs::path(e.out_dir) / "model.bin").string(), bundle.model.save());
    model = std::move(bundle.model);
    heldout = std::move(bundle.heldout);
  }
  const auto progress = [](const TrialRecord& t) {
    std::printf("%-8s trial %d seed %llu: %s, %d switches, %zu steps\n", t.setting.c_str(),
                t.trial, static_cast<unsigned long long>(t.seed), to_string(t.outcome).c_str(),
                t.switches, t.log.rows.size());
    std::fflush(stdout);
  };
  const ExperimentResult r =
      run_experiment(e, model ? &*model : nullptr, heldout, e.out_dir, progress);
  std::printf("step cap %d\n\n%s\nreport written to %s\n", r.step_cap,
              report_table(r.report).c_str(), e.out_dir.c_str());
  return 0;
}

int cmd_report(const CommonFlags& flags, const std::string& from) {
  const Config c = load_config(flags);
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  const auto trials = load_trials(from);
  const MetricsReport report =
      build_report(trials, e.task, e.quad.dt, e.controller.horizon_steps * e.quad.dt);
  std::printf("%s", report_csv(report).c_str());
  return 0;
}

int cmd_bench(const CommonFlags& flags, int repeats) {
  const Config c = load_config(flags);
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  warn_unused(c);
  std::optional<HybridModel> model;
  if (!e.model_path.empty()) {
    model = load_hybrid(e.model_path);
  } else {
    std::printf("no model_path; training a model first\n");
    model = generate_and_train(e).model;
  }
  std::vector<std::size_t> workers = {1};
  const std::size_t max = flags.workers ? *flags.workers : WorkerPool::max_workers();
  if (max > 1) workers.push_back(max);
  const BenchReport r =
      benchmark(default_bench_cases(), e.controller, &*model, e.quad, e.task, workers, repeats);
  const std::string csv = bench_csv(r);
  std::printf("%s", csv.c_str());
  std::printf("plans identical across worker counts: %s\n", r.deterministic ? "yes" : "no");
  if (flags.out) {
    fs::create_directories(*flags.out);
    std::ofstream(fs::path(*flags.out) / "bench.csv") << csv;
  }
  return r.deterministic ? 0 : 2;
}

int cmd_plotdata(const CommonFlags& flags, double resolution, const std::string& from) {
  const Config c = load_config(flags);
  const ExperimentConfig e = ExperimentConfig::from_config(c);
  warn_unused(c);
  fs::create_directories(e.out_dir);
  const std::string grid = (fs::path(e.out_dir) / "obstacle_cost_grid.txt").string();
  write_obstacle_grid(grid, e.task, resolution);
  std::printf("grid written to %s\n", grid.c_str());
  if (from.empty()) return 0;
  for (const TrialRecord& t : load_trials(from)) {
    const std::string path =
        (fs::path(e.out_dir) / (t.setting + "_trial" + std::to_string(t.trial) + "_xy.txt")).string();
    std::ofstream os(path);
    os << "# t x y z active_waypoint\n";
    for (const LogRow& row : t.log.rows) {
      os << row.t << ' ' << row.state.position(0) << ' ' << row.state.position(1) << ' '
         << row.state.position(2) << ' ' << row.active_waypoint << '\n';
    }
    std::printf("trajectory written to %s\n", path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path integral receding-horizon control with learned dynamics"};
  app.require_subcommand(1);

  CommonFlags train_flags, fly_flags, sweep_flags, bench_flags, plot_flags, report_flags;
  std::vector<std::string> logs;
  std::string model_out;
  auto* train = app.add_subcommand("train", "Train the hybrid model from flight logs");
  add_common(train, train_flags);
  train->add_option("logs", logs, "Flight logs; flies training trials when omitted");
  train->add_option("--model", model_out, "Model output path (default <out>/model.bin)");

  std::string setting = "analytic";
  auto* fly = app.add_subcommand("fly", "Fly a single trial");
  add_common(fly, fly_flags);
  fly->add_option("--setting", setting, "analytic or M<n>");

  auto* sweep = app.add_subcommand("sweep", "Run every configured setting over all trials");
  add_common(sweep, sweep_flags);

  int repeats = 5;
  auto* bench = app.add_subcommand("bench", "Time one optimization iteration");
  add_common(bench, bench_flags);
  bench->add_option("--repeats", repeats, "Minimum timed repeats per case")->check(CLI::PositiveNumber);

  double resolution = 0.05;
  std::string from;
  auto* plot = app.add_subcommand("plotdata", "Write the obstacle cost grid and trajectories");
  add_common(plot, plot_flags);
  plot->add_option("--resolution", resolution, "Grid spacing in meters")->check(CLI::PositiveNumber);
  plot->add_option("--from", from, "Sweep output directory to take trajectories from");

  std::string report_from;
  auto* report = app.add_subcommand("report", "Rebuild the metrics report from sweep logs");
  add_common(report, report_flags);
  report->add_option("dir", report_from, "Sweep output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_flags, logs, model_out);
    if (*fly) return cmd_fly(fly_flags, setting);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*bench) return cmd_bench(bench_flags, repeats);
    if (*plot) return cmd_plotdata(plot_flags, resolution, from);
    if (*report) return cmd_report(report_flags, report_from);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
