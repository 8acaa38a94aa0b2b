#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pimpc/config.hpp"
#include "pimpc/controller.hpp"
#include "pimpc/dynamics.hpp"
#include "pimpc/flight_log.hpp"
#include "pimpc/lwpr.hpp"
#include "pimpc/simworld.hpp"

namespace pimpc {

// ---------------------------------------------------------------------------
// training data

struct TrainingSample {
  std::array<double, 4> input;  // roll, pitch, yaw, thrust
  Vec3 target;                  // world-frame acceleration
};

struct TrainingSet {
  std::vector<TrainingSample> samples;
  std::vector<RejectedRow> rejected;  // line numbers refer to their file
  std::vector<std::string> rejected_files;
};

TrainingSet samples_from_log(const FlightLog& log);
TrainingSet ingest_logs(const std::vector<std::string>& paths);

struct TrainSummary {
  std::size_t samples = 0;
  std::array<std::size_t, 3> field_counts{};
};

// Default regressor settings for (roll, pitch, yaw, thrust) inputs.
lwpr::Hyperparams default_hybrid_hyperparams();

// Trains the three acceleration regressors in sample order. Throws
// InputError on an empty set.
HybridModel train_hybrid(const TrainingSet& data, const lwpr::Hyperparams& params,
                         TrainSummary* summary = nullptr);

// ---------------------------------------------------------------------------
// experiment configuration

struct SettingSpec {
  std::string name;  // "analytic" or "M<n>"
  bool learned = false;
  int sub_rollouts = 1;
  int num_rollouts = 1000;
  int iterations = 2;
};

// Rollout and iteration budgets per setting as run in the original flights:
// analytic / M1 / M4 -> 1000 rollouts, 2 iterations; M8 -> 1000, 1;
// M16 -> 970, 1; M32 -> 950, 1; other M -> 1000, 1.
SettingSpec default_setting(const std::string& name);

struct ExperimentConfig {
  std::vector<SettingSpec> settings;
  int trials = 5;
  std::uint64_t seed = 1;
  PiConfig controller;
  QuadParams quad;
  Perturbation truth{0.3, 0.92};
  Task task = Task::standard();
  lwpr::Hyperparams lwpr = default_hybrid_hyperparams();
  // 0 selects 4x the mean analytic completion length (or fallback_step_cap).
  int step_cap = 0;
  int fallback_step_cap = 6000;
  std::size_t workers = 1;
  int training_flights = 2;
  int training_rollouts = 1000;
  std::string model_path;
  std::string out_dir = "out";

  // Every field has a key of the same name; see README for the list.
  static ExperimentConfig from_config(const Config& config);
  void validate() const;  // throws ConfigError
};

// ---------------------------------------------------------------------------
// reporting

struct TrialRecord {
  std::string setting;
  int trial = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::kTimeout;
  int switches = 0;
  std::string log_file;
  FlightLog log;
};

struct SettingRow {
  std::string setting;
  int trials = 0;
  int completed = 0;
  int crashed = 0;
  int out_of_bounds = 0;
  int timeout = 0;
  // Averages over completed trials only.
  double avg_time = 0.0;
  double avg_total_cost = 0.0;
  double avg_cost_per_sec = 0.0;
  double avg_8_closest = 0.0;
  Vec3 prediction_variance = Vec3::Zero();
};

struct PropagationError {
  std::string model;
  int segments = 0;
  Vec3 position = Vec3::Zero();  // mean |error| per axis after the horizon
  Vec3 velocity = Vec3::Zero();
};

struct MetricsReport {
  std::vector<SettingRow> settings;
  std::vector<PropagationError> propagation;
};

// Pure function of the trial logs; settings appear in first-seen order.
MetricsReport build_report(const std::vector<TrialRecord>& trials, const Task& task,
                           double dt, double horizon_seconds);

std::string report_csv(const MetricsReport& report);
std::string propagation_csv(const std::vector<PropagationError>& rows);
std::string report_table(const MetricsReport& report);

// Writes trials.csv (setting, trial, seed, outcome, switches, log file) and
// each trial log under `dir`; load_trials reads them back.
void write_trials(const std::string& dir, std::vector<TrialRecord>& trials);
std::vector<TrialRecord> load_trials(const std::string& dir);

// Open-loop replay of logged commands from logged states: mean absolute
// error after `horizon` steps over segments starting every `stride` rows.
PropagationError propagation_error(const std::vector<FlightLog>& logs,
                                   const DynamicsModel& model, const std::string& name,
                                   int horizon = 50, int stride = 10);

// ---------------------------------------------------------------------------
// orchestration

struct LearnedModelBundle {
  HybridModel model;
  TrainSummary summary;
  std::vector<FlightLog> training;
  std::vector<FlightLog> heldout;
};

// Flies `training_flights` analytic-model trials (plus one held-out flight)
// against the ground truth and trains the hybrid model on their logs.
LearnedModelBundle generate_and_train(const ExperimentConfig& config);

struct ExperimentResult {
  MetricsReport report;
  std::vector<TrialRecord> trials;
  int step_cap = 0;
};

// Runs every setting for config.trials seeds (seed + trial index, shared
// across settings). Trial failures are outcomes, never errors. When
// `out_dir` is non-empty, logs and reports are written there.
// `progress`, if set, is called after every trial.
ExperimentResult run_experiment(const ExperimentConfig& config, const HybridModel* model,
                                const std::vector<FlightLog>& heldout,
                                const std::string& out_dir = {},
                                const std::function<void(const TrialRecord&)>& progress = {});

// ---------------------------------------------------------------------------
// throughput

struct BenchCase {
  std::string name;
  bool learned = false;
  int sub_rollouts = 1;
  int num_rollouts = 1000;
};

struct ThroughputRow {
  std::string name;
  std::size_t workers = 1;
  int num_rollouts = 0;
  int sub_rollouts = 1;
  int horizon = 0;
  double ms_per_iteration = 0.0;
  double rollout_steps_per_sec = 0.0;
};

struct BenchReport {
  std::vector<ThroughputRow> rows;
  // Plans from every worker count matched bit for bit.
  bool deterministic = true;
};

std::vector<BenchCase> default_bench_cases();

BenchReport benchmark(const std::vector<BenchCase>& cases, const PiConfig& base,
                      const HybridModel* model, const QuadParams& quad, const Task& task,
                      std::vector<std::size_t> worker_counts, int repeats = 5);

std::string bench_csv(const BenchReport& report);

}  // namespace pimpc
