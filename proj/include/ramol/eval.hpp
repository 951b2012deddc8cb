#pragma once

#include "ramol/learner.hpp"
#include "ramol/stream.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ramol {

inline constexpr std::size_t kDefaultWindow = 1000;

struct RunMetrics {
  LearnerConfig config;
  std::size_t window = kDefaultWindow;
  std::vector<std::uint8_t> per_step_correct;  // a_1..a_T
  std::vector<double> window_acc_curve;        // sliding mean of the last min(t, W) indicators
  double final_acc = 0.0;                      // mean of a_t over the last W steps
  double avg_acc = 0.0;                        // mean of a_t over the whole stream
  double cumulative_loss = 0.0;
  // Absent for the baseline, which never retrieves.
  std::optional<double> coverage;
  std::optional<double> label_match;           // over neighbours surviving the gates
  std::optional<double> label_match_pre_gate;  // over every retrieved neighbour
  double mean_neighbours = 0.0;                // mean n_after_gates over attempted steps
  double wall_clock_s = 0.0;

  std::size_t steps() const { return per_step_correct.size(); }
};

struct PrequentialOptions {
  std::size_t window = kDefaultWindow;
  // Called after every step with the step index and its outcome.
  std::function<void(std::size_t, const StepOutcome&)> observer;
};

// Test-then-train over the whole stream. wall_clock_s covers the learning loop
// only; the examples are already in memory.
RunMetrics prequential_run(const LearnerConfig& config, std::span<const Example> stream, std::size_t num_classes,
                           const PrequentialOptions& options = {});

// Materializes the source first, so data loading is not timed.
RunMetrics prequential_run(const LearnerConfig& config, ExampleSource& source, const PrequentialOptions& options = {});

// Runs one learner per seed (config.seed replaced), `threads` at a time.
std::vector<RunMetrics> run_seeds(const LearnerConfig& config, std::span<const Example> stream,
                                  std::size_t num_classes, std::span<const std::uint64_t> seeds,
                                  const PrequentialOptions& options = {}, std::size_t threads = 1);

struct AggregateMetrics {
  std::vector<RunMetrics> runs;
  double final_mean = 0.0;
  double final_std = 0.0;  // sample std (n - 1); 0 with single_seed set when n = 1
  double avg_mean = 0.0;
  double avg_std = 0.0;
  bool single_seed = false;
  double wall_clock_mean = 0.0;
  std::optional<double> runtime_factor;  // wall_clock_mean / baseline mean
};

// Runs must share a config up to the seed. Throws ConfigError otherwise.
AggregateMetrics aggregate(std::vector<RunMetrics> runs, std::optional<double> baseline_wall_clock = std::nullopt);

struct RegretRecord {
  std::size_t steps = 0;
  double learner_loss = 0.0;  // cumulative cross-entropy
  double oracle_loss = 0.0;   // cumulative cross-entropy of the Bayes posterior
  double regret = 0.0;        // learner_loss - oracle_loss
  std::size_t learner_errors = 0;
  std::size_t oracle_errors = 0;
  double regret_01 = 0.0;
  double drift_budget = 0.0;
  std::vector<double> cumulative_regret;  // after each step
  RunMetrics metrics;
};

// Streams `regimes` with `stream_seed`, runs the learner on it and compares it
// step by step with the Bayes classifier of the active regime.
RegretRecord regret_run(const LearnerConfig& config, const std::vector<RegimeSpec>& regimes, std::uint64_t stream_seed,
                        std::size_t drift_samples = 20000, const PrequentialOptions& options = {});

struct AblationRow {
  std::string name;
  RunMetrics metrics;
};

// Baseline, RAM-Naive, Gated-full, Gated-noTime, Gated-noSim, Gated-noDecay.
// `base` supplies shared hyperparameters; variant and flags are overwritten.
std::vector<LearnerConfig> ablation_configs(const LearnerConfig& base);
std::vector<std::string> ablation_names();
std::vector<AblationRow> ablation_suite(std::span<const Example> stream, std::size_t num_classes, std::uint64_t seed,
                                        const LearnerConfig& base = {}, const PrequentialOptions& options = {});

// Median wall clock of `repeats` identical runs, executed sequentially.
double timed_run(const LearnerConfig& config, std::span<const Example> stream, std::size_t num_classes,
                 std::size_t repeats = 3, std::size_t window = kDefaultWindow);

struct BenchRow {
  std::string name;
  AggregateMetrics aggregate;
  double median_wall_clock = 0.0;
  double time_factor = 1.0;
};

// One row per config: seed spread of final/avg accuracy plus the time factor
// against the first config (the baseline).
std::vector<BenchRow> bench(const std::vector<std::pair<std::string, LearnerConfig>>& configs,
                            std::span<const Example> stream, std::size_t num_classes,
                            std::span<const std::uint64_t> seeds, std::size_t repeats = 3,
                            std::size_t window = kDefaultWindow);

// Grid search on a stream prefix; returns the config with the highest avg_acc.
struct TuneResult {
  LearnerConfig best;
  double best_avg_acc = 0.0;
  std::vector<std::pair<LearnerConfig, double>> tried;
};
TuneResult tune_on_prefix(const LearnerConfig& base, std::span<const Example> stream, std::size_t num_classes,
                          std::size_t prefix_length);

}  // namespace ramol
