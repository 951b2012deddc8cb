#include "ramol/eval.hpp"

#include "ramol/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>

namespace ramol {

RunMetrics prequential_run(const LearnerConfig& config, std::span<const Example> stream, std::size_t num_classes,
                           const PrequentialOptions& options) {
  if (stream.empty()) throw DataError("prequential_run: empty stream");
  if (options.window == 0) throw ConfigError("window must be positive");

  RunMetrics m;
  m.config = config;
  m.window = options.window;
  m.per_step_correct.reserve(stream.size());
  m.window_acc_curve.reserve(stream.size());

  Learner learner(config, static_cast<std::size_t>(stream.front().features.size()), num_classes);

  std::size_t correct_total = 0;
  std::size_t in_window = 0;
  std::size_t attempted = 0;
  std::size_t covered = 0;
  std::size_t kept = 0;
  std::size_t kept_match = 0;
  std::size_t retrieved = 0;
  std::size_t retrieved_match = 0;

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const auto out = learner.step(stream[t]);
    const std::uint8_t a = out.correct ? 1 : 0;
    m.per_step_correct.push_back(a);
    correct_total += a;
    in_window += a;
    if (t >= m.window) in_window -= m.per_step_correct[t - m.window];
    m.window_acc_curve.push_back(static_cast<double>(in_window) / static_cast<double>(std::min(t + 1, m.window)));
    m.cumulative_loss += out.loss;
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss at step " + std::to_string(t));

    if (out.retrieval_attempted) {
      ++attempted;
      covered += out.n_after_gates >= 1;
      kept += out.n_after_gates;
      kept_match += out.neighbour_label_matches;
      retrieved += out.n_retrieved;
      retrieved_match += out.pre_gate_label_matches;
    }
    if (options.observer) options.observer(t, out);
  }
  m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!learner.params().all_finite()) throw NumericError("parameters became non-finite");

  const auto T = m.per_step_correct.size();
  m.avg_acc = static_cast<double>(correct_total) / static_cast<double>(T);
  m.final_acc = m.window_acc_curve.back();
  if (config.variant != Variant::baseline) {
    m.coverage = attempted ? static_cast<double>(covered) / static_cast<double>(attempted) : 0.0;
    m.label_match = kept ? static_cast<double>(kept_match) / static_cast<double>(kept) : 0.0;
    m.label_match_pre_gate = retrieved ? static_cast<double>(retrieved_match) / static_cast<double>(retrieved) : 0.0;
    m.mean_neighbours = attempted ? static_cast<double>(kept) / static_cast<double>(attempted) : 0.0;
  }
  return m;
}

RunMetrics prequential_run(const LearnerConfig& config, ExampleSource& source, const PrequentialOptions& options) {
  const auto examples = materialize(source);
  return prequential_run(config, examples, source.num_classes(), options);
}

std::vector<RunMetrics> run_seeds(const LearnerConfig& config, std::span<const Example> stream,
                                  std::size_t num_classes, std::span<const std::uint64_t> seeds,
                                  const PrequentialOptions& options, std::size_t threads) {
  std::vector<RunMetrics> out(seeds.size());
  auto one = [&](std::size_t i) {
    LearnerConfig c = config;
    c.seed = seeds[i];
    out[i] = prequential_run(c, stream, num_classes, options);
  };
  threads = std::max<std::size_t>(threads, 1);
  for (std::size_t begin = 0; begin < seeds.size(); begin += threads) {
    const auto end = std::min(seeds.size(), begin + threads);
    if (end - begin == 1) {
      one(begin);
      continue;
    }
    std::vector<std::future<void>> jobs;
    for (std::size_t i = begin; i < end; ++i) jobs.push_back(std::async(std::launch::async, one, i));
    for (auto& j : jobs) j.get();
  }
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  // Deviations are taken from the first value so identical runs give exactly 0.
  double shift_mean = 0.0;
  for (double x : v) shift_mean += x - v.front();
  shift_mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - v.front() - shift_mean) * (x - v.front() - shift_mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

AggregateMetrics aggregate(std::vector<RunMetrics> runs, std::optional<double> baseline_wall_clock) {
  if (runs.empty()) throw ConfigError("aggregate: no runs");
  LearnerConfig reference = runs.front().config;
  reference.seed = 0;
  for (const auto& r : runs) {
    LearnerConfig c = r.config;
    c.seed = 0;
    if (!(c == reference) || r.window != runs.front().window) {
      throw ConfigError("aggregate: runs differ in more than the seed");
    }
  }
  // Sort by seed so the result does not depend on the order runs arrive in.
  std::stable_sort(runs.begin(), runs.end(),
                   [](const RunMetrics& a, const RunMetrics& b) { return a.config.seed < b.config.seed; });

  AggregateMetrics agg;
  std::vector<double> finals, avgs, walls;
  for (const auto& r : runs) {
    finals.push_back(r.final_acc);
    avgs.push_back(r.avg_acc);
    walls.push_back(r.wall_clock_s);
  }
  std::tie(agg.final_mean, agg.final_std) = mean_std(finals);
  std::tie(agg.avg_mean, agg.avg_std) = mean_std(avgs);
  agg.wall_clock_mean = mean_std(walls).first;
  agg.single_seed = runs.size() == 1;
  if (baseline_wall_clock && *baseline_wall_clock > 0.0) agg.runtime_factor = agg.wall_clock_mean / *baseline_wall_clock;
  agg.runs = std::move(runs);
  return agg;
}

RegretRecord regret_run(const LearnerConfig& config, const std::vector<RegimeSpec>& regimes, std::uint64_t stream_seed,
                        std::size_t drift_samples, const PrequentialOptions& options) {
  PiecewiseSource source(regimes, stream_seed);
  const auto stream = materialize(source);

  RegretRecord rec;
  rec.steps = stream.size();
  rec.cumulative_regret.reserve(stream.size());
  PrequentialOptions opts = options;
  opts.observer = [&](std::size_t t, const StepOutcome& out) {
    const auto& regime = regimes[source.regime_at(t)].generator;
    const auto& ex = stream[t];
    if (ex.step != t) throw DataError("regret_run: stream step misaligned with regime schedule", t + 1);
    const Vector post = bayes_posterior(regime, ex.features);
    rec.learner_loss += out.loss;
    rec.oracle_loss += cross_entropy(post, ex.label);
    rec.learner_errors += !out.correct;
    rec.oracle_errors += argmax(post) != ex.label;
    rec.cumulative_regret.push_back(rec.learner_loss - rec.oracle_loss);
    if (options.observer) options.observer(t, out);
  };
  rec.metrics = prequential_run(config, stream, source.num_classes(), opts);
  rec.regret = rec.learner_loss - rec.oracle_loss;
  rec.regret_01 = static_cast<double>(rec.learner_errors) - static_cast<double>(rec.oracle_errors);
  rec.drift_budget = drift_budget(regimes, drift_samples);
  return rec;
}

std::vector<std::string> ablation_names() {
  return {"Baseline", "RAM-Naive", "Gated-full", "Gated-noTime", "Gated-noSim", "Gated-noDecay"};
}

std::vector<LearnerConfig> ablation_configs(const LearnerConfig& base) {
  auto make = [&](Variant v, AblationFlags flags) {
    LearnerConfig c = base;
    c.variant = v;
    c.ablation = flags;
    if (v == Variant::ram_gated && !c.horizon) c.horizon = kDefaultHorizon;
    if (v == Variant::ram_naive) c.horizon.reset();
    return c;
  };
  return {make(Variant::baseline, {}),
          make(Variant::ram_naive, {}),
          make(Variant::ram_gated, {}),
          make(Variant::ram_gated, {.no_time = true}),
          make(Variant::ram_gated, {.no_sim = true}),
          make(Variant::ram_gated, {.no_decay = true})};
}

std::vector<AblationRow> ablation_suite(std::span<const Example> stream, std::size_t num_classes, std::uint64_t seed,
                                        const LearnerConfig& base, const PrequentialOptions& options) {
  LearnerConfig seeded = base;
  seeded.seed = seed;
  const auto configs = ablation_configs(seeded);
  const auto names = ablation_names();
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    rows.push_back({names[i], prequential_run(configs[i], stream, num_classes, options)});
  }
  return rows;
}

double timed_run(const LearnerConfig& config, std::span<const Example> stream, std::size_t num_classes,
                 std::size_t repeats, std::size_t window) {
  if (repeats == 0) throw ConfigError("timed_run: repeats must be positive");
  std::vector<double> times;
  PrequentialOptions opts;
  opts.window = window;
  for (std::size_t i = 0; i < repeats; ++i) times.push_back(prequential_run(config, stream, num_classes, opts).wall_clock_s);
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

std::vector<BenchRow> bench(const std::vector<std::pair<std::string, LearnerConfig>>& configs,
                            std::span<const Example> stream, std::size_t num_classes,
                            std::span<const std::uint64_t> seeds, std::size_t repeats, std::size_t window) {
  if (configs.empty()) throw ConfigError("bench: no configurations");
  if (seeds.empty()) throw ConfigError("bench: no seeds");
  PrequentialOptions opts;
  opts.window = window;
  std::vector<BenchRow> rows;
  for (const auto& [name, config] : configs) {
    BenchRow row;
    row.name = name;
    // Timing uses the first seed; accuracy spread uses all of them.
    LearnerConfig timed = config;
    timed.seed = seeds.front();
    row.median_wall_clock = timed_run(timed, stream, num_classes, repeats, window);
    row.aggregate = aggregate(run_seeds(config, stream, num_classes, seeds, opts, 1));
    rows.push_back(std::move(row));
  }
  const double base = rows.front().median_wall_clock;
  for (auto& r : rows) {
    r.time_factor = base > 0.0 ? r.median_wall_clock / base : 1.0;
    r.aggregate.runtime_factor = r.time_factor;
  }
  return rows;
}

TuneResult tune_on_prefix(const LearnerConfig& base, std::span<const Example> stream, std::size_t num_classes,
                          std::size_t prefix_length) {
  if (prefix_length == 0) throw ConfigError("tune: prefix length must be positive");
  const auto prefix = stream.first(std::min(prefix_length, stream.size()));

  std::vector<LearnerConfig> grid;
  for (std::size_t k : {3, 5, 10}) {
    if (base.variant == Variant::ram_naive) {
      for (double beta : {0.5, 1.0}) {
        LearnerConfig c = base;
        c.k = k;
        c.beta = beta;
        grid.push_back(c);
      }
    } else if (base.variant == Variant::ram_gated) {
      for (double alpha : {0.25, 0.5, 1.0}) {
        for (double rho : {0.05, 0.1, 0.3}) {
          LearnerConfig c = base;
          c.k = k;
          c.alpha = alpha;
          c.rho = rho;
          grid.push_back(c);
        }
      }
    }
  }
  if (grid.empty()) grid.push_back(base);

  TuneResult res;
  res.best = grid.front();
  res.best_avg_acc = -1.0;
  for (const auto& c : grid) {
    const double acc = prequential_run(c, prefix, num_classes).avg_acc;
    res.tried.emplace_back(c, acc);
    if (acc > res.best_avg_acc) {
      res.best_avg_acc = acc;
      res.best = c;
    }
  }
  return res;
}

}  // namespace ramol
