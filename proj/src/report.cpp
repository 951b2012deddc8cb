#include "ramol/report.hpp"

#include "ramol/config.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace ramol {

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fixed2_or_dash(const std::optional<double>& v) {
  if (!v) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

}  // namespace

nlohmann::json metrics_to_json(const RunMetrics& m) {
  return {{"config", config_to_json(m.config)},
          {"steps", m.steps()},
          {"window", m.window},
          {"final_acc", m.final_acc},
          {"avg_acc", m.avg_acc},
          {"cumulative_loss", m.cumulative_loss},
          {"coverage", optional_json(m.coverage)},
          {"label_match", optional_json(m.label_match)},
          {"label_match_pre_gate", optional_json(m.label_match_pre_gate)},
          {"mean_neighbours", m.mean_neighbours},
          {"wall_clock_s", m.wall_clock_s}};
}

nlohmann::json aggregate_to_json(const AggregateMetrics& agg) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : agg.runs) {
    seeds.push_back({{"seed", r.config.seed}, {"final_acc", r.final_acc}, {"avg_acc", r.avg_acc},
                     {"wall_clock_s", r.wall_clock_s}});
  }
  return {{"runs", std::move(seeds)},
          {"final_mean", agg.final_mean},
          {"final_std", agg.final_std},
          {"avg_mean", agg.avg_mean},
          {"avg_std", agg.avg_std},
          {"single_seed", agg.single_seed},
          {"wall_clock_mean", agg.wall_clock_mean},
          {"runtime_factor", optional_json(agg.runtime_factor)}};
}

nlohmann::json regret_to_json(const RegretRecord& r) {
  return {{"steps", r.steps},
          {"learner_loss", r.learner_loss},
          {"oracle_loss", r.oracle_loss},
          {"regret", r.regret},
          {"learner_errors", r.learner_errors},
          {"oracle_errors", r.oracle_errors},
          {"regret_01", r.regret_01},
          {"drift_budget", r.drift_budget}};
}

void write_curve_csv(std::ostream& out, const RunMetrics& m) {
  out << "step,a_t,window_acc\n";
  char buf[64];
  for (std::size_t t = 0; t < m.steps(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.6f\n", t, static_cast<int>(m.per_step_correct[t]), m.window_acc_curve[t]);
    out << buf;
  }
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "method,final_acc,avg_acc,coverage,label_match,label_match_pre_gate\n";
  for (const auto& r : rows) {
    out << r.name << ',' << fixed4(r.metrics.final_acc) << ',' << fixed4(r.metrics.avg_acc) << ','
        << fixed2_or_dash(r.metrics.coverage) << ',' << fixed2_or_dash(r.metrics.label_match) << ','
        << fixed2_or_dash(r.metrics.label_match_pre_gate) << '\n';
  }
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "method,final_std,avg_std,time_factor\n";
  for (const auto& r : rows) {
    char factor[32];
    std::snprintf(factor, sizeof factor, "%.2f", r.time_factor);
    out << r.name << ',' << fixed4(r.aggregate.final_std) << ',' << fixed4(r.aggregate.avg_std) << ',' << factor
        << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, std::span<const std::pair<std::string, AggregateMetrics>> rows) {
  out << "method,final_mean,final_std,avg_mean,avg_std\n";
  for (const auto& [name, a] : rows) {
    out << name << ',' << fixed4(a.final_mean) << ',' << fixed4(a.final_std) << ',' << fixed4(a.avg_mean) << ','
        << fixed4(a.avg_std) << '\n';
  }
}

}  // namespace ramol
