#pragma once

#include "ramol/eval.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <span>

namespace ramol {

// Scalars of one run plus its resolved config.
nlohmann::json metrics_to_json(const RunMetrics& m);
nlohmann::json aggregate_to_json(const AggregateMetrics& agg);
nlohmann::json regret_to_json(const RegretRecord& r);

// step,a_t,window_acc
void write_curve_csv(std::ostream& out, const RunMetrics& m);

// method,final_acc,avg_acc,coverage,label_match,label_match_pre_gate
// Absent statistics are written as "--".
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

// method,final_std,avg_std,time_factor
void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

// method,final_mean,final_std,avg_mean,avg_std
void write_aggregate_csv(std::ostream& out, std::span<const std::pair<std::string, AggregateMetrics>> rows);

}  // namespace ramol
