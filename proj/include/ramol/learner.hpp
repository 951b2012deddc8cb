#pragma once

#include "ramol/memory.hpp"
#include "ramol/model.hpp"
#include "ramol/stream.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ramol {

enum class Variant { baseline, ram_naive, ram_gated };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

enum class TauMode { fixed, running_median };

// How Gated-noDecay removes the gradient down-weighting.
//   full_weight: current weight 1, neighbour j weight w_j (no 1/(1+alpha)).
//   alpha_one:   alpha forced to 1, prefactor kept (current 1/2, neighbours w_j/2).
enum class NoDecayMode { full_weight, alpha_one };

struct AblationFlags {
  bool no_time = false;
  bool no_sim = false;
  bool no_decay = false;

  bool any() const { return no_time || no_sim || no_decay; }
  bool operator==(const AblationFlags&) const = default;
};

// Parses "none" or a comma list of no_time, no_sim, no_decay.
AblationFlags parse_ablation(std::string_view text);
std::string to_string(const AblationFlags& flags);

inline constexpr std::size_t kDefaultHorizon = 2000;

struct LearnerConfig {
  Variant variant = Variant::baseline;
  std::size_t buffer_capacity = 500;
  std::size_t k = 5;
  std::optional<std::size_t> horizon;  // time window H; unset = all entries
  double tau = 1.0;
  TauMode tau_mode = TauMode::fixed;
  double rho = 0.1;
  double alpha = 0.5;
  double beta = 1.0;
  double lr = 0.01;
  bool lr_decay = false;  // lr / sqrt(t + 1) when set
  std::size_t hidden_dim = 64;
  Activation activation = Activation::relu;
  std::uint64_t seed = 42;
  AblationFlags ablation;
  bool renormalize_after_gate = true;
  NoDecayMode no_decay_mode = NoDecayMode::full_weight;
  bool standardize = true;
  // Standardized features are clipped to [-clip, clip]; 0 disables clipping.
  double clip = 5.0;

  // Throws ConfigError for out-of-range values or ablation flags on a
  // non-gated variant.
  void validate() const;
  bool operator==(const LearnerConfig&) const = default;
};

// Defaults for a variant: H = 2000 for ram_gated, unset otherwise.
LearnerConfig default_config(Variant variant);

// Retrieval and weighting actually used by the gated variant once ablation
// flags are applied.
struct GatingPlan {
  std::optional<std::size_t> horizon;
  bool similarity = true;  // similarity weights + similarity gate
  double alpha = 0.5;
  bool prefactor = true;  // 1 / (1 + alpha) scaling
};

GatingPlan apply_ablation(const LearnerConfig& config);

struct StepOutcome {
  int prediction = 0;
  bool correct = false;
  double loss = 0.0;  // cross-entropy of the pre-update prediction
  Vector probs;
  Vector features;  // the input the model saw (standardized when enabled)
  bool retrieval_attempted = false;
  std::size_t n_retrieved = 0;
  std::size_t n_after_gates = 0;
  std::size_t neighbour_label_matches = 0;  // after gates
  std::size_t pre_gate_label_matches = 0;
};

// L = CE(current) + beta / |N| * sum_j CE(neighbour_j)
std::vector<WeightedExample> naive_batch(const Vector& x, int y, const NeighbourSet& ns, double beta);

// L = 1/(1+alpha) * (CE(current) + alpha * sum_j w_j CE(neighbour_j)).
// An empty set gives the plain baseline batch (current weight 1).
std::vector<WeightedExample> gated_batch(const Vector& x, int y, const NeighbourSet& ns, double alpha,
                                         bool prefactor = true);

// One learner per stream. Each call to step() runs the prequential cycle:
// predict, retrieve, one SGD step, then store the pre-update embedding.
class Learner {
 public:
  Learner(LearnerConfig config, std::size_t dim, std::size_t num_classes);

  StepOutcome step(const Example& example);

  const LearnerConfig& config() const { return config_; }
  const MlpParams& params() const { return params_; }
  const Buffer& buffer() const { return buffer_; }
  const StandardizerState& standardizer() const { return standardizer_; }
  std::size_t steps() const { return step_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return num_classes_; }

 private:
  double current_tau() const;

  LearnerConfig config_;
  GatingPlan plan_;
  std::size_t dim_;
  std::size_t num_classes_;
  MlpParams params_;
  Buffer buffer_;
  StandardizerState standardizer_;
  RunningMedian distance_median_;
  std::size_t step_ = 0;
};

}  // namespace ramol
