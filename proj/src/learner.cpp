#include "ramol/learner.hpp"

#include "ramol/error.hpp"

#include <cmath>
#include <sstream>

namespace ramol {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::baseline:
      return "baseline";
    case Variant::ram_naive:
      return "ram_naive";
    case Variant::ram_gated:
      return "ram_gated";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "ram_naive") return Variant::ram_naive;
  if (name == "ram_gated") return Variant::ram_gated;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected baseline, ram_naive or ram_gated)");
}

AblationFlags parse_ablation(std::string_view text) {
  AblationFlags f;
  if (text.empty() || text == "none") return f;
  std::istringstream ss{std::string(text)};
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "no_time") {
      f.no_time = true;
    } else if (tok == "no_sim") {
      f.no_sim = true;
    } else if (tok == "no_decay") {
      f.no_decay = true;
    } else {
      throw ConfigError("unknown ablation flag '" + tok + "' (expected no_time, no_sim, no_decay)");
    }
  }
  return f;
}

std::string to_string(const AblationFlags& f) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(f.no_time, "no_time");
  add(f.no_sim, "no_sim");
  add(f.no_decay, "no_decay");
  return out.empty() ? "none" : out;
}

void LearnerConfig::validate() const {
  auto bad = [](const std::string& msg) { return ConfigError(msg); };
  if (buffer_capacity == 0) throw bad("buffer capacity B must be positive");
  if (k == 0) throw bad("K must be at least 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw bad("tau must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) throw bad("rho must lie in [0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw bad("alpha must lie in [0, 1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw bad("beta must be nonnegative");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw bad("lr must be positive");
  if (hidden_dim == 0) throw bad("hidden dimension must be positive");
  if (!(clip >= 0.0) || !std::isfinite(clip)) throw bad("clip must be nonnegative");
  if (ablation.any() && variant != Variant::ram_gated) throw bad("ablation flags require variant ram_gated");
}

LearnerConfig default_config(Variant variant) {
  LearnerConfig c;
  c.variant = variant;
  if (variant == Variant::ram_gated) c.horizon = kDefaultHorizon;
  return c;
}

GatingPlan apply_ablation(const LearnerConfig& config) {
  if (config.variant != Variant::ram_gated) {
    if (config.ablation.any()) throw ConfigError("ablation flags require variant ram_gated");
    return GatingPlan{config.horizon, false, config.alpha, true};
  }
  GatingPlan plan{config.horizon, true, config.alpha, true};
  if (config.ablation.no_time) plan.horizon.reset();
  if (config.ablation.no_sim) plan.similarity = false;
  if (config.ablation.no_decay) {
    plan.alpha = 1.0;
    plan.prefactor = config.no_decay_mode == NoDecayMode::alpha_one;
  }
  return plan;
}

std::vector<WeightedExample> naive_batch(const Vector& x, int y, const NeighbourSet& ns, double beta) {
  std::vector<WeightedExample> batch;
  batch.reserve(ns.size() + 1);
  batch.push_back({x, y, 1.0});
  if (ns.empty()) return batch;
  const double w = beta / static_cast<double>(ns.size());
  for (const auto& n : ns.items) batch.push_back({n.entry.x, n.entry.y, w});
  return batch;
}

std::vector<WeightedExample> gated_batch(const Vector& x, int y, const NeighbourSet& ns, double alpha,
                                         bool prefactor) {
  std::vector<WeightedExample> batch;
  batch.reserve(ns.size() + 1);
  if (ns.empty()) {
    batch.push_back({x, y, 1.0});
    return batch;
  }
  const double scale = prefactor ? 1.0 / (1.0 + alpha) : 1.0;
  batch.push_back({x, y, scale});
  for (const auto& n : ns.items) batch.push_back({n.entry.x, n.entry.y, scale * alpha * n.w});
  return batch;
}

// ---------------------------------------------------------------------------

Learner::Learner(LearnerConfig config, std::size_t dim, std::size_t num_classes)
    : config_(std::move(config)),
      dim_(dim),
      num_classes_(num_classes),
      buffer_(config_.buffer_capacity, dim, config_.hidden_dim) {
  config_.validate();
  if (dim == 0 || num_classes == 0) throw ConfigError("learner needs positive feature dimension and class count");
  plan_ = apply_ablation(config_);
  params_ = init_params(dim, config_.hidden_dim, num_classes, config_.seed, config_.activation);
  standardizer_ = StandardizerState::empty(dim);
}

double Learner::current_tau() const {
  if (config_.tau_mode == TauMode::running_median) {
    if (const auto m = distance_median_.median(); m && *m > 0.0) return *m;
  }
  return config_.tau;
}

StepOutcome Learner::step(const Example& example) {
  if (static_cast<std::size_t>(example.features.size()) != dim_) {
    throw DimensionError("learner expects dimension " + std::to_string(dim_) + ", got " +
                         std::to_string(example.features.size()));
  }
  if (example.label < 0 || static_cast<std::size_t>(example.label) >= num_classes_) {
    throw DimensionError("label " + std::to_string(example.label) + " out of range");
  }
  const std::size_t t = step_;
  const int y = example.label;

  StepOutcome out;
  out.features = config_.standardize ? standardize(standardizer_, example.features) : example.features;
  if (config_.clip > 0.0) out.features = out.features.cwiseMax(-config_.clip).cwiseMin(config_.clip);

  // 1. Predict before anything is learned from (x_t, y_t).
  const auto fr = forward(params_, out.features);
  out.probs = fr.probs;
  out.prediction = argmax(fr.probs);
  out.correct = out.prediction == y;
  out.loss = cross_entropy(fr.probs, y);

  // 2. Retrieve from the memory as it stood before this step.
  std::vector<WeightedExample> batch;
  if (config_.variant == Variant::baseline || buffer_.empty()) {
    batch.push_back({out.features, y, 1.0});
  } else {
    out.retrieval_attempted = true;
    NeighbourSet ns = buffer_.retrieve(fr.h, t, config_.k, plan_.horizon);
    out.n_retrieved = ns.size();
    for (const auto& n : ns.items) out.pre_gate_label_matches += (n.entry.y == y);

    if (config_.variant == Variant::ram_naive) {
      batch = naive_batch(out.features, y, ns, config_.beta);
    } else {
      if (!ns.empty()) {
        if (plan_.similarity) {
          const double tau = current_tau();
          for (const auto& n : ns.items) distance_median_.push(n.d);
          ns = similarity_gate(similarity_weights(std::move(ns), tau), config_.rho, config_.renormalize_after_gate);
        } else {
          ns = uniform_weights(std::move(ns));
        }
      }
      batch = gated_batch(out.features, y, ns, plan_.alpha, plan_.prefactor);
    }
    out.n_after_gates = ns.size();
    for (const auto& n : ns.items) out.neighbour_label_matches += (n.entry.y == y);
  }

  // 3. One SGD step on the variant's loss.
  const double lr = config_.lr_decay ? config_.lr / std::sqrt(static_cast<double>(t + 1)) : config_.lr;
  sgd_step_inplace(params_, weighted_grad(params_, batch), lr);

  // 4. Store the pre-update embedding. The baseline keeps no memory.
  if (config_.variant != Variant::baseline) buffer_.insert(MemoryEntry{out.features, y, fr.h, t});

  ++step_;
  return out;
}

}  // namespace ramol
