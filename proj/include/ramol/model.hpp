#pragma once

#include "ramol/stream.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ramol {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// One-hidden-layer network: h = act(W1 x + b1), z = W2 h + b2, p = softmax(z).
struct MlpParams {
  Matrix W1;  // hidden x d
  Vector b1;  // hidden
  Matrix W2;  // C x hidden
  Vector b2;  // C
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return static_cast<std::size_t>(W1.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(W1.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(W2.rows()); }

  bool all_finite() const;
  bool operator==(const MlpParams& other) const;
};

// Same shapes as MlpParams, no activation.
struct MlpGrads {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;

  static MlpGrads zeros_like(const MlpParams& p);
  bool all_finite() const;
};

struct ForwardResult {
  Vector pre;     // W1 x + b1, kept for backprop
  Vector h;       // hidden activation; the retrieval embedding
  Vector logits;
  Vector probs;
};

struct WeightedExample {
  Vector x;
  int y = 0;
  double weight = 1.0;
};

// Glorot-uniform weights, zero biases.
MlpParams init_params(std::size_t d, std::size_t hidden_dim, std::size_t num_classes, std::uint64_t seed,
                      Activation activation = Activation::relu);

ForwardResult forward(const MlpParams& params, const Vector& x);

// Max-subtracted softmax.
Vector softmax(const Vector& logits);

inline constexpr double kProbFloor = 1e-12;

// -log(max(probs[y], 1e-12))
double cross_entropy(const Vector& probs, int y);

// argmax with ties going to the lowest index.
int argmax(const Vector& v);

// Gradient of sum_k weight_k * CE(f(x_k), y_k). Zero-weight examples are
// skipped entirely, so they leave the result bit-for-bit untouched.
MlpGrads weighted_grad(const MlpParams& params, std::span<const WeightedExample> batch);

// params - lr * grads. Throws NumericError on non-finite gradients.
MlpParams sgd_step(const MlpParams& params, const MlpGrads& grads, double lr);
void sgd_step_inplace(MlpParams& params, const MlpGrads& grads, double lr);

// Snapshot format: {"format": "ramol-mlp", "version": 1, "activation", and
// W1/b1/W2/b2 as {"rows", "cols", "data"} with row-major data}.
nlohmann::json params_to_json(const MlpParams& params);
MlpParams params_from_json(const nlohmann::json& j);

}  // namespace ramol
