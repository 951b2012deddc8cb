#include "ramol/model.hpp"

#include "ramol/error.hpp"

#include <cmath>

namespace ramol {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

bool MlpParams::all_finite() const {
  return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
}

bool MlpParams::operator==(const MlpParams& o) const {
  return activation == o.activation && W1.rows() == o.W1.rows() && W1.cols() == o.W1.cols() &&
         W2.rows() == o.W2.rows() && W1 == o.W1 && b1 == o.b1 && W2 == o.W2 && b2 == o.b2;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  return MlpGrads{Matrix::Zero(p.W1.rows(), p.W1.cols()), Vector::Zero(p.b1.size()),
                  Matrix::Zero(p.W2.rows(), p.W2.cols()), Vector::Zero(p.b2.size())};
}

bool MlpGrads::all_finite() const {
  return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
}

namespace {

// 53 random mantissa bits -> [0, 1). Avoids the implementation-defined
// std::uniform_real_distribution so snapshots match across standard libraries.
double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void glorot_fill(Matrix& m, Rng& rng) {
  const double fan_in = static_cast<double>(m.cols());
  const double fan_out = static_cast<double>(m.rows());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  // Row-major fill order so the draw sequence does not depend on storage order.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * unit_uniform(rng) - 1.0) * limit;
  }
}

void check_input(const MlpParams& p, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != p.input_dim()) {
    throw DimensionError("model expects input dimension " + std::to_string(p.input_dim()) + ", got " +
                         std::to_string(x.size()));
  }
}

}  // namespace

MlpParams init_params(std::size_t d, std::size_t hidden_dim, std::size_t num_classes, std::uint64_t seed,
                      Activation activation) {
  if (d == 0 || hidden_dim == 0 || num_classes == 0) throw ConfigError("init_params: dimensions must be positive");
  Rng rng(seed);
  MlpParams p;
  p.activation = activation;
  p.W1.resize(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(d));
  p.W2.resize(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(hidden_dim));
  glorot_fill(p.W1, rng);
  glorot_fill(p.W2, rng);
  p.b1 = Vector::Zero(static_cast<Eigen::Index>(hidden_dim));
  p.b2 = Vector::Zero(static_cast<Eigen::Index>(num_classes));
  return p;
}

Vector softmax(const Vector& logits) {
  const Vector shifted = logits.array() - logits.maxCoeff();
  Vector e = shifted.array().exp();
  return e / e.sum();
}

ForwardResult forward(const MlpParams& params, const Vector& x) {
  check_input(params, x);
  if (!x.allFinite()) throw NumericError("forward: non-finite input");
  ForwardResult r;
  r.pre = params.W1 * x + params.b1;
  r.h = params.activation == Activation::relu ? Vector(r.pre.cwiseMax(0.0)) : Vector(r.pre.array().tanh());
  r.logits = params.W2 * r.h + params.b2;
  r.probs = softmax(r.logits);
  return r;
}

double cross_entropy(const Vector& probs, int y) {
  if (y < 0 || y >= probs.size()) {
    throw DimensionError("cross_entropy: label " + std::to_string(y) + " out of range for " +
                         std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[y], kProbFloor));
}

int argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

MlpGrads weighted_grad(const MlpParams& params, std::span<const WeightedExample> batch) {
  if (batch.empty()) throw ConfigError("weighted_grad: empty batch");
  MlpGrads g = MlpGrads::zeros_like(params);
  for (const auto& ex : batch) {
    if (ex.weight < 0.0) throw ConfigError("weighted_grad: negative weight");
    if (ex.y < 0 || static_cast<std::size_t>(ex.y) >= params.num_classes()) {
      throw DimensionError("weighted_grad: label out of range");
    }
    check_input(params, ex.x);
    if (ex.weight == 0.0) continue;

    const auto fr = forward(params, ex.x);
    Vector delta_out = fr.probs;
    delta_out[ex.y] -= 1.0;
    delta_out *= ex.weight;

    g.W2.noalias() += delta_out * fr.h.transpose();
    g.b2 += delta_out;

    Vector delta_hidden = params.W2.transpose() * delta_out;
    if (params.activation == Activation::relu) {
      delta_hidden = (fr.pre.array() > 0.0).select(delta_hidden, 0.0);
    } else {
      delta_hidden.array() *= 1.0 - fr.h.array().square();
    }
    g.W1.noalias() += delta_hidden * ex.x.transpose();
    g.b1 += delta_hidden;
  }
  return g;
}

void sgd_step_inplace(MlpParams& params, const MlpGrads& grads, double lr) {
  if (grads.W1.rows() != params.W1.rows() || grads.W1.cols() != params.W1.cols() ||
      grads.W2.rows() != params.W2.rows() || grads.W2.cols() != params.W2.cols() ||
      grads.b1.size() != params.b1.size() || grads.b2.size() != params.b2.size()) {
    throw DimensionError("sgd_step: gradient shapes do not match parameters");
  }
  if (!grads.all_finite()) throw NumericError("sgd_step: non-finite gradient");
  params.W1 -= lr * grads.W1;
  params.b1 -= lr * grads.b1;
  params.W2 -= lr * grads.W2;
  params.b2 -= lr * grads.b2;
}

MlpParams sgd_step(const MlpParams& params, const MlpGrads& grads, double lr) {
  MlpParams out = params;
  sgd_step_inplace(out, grads, lr);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j, const char* name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DataError(std::string("parameter snapshot: bad shape for ") + name);
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

}  // namespace

nlohmann::json params_to_json(const MlpParams& p) {
  return {{"format", "ramol-mlp"},
          {"version", 1},
          {"activation", std::string(to_string(p.activation))},
          {"W1", matrix_json(p.W1)},
          {"b1", matrix_json(p.b1)},
          {"W2", matrix_json(p.W2)},
          {"b2", matrix_json(p.b2)}};
}

MlpParams params_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "ramol-mlp") throw DataError("not a ramol-mlp snapshot");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported snapshot version");
    MlpParams p;
    p.activation = parse_activation(j.at("activation").get<std::string>());
    p.W1 = matrix_from_json(j.at("W1"), "W1");
    p.b1 = matrix_from_json(j.at("b1"), "b1");
    p.W2 = matrix_from_json(j.at("W2"), "W2");
    p.b2 = matrix_from_json(j.at("b2"), "b2");
    if (p.b1.size() != p.W1.rows() || p.W2.cols() != p.W1.rows() || p.b2.size() != p.W2.rows()) {
      throw DataError("parameter snapshot: inconsistent shapes");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("parameter snapshot: ") + e.what());
  }
}

}  // namespace ramol
