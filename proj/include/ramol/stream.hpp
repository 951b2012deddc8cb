#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ramol {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// One observation of a stream. `step` is the 0-based position in the stream.
struct Example {
  Vector features;
  int label = 0;
  std::size_t step = 0;
};

// ---------------------------------------------------------------------------
// Past-only standardization
// ---------------------------------------------------------------------------

inline constexpr double kStandardizeEpsilon = 1e-8;

// Welford accumulator per feature. Variance is sum_sq_dev / max(count, 1).
struct StandardizerState {
  std::size_t count = 0;
  Vector mean;
  Vector sum_sq_dev;

  static StandardizerState empty(std::size_t dim);
  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  Vector variance() const;
};

// Scales x with the statistics of everything folded in so far, then folds x in.
// The first output of a fresh state is x / sqrt(eps).
Vector standardize(StandardizerState& state, const Vector& x);

// Value-style variant: returns the standardized vector and the updated state.
std::pair<Vector, StandardizerState> standardize(const StandardizerState& state, const Vector& x);

// ---------------------------------------------------------------------------
// Example sources
// ---------------------------------------------------------------------------

class ExampleSource {
 public:
  virtual ~ExampleSource() = default;

  // Next example in temporal order, or nullopt once the stream is exhausted.
  virtual std::optional<Example> next() = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_classes() const = 0;
};

// Drains a source into memory.
std::vector<Example> materialize(ExampleSource& source);

struct CsvSchema {
  // Empty means every column except the label column.
  std::vector<std::string> feature_columns;
  // Empty means the last column.
  std::string label_column;
  char delimiter = ',';
  // Explicit label vocabulary in class-index order. When empty the mapping is
  // built from the label column in first-seen order.
  std::vector<std::string> labels;
};

// Reads examples row by row. Rows are parsed lazily so that a malformed row is
// only reported when the stream reaches it.
class CsvSource final : public ExampleSource {
 public:
  CsvSource(const std::filesystem::path& path, CsvSchema schema);

  std::optional<Example> next() override;
  std::size_t dim() const override { return feature_index_.size(); }
  std::size_t num_classes() const override { return label_names_.size(); }

  const std::vector<std::string>& label_names() const { return label_names_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

 private:
  std::filesystem::path path_;
  CsvSchema schema_;
  std::ifstream in_;
  std::vector<std::size_t> feature_index_;
  std::vector<std::string> feature_names_;
  std::size_t label_index_ = 0;
  std::size_t column_count_ = 0;
  std::vector<std::string> label_names_;
  std::map<std::string, int> label_lookup_;
  std::size_t row_ = 0;
  std::size_t step_count_ = 0;
};

inline CsvSource open_csv_stream(const std::filesystem::path& path, CsvSchema schema = {}) {
  return CsvSource(path, std::move(schema));
}

// FNV-1a over the raw bytes of a file; used as the dataset hash in manifests.
std::uint64_t file_hash(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic piecewise-stationary streams
// ---------------------------------------------------------------------------

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Vector var;  // diagonal covariance
};

// Class-conditional density: a mixture of axis-aligned Gaussians.
struct ClassConditional {
  std::vector<GaussianComponent> components;

  double log_density(const Vector& x) const;
};

// Joint distribution over (x, y): class priors times class-conditionals.
struct RegimeGenerator {
  std::vector<double> priors;
  std::vector<ClassConditional> classes;

  std::size_t dim() const;
  std::size_t num_classes() const { return classes.size(); }

  // Throws ConfigError / DimensionError when the generator is ill-formed.
  void validate() const;

  // log p(y) + log p(x | y)
  double log_joint(const Vector& x, int y) const;
  std::pair<Vector, int> sample(Rng& rng) const;
};

struct RegimeSpec {
  std::size_t length = 0;
  RegimeGenerator generator;
  std::string id;
};

// Emits regimes[i].length i.i.d. draws from regimes[i].generator, in order.
class PiecewiseSource final : public ExampleSource {
 public:
  PiecewiseSource(std::vector<RegimeSpec> regimes, std::uint64_t seed);

  std::optional<Example> next() override;
  std::size_t dim() const override { return dim_; }
  std::size_t num_classes() const override { return classes_; }

  const std::vector<RegimeSpec>& regimes() const { return regimes_; }
  std::size_t total_length() const;
  // Index into regimes() of the regime that generated `step`.
  std::size_t regime_at(std::size_t step) const;
  // First step of every regime segment.
  std::vector<std::size_t> boundaries() const;

 private:
  std::vector<RegimeSpec> regimes_;
  Rng rng_;
  std::size_t dim_ = 0;
  std::size_t classes_ = 0;
  std::size_t regime_ = 0;
  std::size_t within_ = 0;
  std::size_t step_ = 0;
};

inline PiecewiseSource gen_piecewise_stream(std::vector<RegimeSpec> regimes, std::uint64_t seed) {
  return PiecewiseSource(std::move(regimes), seed);
}

// Posterior p(y | x) under the regime.
Vector bayes_posterior(const RegimeGenerator& regime, const Vector& x);

// argmax_y p(y) p(x | y); ties go to the lowest class index.
int bayes_predict(const RegimeGenerator& regime, const Vector& x);

inline int bayes_predict(const RegimeSpec& regime, const Vector& x) {
  return bayes_predict(regime.generator, x);
}

inline constexpr std::uint64_t kDriftSeed = 0x5eedULL;

// Monte Carlo total-variation distance between two joint distributions,
// 0.5 * E_{m}[|p - q| / m] with m = (p + q) / 2.
double tv_distance(const RegimeGenerator& p, const RegimeGenerator& q, std::size_t samples,
                   std::uint64_t seed = kDriftSeed);

// Sum of TV distances across consecutive regime boundaries. Every boundary is
// estimated with the same seed, so the budget is additive over concatenation.
double drift_budget(const std::vector<RegimeSpec>& regimes, std::size_t samples_per_estimate,
                    std::uint64_t seed = kDriftSeed);

// ---------------------------------------------------------------------------
// Regime files
// ---------------------------------------------------------------------------

// Parsed regime file: the schedule of regimes plus an optional stream seed.
struct RegimeFile {
  std::vector<RegimeSpec> schedule;
  std::optional<std::uint64_t> seed;
};

// Grammar (one statement per line, '#' starts a comment):
//
//   seed = 7                      optional
//   [regime A]                    opens generator A
//   priors = 0.5 0.5              one prior per class
//   component = 0 | 1.0 | -2 0 | 1 1
//                                 class | weight | mean... | var...
//   schedule = A 500, B 500, A 500
//
// Every generator named in the schedule must be defined.
RegimeFile parse_regime_file(std::istream& in);
RegimeFile load_regime_file(const std::filesystem::path& path);

}  // namespace ramol
