#include "ramol/error.hpp"
#include "ramol/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace ramol {

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double log_gaussian_diag(const Vector& x, const GaussianComponent& c) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double diff = x[i] - c.mean[i];
    acc += std::log(2.0 * std::numbers::pi * c.var[i]) + diff * diff / c.var[i];
  }
  return -0.5 * acc;
}

}  // namespace

double ClassConditional::log_density(const Vector& x) const {
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  std::vector<double> terms;
  terms.reserve(components.size());
  for (const auto& c : components) terms.push_back(std::log(c.weight / total) + log_gaussian_diag(x, c));
  return log_sum_exp(terms);
}

std::size_t RegimeGenerator::dim() const {
  if (classes.empty() || classes.front().components.empty()) return 0;
  return static_cast<std::size_t>(classes.front().components.front().mean.size());
}

void RegimeGenerator::validate() const {
  if (classes.empty()) throw ConfigError("regime has no classes");
  if (priors.size() != classes.size()) {
    throw ConfigError("regime has " + std::to_string(classes.size()) + " classes but " +
                      std::to_string(priors.size()) + " priors");
  }
  double prior_sum = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("class priors must be nonnegative");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw ConfigError("class priors must sum to 1");
  const auto d = dim();
  if (d == 0) throw ConfigError("regime feature dimension must be positive");
  for (std::size_t y = 0; y < classes.size(); ++y) {
    if (classes[y].components.empty()) throw ConfigError("class " + std::to_string(y) + " has no components");
    for (const auto& c : classes[y].components) {
      if (static_cast<std::size_t>(c.mean.size()) != d || static_cast<std::size_t>(c.var.size()) != d) {
        throw DimensionError("component dimensions disagree within regime");
      }
      if (!(c.weight > 0.0)) throw ConfigError("component weights must be positive");
      if (!((c.var.array() > 0.0).all())) throw ConfigError("component variances must be positive");
    }
  }
}

double RegimeGenerator::log_joint(const Vector& x, int y) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw DimensionError("log_joint: dimension mismatch");
  const auto& prior = priors[static_cast<std::size_t>(y)];
  if (prior <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(prior) + classes[static_cast<std::size_t>(y)].log_density(x);
}

std::pair<Vector, int> RegimeGenerator::sample(Rng& rng) const {
  std::discrete_distribution<int> pick_class(priors.begin(), priors.end());
  const int y = pick_class(rng);
  const auto& comps = classes[static_cast<std::size_t>(y)].components;
  std::size_t k = 0;
  if (comps.size() > 1) {
    std::vector<double> w;
    for (const auto& c : comps) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick_comp(w.begin(), w.end());
    k = pick_comp(rng);
  }
  const auto& c = comps[k];
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(c.mean.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = c.mean[i] + std::sqrt(c.var[i]) * normal(rng);
  return {std::move(x), y};
}

// ---------------------------------------------------------------------------

PiecewiseSource::PiecewiseSource(std::vector<RegimeSpec> regimes, std::uint64_t seed)
    : regimes_(std::move(regimes)), rng_(seed) {
  if (regimes_.empty()) throw ConfigError("piecewise stream needs at least one regime");
  for (const auto& r : regimes_) r.generator.validate();
  dim_ = regimes_.front().generator.dim();
  classes_ = regimes_.front().generator.num_classes();
  for (const auto& r : regimes_) {
    if (r.generator.dim() != dim_) throw DimensionError("regime '" + r.id + "' has a different feature dimension");
    if (r.generator.num_classes() != classes_) {
      throw DimensionError("regime '" + r.id + "' has a different number of classes");
    }
  }
}

std::optional<Example> PiecewiseSource::next() {
  while (regime_ < regimes_.size() && within_ >= regimes_[regime_].length) {
    ++regime_;
    within_ = 0;
  }
  if (regime_ >= regimes_.size()) return std::nullopt;
  auto [x, y] = regimes_[regime_].generator.sample(rng_);
  ++within_;
  return Example{std::move(x), y, step_++};
}

std::size_t PiecewiseSource::total_length() const {
  std::size_t n = 0;
  for (const auto& r : regimes_) n += r.length;
  return n;
}

std::size_t PiecewiseSource::regime_at(std::size_t step) const {
  std::size_t end = 0;
  for (std::size_t i = 0; i < regimes_.size(); ++i) {
    end += regimes_[i].length;
    if (step < end) return i;
  }
  throw std::out_of_range("step " + std::to_string(step) + " is past the end of the stream");
}

std::vector<std::size_t> PiecewiseSource::boundaries() const {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  for (const auto& r : regimes_) {
    out.push_back(start);
    start += r.length;
  }
  return out;
}

// ---------------------------------------------------------------------------

Vector bayes_posterior(const RegimeGenerator& regime, const Vector& x) {
  std::vector<double> logs(regime.num_classes());
  for (std::size_t y = 0; y < logs.size(); ++y) logs[y] = regime.log_joint(x, static_cast<int>(y));
  const double norm = log_sum_exp(logs);
  Vector post(static_cast<Eigen::Index>(logs.size()));
  for (std::size_t y = 0; y < logs.size(); ++y) post[static_cast<Eigen::Index>(y)] = std::exp(logs[y] - norm);
  return post;
}

int bayes_predict(const RegimeGenerator& regime, const Vector& x) {
  int best = 0;
  double best_log = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < regime.num_classes(); ++y) {
    const double l = regime.log_joint(x, static_cast<int>(y));
    if (l > best_log) {
      best_log = l;
      best = static_cast<int>(y);
    }
  }
  return best;
}

double tv_distance(const RegimeGenerator& p, const RegimeGenerator& q, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ConfigError("tv_distance: sample count must be positive");
  if (p.dim() != q.dim() || p.num_classes() != q.num_classes()) {
    throw DimensionError("tv_distance: generators disagree on dimension or class count");
  }
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  // |p - q| / m = 2 |p - q| / (p + q) = 2 tanh(|log p - log q| / 2)
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    auto [x, y] = coin(rng) ? p.sample(rng) : q.sample(rng);
    const double lp = p.log_joint(x, y);
    const double lq = q.log_joint(x, y);
    double gap = lp - lq;
    if (std::isnan(gap)) gap = 0.0;  // both -inf: zero mass under m, never sampled in practice
    acc += std::tanh(std::abs(gap) / 2.0);
  }
  return acc / static_cast<double>(samples);
}

double drift_budget(const std::vector<RegimeSpec>& regimes, std::size_t samples_per_estimate, std::uint64_t seed) {
  if (regimes.empty()) throw ConfigError("drift_budget needs at least one regime");
  if (samples_per_estimate == 0) throw ConfigError("drift_budget: sample count must be positive");
  double total = 0.0;
  for (std::size_t i = 1; i < regimes.size(); ++i) {
    total += tv_distance(regimes[i - 1].generator, regimes[i].generator, samples_per_estimate, seed);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Regime file parser
// ---------------------------------------------------------------------------

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& text, std::size_t line_no) {
  std::vector<double> out;
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream ss(normalized);
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) {
      throw ConfigError("regime file line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char c) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, c)) parts.push_back(strip(cur));
  return parts;
}

}  // namespace

RegimeFile parse_regime_file(std::istream& in) {
  RegimeFile out;
  std::map<std::string, RegimeGenerator> generators;
  std::vector<std::string> order;
  std::vector<std::pair<std::string, std::size_t>> schedule;
  std::string current;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError("regime file line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      const auto inner = strip(line.substr(1, line.size() - 2));
      std::istringstream ss(inner);
      std::string kw, name, extra;
      ss >> kw >> name;
      if (kw != "regime" || name.empty() || (ss >> extra)) throw fail("expected [regime NAME]");
      if (generators.count(name)) throw fail("regime '" + name + "' defined twice");
      generators[name] = RegimeGenerator{};
      order.push_back(name);
      current = name;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected key = value");
    const auto key = strip(line.substr(0, eq));
    const auto value = strip(line.substr(eq + 1));

    if (key == "seed") {
      if (!current.empty()) throw fail("seed must appear before any [regime] section");
      try {
        std::size_t used = 0;
        out.seed = std::stoull(value, &used);
        if (used != value.size()) throw fail("bad seed");
      } catch (const std::logic_error&) {
        throw fail("bad seed '" + value + "'");
      }
    } else if (key == "schedule") {
      for (const auto& item : split_on(value, ',')) {
        std::istringstream ss(item);
        std::string name;
        long long len = 0;
        std::string extra;
        if (!(ss >> name >> len) || (ss >> extra) || len <= 0) {
          throw fail("schedule items must look like 'NAME LENGTH' with LENGTH > 0");
        }
        schedule.emplace_back(name, static_cast<std::size_t>(len));
      }
    } else if (key == "priors") {
      if (current.empty()) throw fail("priors outside a [regime] section");
      generators[current].priors = parse_numbers(value, line_no);
    } else if (key == "component") {
      if (current.empty()) throw fail("component outside a [regime] section");
      const auto parts = split_on(value, '|');
      if (parts.size() != 4) throw fail("component = CLASS | WEIGHT | MEAN... | VAR...");
      const auto cls = parse_numbers(parts[0], line_no);
      const auto weight = parse_numbers(parts[1], line_no);
      const auto mean = parse_numbers(parts[2], line_no);
      const auto var = parse_numbers(parts[3], line_no);
      if (cls.size() != 1 || cls[0] < 0 || cls[0] != std::floor(cls[0])) throw fail("bad class index");
      if (weight.size() != 1) throw fail("component weight must be a single number");
      if (mean.empty() || mean.size() != var.size()) throw fail("mean and var must have the same nonzero length");
      auto& gen = generators[current];
      const auto y = static_cast<std::size_t>(cls[0]);
      if (gen.classes.size() <= y) gen.classes.resize(y + 1);
      GaussianComponent c;
      c.weight = weight[0];
      c.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      c.var = Eigen::Map<const Vector>(var.data(), static_cast<Eigen::Index>(var.size()));
      gen.classes[y].components.push_back(std::move(c));
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }

  if (schedule.empty()) throw ConfigError("regime file has no schedule");
  for (const auto& [name, gen] : generators) {
    try {
      gen.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("regime '" + name + "': " + e.what());
    }
  }
  for (const auto& [name, len] : schedule) {
    const auto it = generators.find(name);
    if (it == generators.end()) throw ConfigError("schedule names undefined regime '" + name + "'");
    out.schedule.push_back(RegimeSpec{len, it->second, name});
  }
  const auto d = out.schedule.front().generator.dim();
  const auto c = out.schedule.front().generator.num_classes();
  for (const auto& r : out.schedule) {
    if (r.generator.dim() != d || r.generator.num_classes() != c) {
      throw DimensionError("regime '" + r.id + "' disagrees with the first regime on dimension or class count");
    }
  }
  return out;
}

RegimeFile load_regime_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open regime file " + path.string());
  return parse_regime_file(in);
}

}  // namespace ramol
