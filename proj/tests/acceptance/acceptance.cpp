// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when any selected criterion fails.
//
//   ramol_acceptance [--criteria 1,2,...] [--elec PATH]
//
// Criteria 4 and 5 need the ElecNormNew CSV, taken from --elec or the
// RAMOL_ELEC_CSV environment variable.

#include "support/oracles.hpp"

#include "ramol/error.hpp"
#include "ramol/eval.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

using namespace ramol;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::filesystem::path config_path(const char* name) {
  return std::filesystem::path(RAMOL_SOURCE_DIR) / "configs" / name;
}

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> dim(1, 6), hidden(2, 10), classes(2, 4), bsize(1, 5);
  std::uniform_real_distribution<double> weight(0.0, 2.0);
  constexpr int kInstances = 120;
  double worst = 0.0;
  std::size_t coords = 0;
  int rejected = 0;
  for (int done = 0; done < kInstances;) {
    const auto act = done % 2 ? Activation::tanh : Activation::relu;
    const auto d = static_cast<std::size_t>(dim(rng));
    const auto c = static_cast<std::size_t>(classes(rng));
    const auto p = oracle::random_params(rng, d, static_cast<std::size_t>(hidden(rng)), c, act);
    std::uniform_int_distribution<int> label(0, static_cast<int>(c) - 1);
    std::vector<WeightedExample> batch;
    const int n = bsize(rng);
    for (int i = 0; i < n; ++i) batch.push_back({oracle::random_vector(rng, d), label(rng), weight(rng)});
    // A finite-difference probe across a relu kink measures the kink, not the gradient.
    if (act == Activation::relu && oracle::min_abs_preactivation(p, batch) < 1e-3) {
      ++rejected;
      continue;
    }
    const auto rep = oracle::finite_difference_check(p, batch, weighted_grad(p, batch), 1e-5, 1e-6);
    worst = std::max(worst, rep.max_rel_error);
    coords += rep.coordinates;
    ++done;
  }
  return {worst < 1e-4, fmt("%d instances, %zu coordinates, max rel err %.2e (< 1e-4), %d relu-kink draws redrawn",
                            kInstances, coords, worst, rejected)};
}

Verdict retrieval_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> gap(1, 3), extra(0, 300);
  std::uniform_int_distribution<int> lattice(-2, 2);
  const std::vector<std::size_t> ks{1, 3, 5};
  const std::vector<std::optional<std::size_t>> hs{std::nullopt, 10, 100};
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t n = 0; n <= 256; ++n) {
    for (int layout = 0; layout < 2; ++layout) {
      // layout 0: continuous embeddings; layout 1: integer lattice with many exact ties.
      const std::size_t cap = std::max<std::size_t>(n, 1);
      Buffer buffer(cap, 1, 4);
      std::vector<oracle::Stored> all;
      std::size_t t = 0;
      const std::size_t inserts = n == 0 ? 0 : n + (layout ? extra(rng) : 0);
      for (std::size_t i = 0; i < inserts; ++i) {
        Vector h(4);
        for (int j = 0; j < 4; ++j) h(j) = layout ? lattice(rng) : std::normal_distribution<double>()(rng);
        buffer.insert(MemoryEntry{Vector::Zero(1), 0, h, t});
        all.push_back({h, t});
        t += gap(rng);
      }
      const std::vector<oracle::Stored> live(all.end() - static_cast<long>(std::min(all.size(), cap)), all.end());
      for (int q = 0; q < 3; ++q) {
        Vector query(4);
        for (int j = 0; j < 4; ++j) query(j) = layout ? lattice(rng) : std::normal_distribution<double>()(rng);
        for (auto k : ks) {
          for (const auto& h : hs) {
            const auto got = buffer.retrieve(query, t, k, h);
            const auto want = oracle::brute_force_knn(live, query, t, k, h);
            std::vector<std::size_t> got_t;
            for (const auto& nb : got.items) got_t.push_back(nb.entry.t);
            ++cases;
            mismatches += got_t != want;
          }
        }
      }
    }
  }
  return {mismatches == 0, fmt("%zu (buffer, query, K, H) cases over sizes 0..256, %zu mismatches", cases, mismatches)};
}

Verdict reduction_identities() {
  const auto a = oracle::two_gaussians(oracle::vec({-1.0, 0.5, 0.0}), oracle::vec({1.0, -0.5, 0.5}), 1.0);
  const auto b = oracle::two_gaussians(oracle::vec({0.5, 1.0, -1.0}), oracle::vec({-0.5, -1.0, 1.0}), 1.5);
  auto src = gen_piecewise_stream({{5000, a, "A"}, {5000, b, "B"}}, 314);
  const auto stream = materialize(src);
  auto base = default_config(Variant::baseline);
  auto naive = default_config(Variant::ram_naive);
  naive.beta = 0.0;
  auto gated = default_config(Variant::ram_gated);
  gated.alpha = 0.0;
  Learner lb(base, 3, 2), ln(naive, 3, 2), lg(gated, 3, 2);
  std::size_t first_naive = 0, first_gated = 0, retrieved = 0;
  for (const auto& e : stream) {
    lb.step(e);
    ln.step(e);
    retrieved += lg.step(e).n_retrieved;
    if (!first_naive && !(lb.params() == ln.params())) first_naive = e.step + 1;
    if (!first_gated && !(lb.params() == lg.params())) first_gated = e.step + 1;
  }
  const bool ok = first_naive == 0 && first_gated == 0 && retrieved > 0;
  return {ok, fmt("%zu steps, naive(beta=0) %s, gated(alpha=0) %s, %zu neighbours retrieved and ignored",
                  stream.size(), first_naive ? fmt("diverged at step %zu", first_naive - 1).c_str() : "identical",
                  first_gated ? fmt("diverged at step %zu", first_gated - 1).c_str() : "identical", retrieved)};
}

// ---------------------------------------------------------------------------

std::optional<std::filesystem::path> elec_path(const std::optional<std::string>& flag) {
  if (flag) return std::filesystem::path(*flag);
  if (const char* env = std::getenv("RAMOL_ELEC_CSV"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

std::vector<Example> load_elec(const std::filesystem::path& p, std::size_t& classes) {
  CsvSchema schema;
  schema.label_column = "class";
  auto src = open_csv_stream(p, schema);
  auto xs = materialize(src);
  classes = src.num_classes();
  return xs;
}

const std::vector<std::uint64_t> kElecSeeds{1, 2, 3};

Verdict elec_reproduction(const std::optional<std::filesystem::path>& path) {
  if (!path) return {false, "ElecNormNew CSV not available (set RAMOL_ELEC_CSV or pass --elec)"};
  std::size_t classes = 0;
  const auto xs = load_elec(*path, classes);
  std::map<Variant, AggregateMetrics> agg;
  for (auto v : {Variant::baseline, Variant::ram_naive, Variant::ram_gated}) {
    agg[v] = aggregate(run_seeds(default_config(v), xs, classes, kElecSeeds, {}, 1));
  }
  const double base = agg[Variant::baseline].avg_mean;
  const double naive = agg[Variant::ram_naive].avg_mean;
  const double gated = agg[Variant::ram_gated].avg_mean;
  bool ok = xs.size() == 45312 && std::abs(base - 0.8384) <= 0.02 && naive > base && gated > base;
  std::string stats;
  for (auto v : {Variant::ram_naive, Variant::ram_gated}) {
    double cov = 0, lm = 0, lm_pre = 0;
    for (const auto& r : agg[v].runs) {
      cov += *r.coverage;
      lm += *r.label_match;
      lm_pre += *r.label_match_pre_gate;
    }
    const double n = static_cast<double>(agg[v].runs.size());
    cov /= n;
    lm /= n;
    lm_pre /= n;
    ok = ok && cov >= 0.99 && lm >= 0.70 && lm <= 0.82;
    stats += fmt(", %s coverage %.3f label_match %.3f (pre-gate %.3f)", std::string(to_string(v)).c_str(), cov, lm,
                 lm_pre);
  }
  return {ok, fmt("%zu rows; avg acc baseline %.4f (target 0.8384 +- 0.02), naive %.4f, gated %.4f", xs.size(), base,
                  naive, gated) +
                  stats};
}

Verdict elec_runtime(const std::optional<std::filesystem::path>& path) {
  if (!path) return {false, "ElecNormNew CSV not available (set RAMOL_ELEC_CSV or pass --elec)"};
  std::size_t classes = 0;
  const auto xs = load_elec(*path, classes);
  const double tb = timed_run(default_config(Variant::baseline), xs, classes, 3);
  const double tn = timed_run(default_config(Variant::ram_naive), xs, classes, 3);
  const double tg = timed_run(default_config(Variant::ram_gated), xs, classes, 3);
  const bool ok = tb < tn && tn < tg && tg / tb <= 3.0;
  return {ok, fmt("median wall clock baseline %.2fs, naive %.2fs (x%.2f), gated %.2fs (x%.2f, <= 3.0)", tb, tn, tn / tb,
                  tg, tg / tb)};
}

// ---------------------------------------------------------------------------

std::vector<Example> stream_from_file(const std::filesystem::path& p, std::vector<RegimeSpec>& schedule) {
  const auto file = load_regime_file(p);
  schedule = file.schedule;
  auto src = gen_piecewise_stream(file.schedule, file.seed.value_or(0));
  return materialize(src);
}

Verdict recurring_regimes() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<RegimeSpec> schedule;
  const auto xs = stream_from_file(config_path("recurring.regimes"), schedule);
  const std::size_t onset = schedule[0].length + schedule[1].length;
  constexpr std::size_t kWindow = 500;
  auto post = [&](const RunMetrics& m) {
    const auto b = m.per_step_correct.begin() + static_cast<long>(onset);
    return std::accumulate(b, b + kWindow, 0.0) / kWindow;
  };
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto base = default_config(Variant::baseline);
    auto gated = default_config(Variant::ram_gated);
    base.lr = gated.lr = 0.1;
    base.seed = gated.seed = seed;
    const double pb = post(prequential_run(base, xs, 2));
    const double pg = post(prequential_run(gated, xs, 2));
    wins += pg > pb;
    detail += fmt("%sseed %llu gated %.3f vs baseline %.3f", detail.empty() ? "" : ", ",
                  static_cast<unsigned long long>(seed), pg, pb);
  }
  const double elapsed = seconds_since(start);
  return {wins >= 2 && elapsed < 60.0,
          fmt("steps %zu..%zu after the second A onset: ", onset, onset + kWindow - 1) + detail +
              fmt("; gated ahead in %d/3 (need 2), %.1fs (< 60s)", wins, elapsed)};
}

Verdict stability() {
  std::vector<RegimeSpec> schedule;
  const auto xs = stream_from_file(config_path("overlap.regimes"), schedule);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  auto base = default_config(Variant::baseline);
  auto gated = default_config(Variant::ram_gated);
  base.lr = gated.lr = 0.3;
  const auto ab = aggregate(run_seeds(base, xs, 2, seeds));
  const auto ag = aggregate(run_seeds(gated, xs, 2, seeds));
  return {ag.final_std <= ab.final_std,
          fmt("final acc over 5 seeds: gated %.4f +- %.4f, baseline %.4f +- %.4f", ag.final_mean, ag.final_std,
              ab.final_mean, ab.final_std)};
}

Verdict drift_budget_sanity() {
  const auto a = oracle::two_gaussians(oracle::vec({-1.0, 0.0}), oracle::vec({1.0, 0.0}), 1.0);
  const auto far_b = oracle::two_gaussians(oracle::vec({200.0, 0.0}), oracle::vec({202.0, 0.0}), 1.0);
  const auto far_c = oracle::two_gaussians(oracle::vec({0.0, 200.0}), oracle::vec({0.0, 202.0}), 1.0);
  const double single = drift_budget({{100, a, "A"}}, 20000);
  const double same = drift_budget({{100, a, "A"}, {100, a, "A"}, {100, a, "A"}}, 20000);
  bool ok = single == 0.0 && same == 0.0;
  std::string detail = fmt("stationary: %.3g and %.3g;", single, same);
  const std::vector<std::vector<RegimeSpec>> disjoint{
      {{10, a, "A"}, {10, far_b, "B"}},
      {{10, a, "A"}, {10, far_b, "B"}, {10, a, "A"}},
      {{10, a, "A"}, {10, far_b, "B"}, {10, far_c, "C"}, {10, a, "A"}}};
  for (const auto& regimes : disjoint) {
    const double v = drift_budget(regimes, 20000);
    const double per = v / static_cast<double>(regimes.size() - 1);
    ok = ok && std::abs(per - 1.0) <= 0.05;
    detail += fmt(" %zu boundaries -> %.4f per boundary;", regimes.size() - 1, per);
  }
  return {ok, detail + " tolerance 1.0 +- 0.05"};
}

Verdict causality() {
  std::mt19937_64 rng(99);
  std::size_t streams = 0, checked = 0, violations = 0;
  std::vector<LearnerConfig> configs;
  for (auto v : {Variant::baseline, Variant::ram_naive, Variant::ram_gated}) configs.push_back(default_config(v));
  for (const auto& c : ablation_configs(default_config(Variant::ram_gated))) configs.push_back(c);
  auto tau = default_config(Variant::ram_gated);
  tau.tau_mode = TauMode::running_median;
  configs.push_back(tau);
  auto decay = default_config(Variant::ram_naive);
  decay.lr_decay = true;
  configs.push_back(decay);
  auto unclipped = default_config(Variant::ram_gated);
  unclipped.clip = 0.0;
  configs.push_back(unclipped);

  struct Trace {
    std::vector<int> prediction;
    std::vector<Vector> features;
    std::vector<bool> correct;
  };
  auto trace = [](LearnerConfig cfg, const std::vector<Example>& xs, std::size_t classes) {
    Trace tr;
    Learner l(std::move(cfg), static_cast<std::size_t>(xs[0].features.size()), classes);
    for (const auto& e : xs) {
      const auto out = l.step(e);
      tr.prediction.push_back(out.prediction);
      tr.features.push_back(out.features);
      tr.correct.push_back(out.correct);
    }
    return tr;
  };
  std::uniform_int_distribution<int> dim(1, 5), cls(2, 4);
  for (int trial = 0; trial < 40; ++trial) {
    auto cfg = configs[static_cast<std::size_t>(trial) % configs.size()];
    cfg.buffer_capacity = 40;
    cfg.hidden_dim = 12;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto d = static_cast<std::size_t>(dim(rng));
    const int classes = cls(rng);
    std::uniform_int_distribution<int> label(0, classes - 1);
    std::vector<Example> xs;
    for (std::size_t t = 0; t < 300; ++t) {
      const int y = label(rng);
      Vector x = oracle::random_vector(rng, d, 1.5);
      x(0) += y;
      xs.push_back({x, y, t});
    }
    const auto ref = trace(cfg, xs, static_cast<std::size_t>(classes));
    for (int m = 0; m < 4; ++m) {
      const auto at = std::uniform_int_distribution<std::size_t>(1, xs.size() - 1)(rng);
      auto mutated = xs;
      for (std::size_t t = at; t < mutated.size(); ++t) {
        if (t == at || rng() % 3 == 0) {
          mutated[t].features = oracle::random_vector(rng, d, 50.0);
          mutated[t].label = label(rng);
        }
      }
      const auto got = trace(cfg, mutated, static_cast<std::size_t>(classes));
      for (std::size_t t = 0; t < at; ++t) {
        ++checked;
        if (got.prediction[t] != ref.prediction[t] || got.features[t] != ref.features[t] ||
            got.correct[t] != ref.correct[t]) {
          ++violations;
        }
      }
    }
    ++streams;
  }
  return {violations == 0, fmt("%zu random streams x 4 future mutations, %zu past steps compared "
                               "(prediction, standardized input, a_t), %zu violations",
                               streams, checked, violations)};
}

std::set<int> parse_criteria(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.insert(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::optional<std::string> elec;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criteria" && i + 1 < argc) {
      selected = parse_criteria(argv[++i]);
    } else if (a == "--elec" && i + 1 < argc) {
      elec = argv[++i];
    } else {
      std::cerr << "usage: ramol_acceptance [--criteria 1,2,...] [--elec PATH]\n";
      return 1;
    }
  }
  const auto elec_csv = elec_path(elec);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"retrieval oracle", retrieval_oracle},
      {"reduction identities", reduction_identities},
      {"ElecNormNew reproduction", [&] { return elec_reproduction(elec_csv); }},
      {"ElecNormNew runtime ordering", [&] { return elec_runtime(elec_csv); }},
      {"recurring-regime adaptation", recurring_regimes},
      {"seed stability", stability},
      {"drift-budget sanity", drift_budget_sanity},
      {"causality", causality},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << v.detail
              << fmt("  [%.1fs]", seconds_since(start)) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
