// ramol: prequential experiments with retrieval-augmented online learners.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include "ramol/config.hpp"
#include "ramol/error.hpp"
#include "ramol/eval.hpp"
#include "ramol/report.hpp"
#include "ramol/stream.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct DataOptions {
  std::string data;
  std::string synthetic;
  std::string label_col;
  std::string features;
  std::string labels;
  char delimiter = ',';
  std::optional<std::uint64_t> stream_seed;

  void add(CLI::App& app) {
    auto* d = app.add_option("--data", data, "CSV stream (header row required)");
    auto* s = app.add_option("--synthetic", synthetic, "Regime file describing a synthetic stream")
                  ->check(CLI::ExistingFile);
    d->excludes(s);
    app.add_option("--label-col", label_col, "Label column name (default: last column)");
    app.add_option("--features", features, "Comma-separated feature columns (default: all but the label)");
    app.add_option("--labels", labels, "Comma-separated label vocabulary in class order");
    app.add_option("--delimiter", delimiter, "CSV delimiter");
    app.add_option("--stream-seed", stream_seed, "Seed of the synthetic stream (default: file seed or 0)");
  }

  bool given() const { return !data.empty() || !synthetic.empty(); }
};

struct LoadedData {
  std::vector<ramol::Example> examples;
  std::size_t num_classes = 0;
  std::optional<ramol::RegimeFile> regimes;
  std::uint64_t stream_seed = 0;
  json description;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

LoadedData load_data(const DataOptions& o) {
  LoadedData out;
  if (!o.data.empty()) {
    ramol::CsvSchema schema;
    schema.label_column = o.label_col;
    schema.feature_columns = split_list(o.features);
    schema.labels = split_list(o.labels);
    schema.delimiter = o.delimiter;
    auto source = ramol::open_csv_stream(o.data, schema);
    out.examples = ramol::materialize(source);
    out.num_classes = source.num_classes();
    if (out.examples.empty()) throw ramol::DataError("no data rows in " + o.data);
    out.description = {{"kind", "csv"},
                       {"path", fs::absolute(o.data).string()},
                       {"hash", hex64(ramol::file_hash(o.data))},
                       {"rows", out.examples.size()},
                       {"label_column", o.label_col},
                       {"features", source.feature_names()},
                       {"labels", source.label_names()},
                       {"delimiter", std::string(1, o.delimiter)}};
  } else {
    auto file = ramol::load_regime_file(o.synthetic);
    out.stream_seed = o.stream_seed.value_or(file.seed.value_or(0));
    auto source = ramol::gen_piecewise_stream(file.schedule, out.stream_seed);
    out.examples = ramol::materialize(source);
    out.num_classes = source.num_classes();
    json schedule = json::array();
    for (const auto& r : file.schedule) schedule.push_back({{"id", r.id}, {"length", r.length}});
    out.description = {{"kind", "synthetic"},
                       {"path", fs::absolute(o.synthetic).string()},
                       {"hash", hex64(ramol::file_hash(o.synthetic))},
                       {"rows", out.examples.size()},
                       {"stream_seed", out.stream_seed},
                       {"schedule", std::move(schedule)}};
    out.regimes = std::move(file);
  }
  return out;
}

// Hyperparameter flags, kept as text and applied through apply_setting so the
// CLI and config files share one parser.
struct HyperOptions {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, std::string>> flags = {
      {"buffer", "--buffer"}, {"k", "--k"},         {"horizon", "--horizon"},       {"tau", "--tau"},
      {"tau_mode", "--tau-mode"}, {"rho", "--rho"}, {"alpha", "--alpha"},           {"beta", "--beta"},
      {"lr", "--lr"},         {"lr_decay", "--lr-decay"}, {"hidden", "--hidden"},   {"activation", "--activation"},
      {"renormalize", "--renormalize"}, {"no_decay_mode", "--no-decay-mode"},       {"standardize", "--standardize"},
      {"clip", "--clip"}};

  void add(CLI::App& app, bool with_ablation) {
    app.add_option("--config", config_file, "Learner config file (key = value lines)")->check(CLI::ExistingFile);
    for (const auto& [key, flag] : flags) {
      app.add_option(flag, values[key], "Override '" + key + "'");
    }
    if (with_ablation) app.add_option("--ablation", values["ablation"], "none or no_time,no_sim,no_decay");
  }

  ramol::LearnerConfig resolve(std::optional<std::string> variant) const {
    // Variant defaults first, then the config file, then individual flags.
    ramol::LearnerConfig c;
    if (variant) ramol::apply_setting(c, "variant", *variant);
    if (!config_file.empty()) c = ramol::load_config_file(config_file, c);
    for (const auto& [key, value] : values) {
      if (!value.empty()) ramol::apply_setting(c, key, value);
    }
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// Run directory: manifest first, outputs after, removed again on failure.
// ---------------------------------------------------------------------------

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class RunDirectory {
 public:
  RunDirectory(const fs::path& root, json manifest) : manifest_(std::move(manifest)) {
    const auto stamp = timestamp();
    manifest_["timestamp"] = stamp;
    const auto tag = hex64(fnv(manifest_.dump())).substr(0, 8);
    dir_ = root / (stamp + "-" + tag);
    for (int i = 1; fs::exists(dir_); ++i) dir_ = root / (stamp + "-" + tag + "-" + std::to_string(i));
    fs::create_directories(dir_);
    manifest_["output_dir"] = fs::absolute(dir_).string();
    write_json("manifest.json", manifest_);
  }

  ~RunDirectory() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(dir_, ec);
    }
  }

  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  void write_json(const fs::path& rel, const json& j) {
    write(rel, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
  }

  template <typename Fn>
  void write(const fs::path& rel, Fn&& fn) {
    const auto path = dir_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ramol::DataError("cannot write " + path.string());
    fn(out);
    outputs_.push_back(rel.string());
  }

  void commit() {
    manifest_["outputs"] = outputs_;
    std::ofstream out(dir_ / "manifest.json");
    out << manifest_.dump(2) << '\n';
    committed_ = true;
  }

  const fs::path& path() const { return dir_; }

 private:
  json manifest_;
  fs::path dir_;
  std::vector<std::string> outputs_;
  bool committed_ = false;
};

json base_manifest(const std::string& command, const LoadedData& data) {
  return {{"tool", "ramol"}, {"version", RAMOL_VERSION}, {"command", command}, {"dataset", data.description}};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(text)) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
      throw ramol::ConfigError("bad seed '" + s + "'");
    }
  }
  if (seeds.empty()) throw ramol::ConfigError("no seeds given");
  return seeds;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct RunArgs {
  DataOptions data;
  HyperOptions hyper;
  std::optional<std::string> variant;
  std::string seeds = "42";
  std::size_t window = ramol::kDefaultWindow;
  std::string out = "runs";
  std::string from_manifest;
  std::size_t threads = 1;
  bool save_params = false;
  bool dump_buffer = false;
};

void write_seed_outputs(RunDirectory& dir, const std::string& prefix, const ramol::RunMetrics& m) {
  dir.write_json(prefix + "/metrics.json", ramol::metrics_to_json(m));
  dir.write(prefix + "/curve.csv", [&](std::ostream& out) { ramol::write_curve_csv(out, m); });
}

void save_learner_state(RunDirectory& dir, const std::string& prefix, const ramol::LearnerConfig& config,
                        const LoadedData& data, bool params, bool buffer) {
  if (!params && !buffer) return;
  // Replays the run to recover the final learner; metrics are unaffected.
  ramol::Learner learner(config, static_cast<std::size_t>(data.examples.front().features.size()), data.num_classes);
  for (const auto& ex : data.examples) learner.step(ex);
  if (params) dir.write_json(prefix + "/params.json", ramol::params_to_json(learner.params()));
  if (buffer) dir.write_json(prefix + "/buffer.json", ramol::buffer_to_json(learner.buffer()));
}

int cmd_run(RunArgs& a, const CLI::App& sub) {
  ramol::LearnerConfig config;
  std::vector<std::uint64_t> seeds;
  std::size_t window = a.window;

  if (!a.from_manifest.empty()) {
    std::ifstream in(a.from_manifest);
    if (!in) throw ramol::DataError("cannot open manifest " + a.from_manifest);
    const auto m = json::parse(in);
    config = ramol::config_from_json(m.at("config"));
    seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    window = m.at("window").get<std::size_t>();
    const auto& ds = m.at("dataset");
    a.data = DataOptions{};
    if (ds.at("kind") == "csv") {
      a.data.data = ds.at("path").get<std::string>();
      a.data.label_col = ds.at("label_column").get<std::string>();
      for (const auto& f : ds.at("features")) a.data.features += f.get<std::string>() + ",";
      for (const auto& l : ds.at("labels")) a.data.labels += l.get<std::string>() + ",";
      a.data.delimiter = ds.at("delimiter").get<std::string>().at(0);
    } else {
      a.data.synthetic = ds.at("path").get<std::string>();
      a.data.stream_seed = ds.at("stream_seed").get<std::uint64_t>();
    }
    const auto expected = ds.at("hash").get<std::string>();
    const auto path = a.data.data.empty() ? a.data.synthetic : a.data.data;
    if (hex64(ramol::file_hash(path)) != expected) {
      throw ramol::DataError("dataset " + path + " does not match the manifest hash");
    }
  } else {
    if (!a.data.given()) throw CLI::RequiredError("--data or --synthetic");
    config = a.hyper.resolve(a.variant);
    seeds = parse_seeds(a.seeds);
    (void)sub;
  }
  if (window == 0) throw ramol::ConfigError("--window must be positive");

  const auto data = load_data(a.data);
  config.validate();

  json manifest = base_manifest("run", data);
  manifest["config"] = ramol::config_to_json(config);
  manifest["seeds"] = seeds;
  manifest["window"] = window;
  RunDirectory dir(a.out, manifest);

  ramol::PrequentialOptions opts;
  opts.window = window;
  std::vector<ramol::RunMetrics> runs;
  if (data.regimes) {
    for (const auto seed : seeds) {
      auto c = config;
      c.seed = seed;
      auto rec = ramol::regret_run(c, data.regimes->schedule, data.stream_seed, 20000, opts);
      const auto prefix = "seed_" + std::to_string(seed);
      write_seed_outputs(dir, prefix, rec.metrics);
      dir.write_json(prefix + "/regret.json", ramol::regret_to_json(rec));
      save_learner_state(dir, prefix, c, data, a.save_params, a.dump_buffer);
      runs.push_back(std::move(rec.metrics));
    }
  } else {
    runs = ramol::run_seeds(config, data.examples, data.num_classes, seeds, opts, a.threads);
    for (const auto& r : runs) {
      const auto prefix = "seed_" + std::to_string(r.config.seed);
      write_seed_outputs(dir, prefix, r);
      save_learner_state(dir, prefix, r.config, data, a.save_params, a.dump_buffer);
    }
  }
  const auto agg = ramol::aggregate(runs);
  dir.write_json("aggregate.json", ramol::aggregate_to_json(agg));
  dir.commit();

  std::printf("%s: final %.4f +- %.4f  avg %.4f +- %.4f over %zu seed(s)\n", std::string(ramol::to_string(config.variant)).c_str(),
              agg.final_mean, agg.final_std, agg.avg_mean, agg.avg_std, agg.runs.size());
  std::printf("wrote %s\n", dir.path().string().c_str());
  return kExitOk;
}

struct AblateArgs {
  DataOptions data;
  HyperOptions hyper;
  std::uint64_t seed = 42;
  std::size_t window = ramol::kDefaultWindow;
  std::string out = "runs";
};

int cmd_ablate(AblateArgs& a) {
  if (!a.data.given()) throw CLI::RequiredError("--data or --synthetic");
  if (a.window == 0) throw ramol::ConfigError("--window must be positive");
  auto base = a.hyper.resolve(std::nullopt);
  const auto data = load_data(a.data);

  json manifest = base_manifest("ablate", data);
  manifest["config"] = ramol::config_to_json(base);
  manifest["seeds"] = {a.seed};
  manifest["window"] = a.window;
  json variants = json::array();
  for (auto c : ramol::ablation_configs(base)) {
    c.seed = a.seed;
    variants.push_back(ramol::config_to_json(c));
  }
  manifest["variants"] = variants;
  RunDirectory dir(a.out, manifest);

  ramol::PrequentialOptions opts;
  opts.window = a.window;
  const auto rows = ramol::ablation_suite(data.examples, data.num_classes, a.seed, base, opts);
  dir.write("ablation.csv", [&](std::ostream& out) { ramol::write_ablation_csv(out, rows); });
  for (const auto& r : rows) dir.write_json("variants/" + r.name + ".json", ramol::metrics_to_json(r.metrics));
  dir.commit();
  ramol::write_ablation_csv(std::cout, rows);
  std::printf("wrote %s\n", dir.path().string().c_str());
  return kExitOk;
}

struct BenchArgs {
  DataOptions data;
  HyperOptions hyper;
  std::string variants = "baseline,ram_naive,ram_gated";
  std::string seeds = "1,2,3";
  std::size_t repeats = 3;
  std::size_t window = ramol::kDefaultWindow;
  std::string out = "runs";
};

int cmd_bench(BenchArgs& a) {
  if (!a.data.given()) throw CLI::RequiredError("--data or --synthetic");
  const auto names = split_list(a.variants);
  if (names.empty() || names.front() != "baseline") {
    throw ramol::ConfigError("--variants must start with baseline (time factors are relative to it)");
  }
  std::vector<std::pair<std::string, ramol::LearnerConfig>> configs;
  for (const auto& n : names) configs.emplace_back(n, a.hyper.resolve(n));
  const auto seeds = parse_seeds(a.seeds);
  if (a.repeats == 0) throw ramol::ConfigError("--repeats must be positive");
  const auto data = load_data(a.data);

  json manifest = base_manifest("bench", data);
  json cfgs = json::array();
  for (const auto& [n, c] : configs) cfgs.push_back(ramol::config_to_json(c));
  manifest["variants"] = cfgs;
  manifest["seeds"] = seeds;
  manifest["repeats"] = a.repeats;
  manifest["window"] = a.window;
  RunDirectory dir(a.out, manifest);

  const auto rows = ramol::bench(configs, data.examples, data.num_classes, seeds, a.repeats, a.window);
  dir.write("bench.csv", [&](std::ostream& out) { ramol::write_bench_csv(out, rows); });
  std::vector<std::pair<std::string, ramol::AggregateMetrics>> aggs;
  for (const auto& r : rows) aggs.emplace_back(r.name, r.aggregate);
  dir.write("accuracy.csv", [&](std::ostream& out) { ramol::write_aggregate_csv(out, aggs); });
  dir.commit();
  ramol::write_bench_csv(std::cout, rows);
  std::printf("wrote %s\n", dir.path().string().c_str());
  return kExitOk;
}

struct GenArgs {
  std::string synthetic;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  const auto file = ramol::load_regime_file(a.synthetic);
  const auto seed = a.seed.value_or(file.seed.value_or(0));
  auto source = ramol::gen_piecewise_stream(file.schedule, seed);
  const fs::path out_path = a.out;
  fs::path sidecar = out_path;
  sidecar += ".regimes.csv";
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());

  std::ofstream csv(out_path);
  std::ofstream side(sidecar);
  if (!csv || !side) throw ramol::DataError("cannot write " + out_path.string());
  for (std::size_t j = 0; j < source.dim(); ++j) csv << 'x' << j << ',';
  csv << "label\n";
  side << "step,regime_index,regime_id,bayes_label\n";
  char buf[40];
  while (auto ex = source.next()) {
    for (Eigen::Index j = 0; j < ex->features.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", ex->features[j]);
      csv << buf;
    }
    csv << ex->label << '\n';
    const auto r = source.regime_at(ex->step);
    side << ex->step << ',' << r << ',' << file.schedule[r].id << ','
         << ramol::bayes_predict(file.schedule[r], ex->features) << '\n';
  }
  std::printf("wrote %zu rows to %s (regimes: %s)\n", source.total_length(), out_path.string().c_str(),
              sidecar.string().c_str());
  return kExitOk;
}

struct TuneArgs {
  DataOptions data;
  HyperOptions hyper;
  std::string variant = "ram_gated";
  std::size_t prefix = 2000;
};

int cmd_tune(TuneArgs& a) {
  if (!a.data.given()) throw CLI::RequiredError("--data or --synthetic");
  const auto base = a.hyper.resolve(a.variant);
  const auto data = load_data(a.data);
  const auto res = ramol::tune_on_prefix(base, data.examples, data.num_classes, a.prefix);
  for (const auto& [c, acc] : res.tried) {
    std::printf("k=%zu alpha=%.2f rho=%.2f beta=%.2f  avg_acc=%.4f\n", c.k, c.alpha, c.rho, c.beta, acc);
  }
  std::cout << "best: " << ramol::config_to_json(res.best).dump() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented online learning: prequential runs, ablations and benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", RAMOL_VERSION);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Prequential run over one or more seeds");
  run.data.add(*run_cmd);
  run.hyper.add(*run_cmd, true);
  run_cmd->add_option("--variant", run.variant, "baseline | ram_naive | ram_gated");
  run_cmd->add_option("--seeds", run.seeds, "Comma-separated model seeds");
  run_cmd->add_option("--window", run.window, "Window for final accuracy and the curve");
  run_cmd->add_option("--out", run.out, "Root output directory");
  run_cmd->add_option("--from-manifest", run.from_manifest, "Re-run exactly what a manifest describes")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--threads", run.threads, "Seeds run concurrently");
  run_cmd->add_flag("--save-params", run.save_params, "Write final parameters per seed");
  run_cmd->add_flag("--dump-buffer", run.dump_buffer, "Write the final memory buffer per seed");

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "The six-way gating ablation under one seed");
  ablate.data.add(*ablate_cmd);
  ablate.hyper.add(*ablate_cmd, false);
  ablate_cmd->add_option("--seed", ablate.seed, "Model seed");
  ablate_cmd->add_option("--window", ablate.window, "Window for final accuracy");
  ablate_cmd->add_option("--out", ablate.out, "Root output directory");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Runtime factors and seed spread per variant");
  bench.data.add(*bench_cmd);
  bench.hyper.add(*bench_cmd, false);
  bench_cmd->add_option("--variants", bench.variants, "Comma-separated variants, baseline first");
  bench_cmd->add_option("--seeds", bench.seeds, "Comma-separated model seeds");
  bench_cmd->add_option("--repeats", bench.repeats, "Timed repetitions; the median is reported");
  bench_cmd->add_option("--window", bench.window, "Window for final accuracy");
  bench_cmd->add_option("--out", bench.out, "Root output directory");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic stream to CSV plus a regime sidecar");
  gen_cmd->add_option("--synthetic", gen.synthetic, "Regime file")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--seed", gen.seed, "Stream seed (default: file seed or 0)");
  gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "Grid search on a stream prefix");
  tune.data.add(*tune_cmd);
  tune.hyper.add(*tune_cmd, false);
  tune_cmd->add_option("--variant", tune.variant, "ram_naive | ram_gated");
  tune_cmd->add_option("--prefix", tune.prefix, "Prefix length in steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run, *run_cmd);
    if (*ablate_cmd) return cmd_ablate(ablate);
    if (*bench_cmd) return cmd_bench(bench);
    if (*gen_cmd) return cmd_gen(gen);
    if (*tune_cmd) return cmd_tune(tune);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ramol::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ramol::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ramol::DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ramol::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
