#include "ramol/config.hpp"
#include "ramol/error.hpp"
#include "ramol/eval.hpp"
#include "ramol/learner.hpp"
#include "ramol/memory.hpp"
#include "ramol/model.hpp"
#include "ramol/report.hpp"
#include "ramol/stream.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace ramol;

namespace {

// Round-trips through the JSON forms so Python sees plain dicts.
py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::vector<Example> to_examples(const Matrix& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw DimensionError("X and y have different lengths");
  std::vector<Example> out;
  out.reserve(y.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back({X.row(i).transpose(), y[static_cast<std::size_t>(i)], static_cast<std::size_t>(i)});
  return out;
}

std::size_t infer_classes(const std::vector<int>& y, std::optional<std::size_t> given) {
  if (given) return *given;
  int m = -1;
  for (int v : y) m = std::max(m, v);
  return static_cast<std::size_t>(m + 1);
}

LearnerConfig make_config(const std::string& variant, const py::kwargs& kwargs) {
  LearnerConfig c = default_config(parse_variant(variant));
  for (const auto& [k, v] : kwargs) {
    const auto key = k.cast<std::string>();
    std::string value;
    if (v.is_none()) {
      value = "none";
    } else if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else {
      value = py::str(v).cast<std::string>();
    }
    apply_setting(c, key, value);
  }
  c.validate();
  return c;
}

py::dict outcome_dict(const StepOutcome& o) {
  py::dict d;
  d["prediction"] = o.prediction;
  d["correct"] = o.correct;
  d["loss"] = o.loss;
  d["probs"] = o.probs;
  d["features"] = o.features;
  d["retrieval_attempted"] = o.retrieval_attempted;
  d["n_retrieved"] = o.n_retrieved;
  d["n_after_gates"] = o.n_after_gates;
  d["neighbour_label_matches"] = o.neighbour_label_matches;
  d["pre_gate_label_matches"] = o.pre_gate_label_matches;
  return d;
}

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d = to_py(metrics_to_json(m));
  d["per_step_correct"] = m.per_step_correct;
  d["window_acc_curve"] = m.window_acc_curve;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Online MLP with retrieval-augmented replay: core operations";
  m.attr("__version__") = RAMOL_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // Config ------------------------------------------------------------------
  py::class_<LearnerConfig>(m, "LearnerConfig")
      .def(py::init([](const std::string& variant, const py::kwargs& kw) { return make_config(variant, kw); }),
           py::arg("variant") = "baseline")
      .def("to_dict", [](const LearnerConfig& c) { return to_py(config_to_json(c)); })
      .def_static("from_dict", [](const py::dict& d) { return config_from_json(from_py(d)); })
      .def("set", [](LearnerConfig& c, const std::string& key, const std::string& value) {
        apply_setting(c, key, value);
        c.validate();
      })
      .def_property_readonly("variant", [](const LearnerConfig& c) { return std::string(to_string(c.variant)); })
      .def_readonly("buffer_capacity", &LearnerConfig::buffer_capacity)
      .def_readonly("k", &LearnerConfig::k)
      .def_readonly("horizon", &LearnerConfig::horizon)
      .def_readonly("tau", &LearnerConfig::tau)
      .def_readonly("rho", &LearnerConfig::rho)
      .def_readonly("alpha", &LearnerConfig::alpha)
      .def_readonly("beta", &LearnerConfig::beta)
      .def_readonly("lr", &LearnerConfig::lr)
      .def_readonly("hidden_dim", &LearnerConfig::hidden_dim)
      .def_readonly("seed", &LearnerConfig::seed)
      .def_readonly("clip", &LearnerConfig::clip)
      .def("__eq__", [](const LearnerConfig& a, const LearnerConfig& b) { return a == b; })
      .def("__repr__", [](const LearnerConfig& c) { return "LearnerConfig(" + config_to_json(c).dump() + ")"; });

  // Stream ------------------------------------------------------------------
  m.def(
      "standardize_stream",
      [](const Matrix& X) {
        auto s = StandardizerState::empty(static_cast<std::size_t>(X.cols()));
        Matrix out(X.rows(), X.cols());
        for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = standardize(s, X.row(i).transpose()).transpose();
        return out;
      },
      py::arg("X"), "Past-only standardization of every row of X.");

  m.def(
      "read_csv",
      [](const std::filesystem::path& path, const std::string& label_column, const std::vector<std::string>& features,
         const std::vector<std::string>& labels, char delimiter) {
        CsvSchema schema{features, label_column, delimiter, labels};
        auto src = open_csv_stream(path, schema);
        const auto xs = materialize(src);
        Matrix X(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(src.dim()));
        std::vector<int> y;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          X.row(static_cast<Eigen::Index>(i)) = xs[i].features.transpose();
          y.push_back(xs[i].label);
        }
        return py::make_tuple(X, y, src.label_names());
      },
      py::arg("path"), py::arg("label_column") = "", py::arg("features") = std::vector<std::string>{},
      py::arg("labels") = std::vector<std::string>{}, py::arg("delimiter") = ',',
      "Reads a CSV stream; returns (X, y, label_names).");

  m.def(
      "generate",
      [](const std::filesystem::path& regimes, std::optional<std::uint64_t> seed) {
        const auto file = load_regime_file(regimes);
        auto src = gen_piecewise_stream(file.schedule, seed.value_or(file.seed.value_or(0)));
        const auto xs = materialize(src);
        Matrix X(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(src.dim()));
        std::vector<int> y, regime, bayes;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          X.row(static_cast<Eigen::Index>(i)) = xs[i].features.transpose();
          y.push_back(xs[i].label);
          const auto r = src.regime_at(i);
          regime.push_back(static_cast<int>(r));
          bayes.push_back(bayes_predict(file.schedule[r], xs[i].features));
        }
        return py::make_tuple(X, y, regime, bayes);
      },
      py::arg("regimes"), py::arg("seed") = py::none(),
      "Samples a regime file; returns (X, y, regime_index, bayes_label).");

  m.def(
      "drift_budget",
      [](const std::filesystem::path& regimes, std::size_t samples) {
        return drift_budget(load_regime_file(regimes).schedule, samples);
      },
      py::arg("regimes"), py::arg("samples") = 20000);

  // Model -------------------------------------------------------------------
  py::class_<MlpParams>(m, "MlpParams")
      .def_readwrite("W1", &MlpParams::W1)
      .def_readwrite("b1", &MlpParams::b1)
      .def_readwrite("W2", &MlpParams::W2)
      .def_readwrite("b2", &MlpParams::b2)
      .def("to_dict", [](const MlpParams& p) { return to_py(params_to_json(p)); })
      .def_static("from_dict", [](const py::dict& d) { return params_from_json(from_py(d)); })
      .def("__eq__", [](const MlpParams& a, const MlpParams& b) { return a == b; });

  m.def(
      "init_params",
      [](std::size_t d, std::size_t hidden, std::size_t classes, std::uint64_t seed, const std::string& act) {
        return init_params(d, hidden, classes, seed, parse_activation(act));
      },
      py::arg("d"), py::arg("hidden_dim"), py::arg("num_classes"), py::arg("seed"), py::arg("activation") = "relu");

  m.def(
      "forward",
      [](const MlpParams& p, const Vector& x) {
        const auto r = forward(p, x);
        return py::dict(py::arg("h") = r.h, py::arg("logits") = r.logits, py::arg("probs") = r.probs);
      },
      py::arg("params"), py::arg("x"));
  m.def("softmax", &softmax, py::arg("logits"));
  m.def("cross_entropy", &cross_entropy, py::arg("probs"), py::arg("y"));

  m.def(
      "weighted_grad",
      [](const MlpParams& p, const Matrix& X, const std::vector<int>& y, const std::vector<double>& w) {
        if (static_cast<std::size_t>(X.rows()) != y.size() || y.size() != w.size()) {
          throw DimensionError("X, y and weights must have the same length");
        }
        std::vector<WeightedExample> batch;
        for (std::size_t i = 0; i < y.size(); ++i) batch.push_back({X.row(static_cast<Eigen::Index>(i)).transpose(), y[i], w[i]});
        const auto g = weighted_grad(p, batch);
        return py::dict(py::arg("W1") = g.W1, py::arg("b1") = g.b1, py::arg("W2") = g.W2, py::arg("b2") = g.b2);
      },
      py::arg("params"), py::arg("X"), py::arg("y"), py::arg("weights"));

  // Memory ------------------------------------------------------------------
  py::class_<Buffer>(m, "Buffer")
      .def(py::init<std::size_t, std::size_t, std::size_t>(), py::arg("capacity"), py::arg("feature_dim"),
           py::arg("embedding_dim"))
      .def(
          "insert",
          [](Buffer& b, const Vector& x, int y, const Vector& h, std::size_t t) { b.insert(MemoryEntry{x, y, h, t}); },
          py::arg("x"), py::arg("y"), py::arg("h"), py::arg("t"))
      .def("__len__", &Buffer::size)
      .def_property_readonly("capacity", &Buffer::capacity)
      .def("steps", [](const Buffer& b) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < b.size(); ++i) out.push_back(b.step_at(i));
        return out;
      })
      .def(
          "retrieve",
          [](const Buffer& b, const Vector& q, std::size_t t_now, std::size_t k, std::optional<std::size_t> horizon,
             std::optional<double> tau, double rho) {
            auto ns = b.retrieve(q, t_now, k, horizon);
            if (tau && !ns.empty()) ns = similarity_gate(similarity_weights(std::move(ns), *tau), rho);
            py::list out;
            for (const auto& n : ns.items) {
              out.append(py::dict(py::arg("t") = n.entry.t, py::arg("y") = n.entry.y, py::arg("d") = n.d,
                                  py::arg("w") = n.w));
            }
            return out;
          },
          py::arg("query"), py::arg("t_now"), py::arg("k"), py::arg("horizon") = py::none(),
          py::arg("tau") = py::none(), py::arg("rho") = 0.0,
          "K nearest entries; with tau set, similarity weights and the gate are applied.");

  // Learner -----------------------------------------------------------------
  py::class_<Learner>(m, "Learner")
      .def(py::init<LearnerConfig, std::size_t, std::size_t>(), py::arg("config"), py::arg("dim"),
           py::arg("num_classes"))
      .def(
          "step",
          [](Learner& l, const Vector& x, int y) {
            return outcome_dict(l.step(Example{x, y, l.steps()}));
          },
          py::arg("x"), py::arg("y"))
      .def_property_readonly("params", &Learner::params)
      .def_property_readonly("steps", &Learner::steps)
      .def_property_readonly("buffer_size", [](const Learner& l) { return l.buffer().size(); })
      .def_property_readonly("config", &Learner::config);

  // Evaluation --------------------------------------------------------------
  m.def(
      "prequential_run",
      [](const LearnerConfig& c, const Matrix& X, const std::vector<int>& y, std::optional<std::size_t> classes,
         std::size_t window) {
        const auto xs = to_examples(X, y);
        PrequentialOptions opt;
        opt.window = window;
        RunMetrics r;
        {
          py::gil_scoped_release release;
          r = prequential_run(c, xs, infer_classes(y, classes), opt);
        }
        return metrics_dict(r);
      },
      py::arg("config"), py::arg("X"), py::arg("y"), py::arg("num_classes") = py::none(),
      py::arg("window") = kDefaultWindow);

  m.def(
      "run_seeds",
      [](const LearnerConfig& c, const Matrix& X, const std::vector<int>& y, const std::vector<std::uint64_t>& seeds,
         std::optional<std::size_t> classes, std::size_t window, std::size_t threads) {
        const auto xs = to_examples(X, y);
        PrequentialOptions opt;
        opt.window = window;
        AggregateMetrics agg;
        {
          py::gil_scoped_release release;
          agg = aggregate(run_seeds(c, xs, infer_classes(y, classes), seeds, opt, threads));
        }
        return to_py(aggregate_to_json(agg));
      },
      py::arg("config"), py::arg("X"), py::arg("y"), py::arg("seeds"), py::arg("num_classes") = py::none(),
      py::arg("window") = kDefaultWindow, py::arg("threads") = 1,
      "Runs one learner per seed and returns the aggregate.");

  m.def(
      "ablation_suite",
      [](const Matrix& X, const std::vector<int>& y, std::uint64_t seed, std::optional<std::size_t> classes) {
        const auto xs = to_examples(X, y);
        const auto rows = ablation_suite(xs, infer_classes(y, classes), seed);
        std::ostringstream csv;
        write_ablation_csv(csv, rows);
        return csv.str();
      },
      py::arg("X"), py::arg("y"), py::arg("seed") = 42, py::arg("num_classes") = py::none(),
      "Six-row ablation table as CSV text.");

  m.def(
      "regret_run",
      [](const LearnerConfig& c, const std::filesystem::path& regimes, std::optional<std::uint64_t> seed,
         std::size_t drift_samples) {
        const auto file = load_regime_file(regimes);
        const auto r = regret_run(c, file.schedule, seed.value_or(file.seed.value_or(0)), drift_samples);
        py::dict d = to_py(regret_to_json(r));
        d["cumulative_regret"] = r.cumulative_regret;
        return d;
      },
      py::arg("config"), py::arg("regimes"), py::arg("seed") = py::none(), py::arg("drift_samples") = 20000);
}
