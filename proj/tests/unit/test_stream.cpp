#include "doctest.h"
#include "support/oracles.hpp"

#include "ramol/error.hpp"
#include "ramol/stream.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ramol;
using oracle::vec;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "ramol_unit";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("standardize: first output is x / sqrt(eps)") {
  auto s = StandardizerState::empty(2);
  const Vector out = standardize(s, vec({3.0, -1.0}));
  CHECK(out(0) == doctest::Approx(3.0 / std::sqrt(1e-8)));
  CHECK(out(1) == doctest::Approx(-1.0 / std::sqrt(1e-8)));
  CHECK(s.count == 1);
}

TEST_CASE("standardize: stream {0, 2} gives (2 - 0) / sqrt(0 + eps) second") {
  auto s = StandardizerState::empty(1);
  standardize(s, vec({0.0}));
  const Vector out = standardize(s, vec({2.0}));
  CHECK(out(0) == doctest::Approx(2.0 / std::sqrt(1e-8)));
}

TEST_CASE("standardize: constant stream is zero from the second step on") {
  // Welford by hand: after x=5 once, mean=5, M2=0; each further 5 leaves both.
  auto s = StandardizerState::empty(1);
  standardize(s, vec({5.0}));
  for (int i = 0; i < 3; ++i) {
    const Vector out = standardize(s, vec({5.0}));
    CHECK(out(0) == 0.0);
  }
  CHECK(s.mean(0) == 5.0);
  CHECK(s.sum_sq_dev(0) == 0.0);
}

TEST_CASE("standardize: matches the longhand mean/variance recomputation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(2.0, 3.0);
  oracle::LonghandStandardizer ref;
  auto s = StandardizerState::empty(3);
  for (int t = 0; t < 60; ++t) {
    std::vector<double> raw{g(rng), g(rng), 100.0 + g(rng)};
    const auto want = ref.push(raw);
    const Vector got = standardize(s, vec({raw[0], raw[1], raw[2]}));
    for (int j = 0; j < 3; ++j) CHECK(got(j) == doctest::Approx(want[j]).epsilon(1e-9));
  }
}

TEST_CASE("standardize: value overload leaves the input state untouched") {
  auto s = StandardizerState::empty(1);
  standardize(s, vec({1.0}));
  const auto [out, next] = standardize(static_cast<const StandardizerState&>(s), vec({3.0}));
  CHECK(s.count == 1);
  CHECK(next.count == 2);
  CHECK(next.mean(0) == doctest::Approx(2.0));
  CHECK(out(0) == doctest::Approx(2.0 / std::sqrt(1e-8)));
}

TEST_CASE("standardize: dimension mismatch throws") {
  auto s = StandardizerState::empty(2);
  CHECK_THROWS_AS(standardize(s, vec({1.0})), DimensionError);
}

TEST_CASE("csv: three rows give steps 0, 1, 2") {
  const auto p = write_temp("three.csv", "a,b,label\n1,2,0\n3,4,1\n5,6,0\n");
  auto src = open_csv_stream(p);
  const auto xs = materialize(src);
  REQUIRE(xs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(xs[i].step == i);
  CHECK(src.dim() == 2);
  CHECK(src.num_classes() == 2);
  CHECK(xs[1].features(0) == 3.0);
  CHECK(xs[1].label == 1);
}

TEST_CASE("csv: labels map in first-seen order unless given explicitly") {
  const auto p = write_temp("labels.csv", "x,y\n1,UP\n2,DOWN\n3,UP\n");
  auto a = open_csv_stream(p);
  CHECK(a.label_names() == std::vector<std::string>{"UP", "DOWN"});
  CHECK(materialize(a)[1].label == 1);

  CsvSchema schema;
  schema.labels = {"DOWN", "UP"};
  auto b = open_csv_stream(p, schema);
  CHECK(materialize(b)[0].label == 1);
}

TEST_CASE("csv: named feature and label columns, custom delimiter") {
  const auto p = write_temp("semi.csv", "cls;f1;skip;f2\nb;1;9;2\na;3;9;4\n");
  CsvSchema schema;
  schema.feature_columns = {"f2", "f1"};
  schema.label_column = "cls";
  schema.delimiter = ';';
  auto src = open_csv_stream(p, schema);
  const auto xs = materialize(src);
  REQUIRE(xs.size() == 2);
  CHECK(xs[0].features(0) == 2.0);
  CHECK(xs[0].features(1) == 1.0);
  CHECK(src.num_classes() == 2);
}

TEST_CASE("csv: text in a feature column names the row") {
  const auto p = write_temp("bad.csv", "a,b,label\n1,2,0\n3,oops,1\n");
  auto src = open_csv_stream(p);
  CHECK(src.next().has_value());
  try {
    src.next();
    FAIL("expected DataError");
  } catch (const DataError& e) {
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 2);
    CHECK(std::string(e.what()).find("oops") != std::string::npos);
  }
}

TEST_CASE("csv: structural errors") {
  CHECK_THROWS_AS(open_csv_stream("/nonexistent/ramol.csv"), DataError);
  const auto ragged = write_temp("ragged.csv", "a,b,label\n1,2,0\n3,1\n");
  CHECK_THROWS_AS([&] {
    auto s = open_csv_stream(ragged);
    materialize(s);
  }(), DataError);
  const auto missing = write_temp("missing.csv", "a,b,label\n1,2,0\n");
  CsvSchema schema;
  schema.label_column = "target";
  CHECK_THROWS_AS(open_csv_stream(missing, schema), DataError);
  CsvSchema vocab;
  vocab.labels = {"0"};
  CHECK_THROWS_AS([&] {
    auto s = open_csv_stream(write_temp("vocab.csv", "a,label\n1,0\n2,1\n"), vocab);
    materialize(s);
  }(), DataError);
}

TEST_CASE("file_hash is stable and content sensitive") {
  const auto a = write_temp("h1.csv", "a,label\n1,0\n");
  const auto b = write_temp("h2.csv", "a,label\n1,1\n");
  CHECK(file_hash(a) == file_hash(a));
  CHECK(file_hash(a) != file_hash(b));
}

// ---------------------------------------------------------------------------

TEST_CASE("piecewise: one regime of length 100 gives 100 examples") {
  const auto g = oracle::two_gaussians(vec({-1.0}), vec({1.0}), 1.0);
  auto src = gen_piecewise_stream({{100, g, "A"}}, 5);
  const auto xs = materialize(src);
  CHECK(xs.size() == 100);
  CHECK(src.total_length() == 100);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(xs[i].step == i);
}

TEST_CASE("piecewise: A, B, A recurs at step 1000 with identical generators") {
  const auto a = oracle::two_gaussians(vec({-2.0, 0.0}), vec({2.0, 0.0}), 1.0);
  const auto b = oracle::two_gaussians(vec({0.0, -2.0}), vec({0.0, 2.0}), 1.0);
  auto src = gen_piecewise_stream({{500, a, "A"}, {500, b, "B"}, {500, a, "A"}}, 1);
  CHECK(src.boundaries() == std::vector<std::size_t>{0, 500, 1000});
  CHECK(src.regimes()[src.regime_at(999)].id == "B");
  CHECK(src.regimes()[src.regime_at(1000)].id == "A");
  CHECK(src.regime_at(0) == 0);
  CHECK(src.regime_at(1499) == 2);
}

TEST_CASE("piecewise: same seed gives bit-identical streams, different seed does not") {
  const auto g = oracle::two_gaussians(vec({-1.0, 1.0}), vec({1.0, -1.0}), 0.5);
  auto s1 = gen_piecewise_stream({{300, g, "A"}}, 9);
  auto s2 = gen_piecewise_stream({{300, g, "A"}}, 9);
  auto s3 = gen_piecewise_stream({{300, g, "A"}}, 10);
  const auto a = materialize(s1), b = materialize(s2), c = materialize(s3);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features == b[i].features);
    CHECK(a[i].label == b[i].label);
    differs = differs || a[i].features != c[i].features;
  }
  CHECK(differs);
}

TEST_CASE("piecewise: sample moments follow the generator") {
  const auto g = oracle::two_gaussians(vec({-3.0}), vec({2.0}), 0.25, 0.3);
  auto src = gen_piecewise_stream({{40000, g, "A"}}, 2);
  double n1 = 0, s0 = 0, s1 = 0;
  std::size_t c0 = 0, c1 = 0;
  while (auto e = src.next()) {
    if (e->label == 0) {
      s0 += e->features(0);
      ++c0;
    } else {
      s1 += e->features(0);
      ++c1;
      ++n1;
    }
  }
  CHECK(n1 / 40000.0 == doctest::Approx(0.7).epsilon(0.02));
  CHECK(s0 / static_cast<double>(c0) == doctest::Approx(-3.0).epsilon(0.01));
  CHECK(s1 / static_cast<double>(c1) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("generator validation") {
  auto g = oracle::two_gaussians(vec({0.0}), vec({1.0}), 1.0);
  g.priors = {0.5, 0.6};
  CHECK_THROWS_AS(g.validate(), ConfigError);
  auto h = oracle::two_gaussians(vec({0.0}), vec({1.0}), 1.0);
  h.classes[1].components[0].mean = vec({1.0, 2.0});
  CHECK_THROWS(h.validate());
  auto v = oracle::two_gaussians(vec({0.0}), vec({1.0}), 1.0);
  v.classes[0].components[0].var = vec({0.0});
  CHECK_THROWS_AS(v.validate(), ConfigError);
  CHECK_THROWS(gen_piecewise_stream({}, 1));
}

// ---------------------------------------------------------------------------

TEST_CASE("bayes_predict: midpoint of symmetric classes goes to class 0") {
  const auto g = oracle::two_gaussians(vec({-1.0, 0.0}), vec({1.0, 0.0}), 1.0);
  CHECK(bayes_predict(g, vec({0.0, 0.0})) == 0);
  CHECK(bayes_predict(g, vec({0.0, 5.0})) == 0);
}

TEST_CASE("bayes_predict: class-1 mean of well-separated classes gives 1") {
  const auto g = oracle::two_gaussians(vec({-5.0, 0.0}), vec({5.0, 0.0}), 1.0);
  CHECK(bayes_predict(g, vec({5.0, 0.0})) == 1);
  RegimeSpec spec{10, g, "A"};
  CHECK(bayes_predict(spec, vec({-5.0, 0.0})) == 0);
}

TEST_CASE("bayes_posterior: agrees with a Monte-Carlo estimate from 1e5 samples") {
  // Mixture class 1 so the posterior is not a plain logistic.
  RegimeGenerator g;
  g.priors = {0.4, 0.6};
  g.classes.push_back({{GaussianComponent{1.0, vec({0.0}), vec({1.0})}}});
  g.classes.push_back({{GaussianComponent{0.5, vec({-1.5}), vec({0.5})}, GaussianComponent{0.5, vec({2.0}), vec({1.0})}}});
  Rng rng(17);
  std::vector<std::pair<double, int>> draws;
  for (int i = 0; i < 100000; ++i) {
    const auto [x, y] = g.sample(rng);
    draws.emplace_back(x(0), y);
  }
  for (double x0 : {-1.8, -0.4, 0.5, 1.7}) {
    double in = 0, ones = 0;
    for (const auto& [x, y] : draws) {
      if (std::abs(x - x0) < 0.05) {
        ++in;
        ones += y;
      }
    }
    const double mc = ones / in;
    const Vector post = bayes_posterior(g, vec({x0}));
    CHECK(post.sum() == doctest::Approx(1.0));
    CHECK(std::abs(post(1) - mc) < 4.0 * std::sqrt(mc * (1 - mc) / in) + 0.01);
    if (std::abs(mc - 0.5) > 0.1) CHECK(bayes_predict(g, vec({x0})) == (mc > 0.5 ? 1 : 0));
  }
}

TEST_CASE("bayes_predict: invariant under a common monotone rescaling of the class densities") {
  // Oracle: direct densities, pushed through f(u) = 2.5 * log(u) + 3, argmax
  // with lowest-index ties. Any strictly monotone f must give the same class.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0), pv(0.2, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    RegimeGenerator g;
    g.priors = {0.2, 0.5, 0.3};
    for (int c = 0; c < 3; ++c) {
      g.classes.push_back({{GaussianComponent{1.0, vec({u(rng)}), vec({pv(rng)})},
                            GaussianComponent{2.0, vec({u(rng)}), vec({pv(rng)})}}});
    }
    const double x = 1.5 * u(rng);
    int best = 0;
    double best_score = -INFINITY;
    for (std::size_t c = 0; c < 3; ++c) {
      const double score = 2.5 * std::log(oracle::joint_density_1d(g, x, c)) + 3.0;
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(c);
      }
    }
    CHECK(bayes_predict(g, vec({x})) == best);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("tv_distance: matches grid integration in one dimension") {
  const auto p = oracle::two_gaussians(vec({-1.0}), vec({1.0}), 1.0);
  const auto q = oracle::two_gaussians(vec({0.0}), vec({2.5}), 0.5, 0.3);
  const double grid = oracle::tv_grid_1d(p, q, -15.0, 15.0);
  const double mc = tv_distance(p, q, 200000, 99);
  CHECK(mc == doctest::Approx(grid).epsilon(0.02));
}

TEST_CASE("drift_budget: stationary and identical regimes are zero") {
  const auto a = oracle::two_gaussians(vec({-1.0}), vec({1.0}), 1.0);
  CHECK(drift_budget({{100, a, "A"}}, 1000) == 0.0);
  CHECK(drift_budget({{100, a, "A"}, {100, a, "A"}}, 5000) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("drift_budget: disjoint supports give one per boundary") {
  const auto a = oracle::two_gaussians(vec({-100.0}), vec({-90.0}), 1.0);
  const auto b = oracle::two_gaussians(vec({90.0}), vec({100.0}), 1.0);
  const double grid = oracle::tv_grid_1d(a, b, -130.0, 130.0, 400000);
  CHECK(grid == doctest::Approx(1.0).epsilon(1e-6));
  const double v = drift_budget({{10, a, "A"}, {10, b, "B"}, {10, a, "A"}}, 20000);
  CHECK(v == doctest::Approx(2.0).epsilon(0.025));
}

TEST_CASE("drift_budget: additive over concatenation") {
  const auto a = oracle::two_gaussians(vec({-1.0}), vec({1.0}), 1.0);
  const auto b = oracle::two_gaussians(vec({0.0}), vec({1.0}), 1.0);
  const auto c = oracle::two_gaussians(vec({1.0}), vec({3.0}), 2.0);
  const double ab = drift_budget({{5, a, "A"}, {5, b, "B"}}, 4000);
  const double bc = drift_budget({{5, b, "B"}, {5, c, "C"}}, 4000);
  const double abc = drift_budget({{5, a, "A"}, {5, b, "B"}, {5, c, "C"}}, 4000);
  CHECK(abc == doctest::Approx(ab + bc).epsilon(1e-12));
}

// ---------------------------------------------------------------------------

TEST_CASE("regime file: parses generators, schedule and seed") {
  std::istringstream in(R"(# two regimes
seed = 7
[regime A]
priors = 0.5 0.5
component = 0 | 1 | -2 0 | 1 1
component = 1 | 1 | 2 0 | 1 1
[regime B]
priors = 0.25 0.75
component = 0 | 0.5 | 0 -2 | 1 1
component = 0 | 0.5 | 0 -4 | 1 1
component = 1 | 1 | 0 2 | 0.5 0.5
schedule = A 500, B 300, A 200
)");
  const auto f = parse_regime_file(in);
  REQUIRE(f.seed.has_value());
  CHECK(*f.seed == 7);
  REQUIRE(f.schedule.size() == 3);
  CHECK(f.schedule[0].id == "A");
  CHECK(f.schedule[1].length == 300);
  CHECK(f.schedule[1].generator.classes[0].components.size() == 2);
  CHECK(f.schedule[1].generator.priors[1] == 0.75);
  CHECK(f.schedule[2].generator.classes[1].components[0].mean(0) == 2.0);
}

TEST_CASE("regime file: errors") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_regime_file(in);
  };
  CHECK_THROWS_AS(parse("[regime A]\npriors = 1\ncomponent = 0 | 1 | 0 | 1\nschedule = B 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("[regime A]\npriors = 1\ncomponent = 0 | 1 | 0 | 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[regime A]\npriors = 1\ncomponent = 0 | 1 | 0\nschedule = A 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("bogus line\n"), ConfigError);
  CHECK_THROWS_AS(load_regime_file("/nonexistent/file.regimes"), DataError);
}
