#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bilo/error.hpp"
#include "bilo/tpe.hpp"

using namespace bilo;

namespace {

std::vector<Observation> observations(const std::vector<double>& values) {
  std::vector<Observation> d;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Observation o;
    o.config.values["i"] = static_cast<std::int64_t>(i);
    o.value = values[i];
    d.push_back(o);
  }
  return d;
}

ConfigSpace unit_real() {
  ConfigSpace s;
  s.add(ParamSpec::real("x", 0.0, 1.0));
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One real and one categorical whose optimum location depends on the category.
double mixed_objective(const Configuration& c) {
  static const std::map<std::string, std::pair<double, double>> optima = {
      {"a", {0.2, 0.0}}, {"b", {0.7, 0.3}}, {"c", {0.5, -0.2}}, {"d", {0.9, 0.1}}};
  auto [center, offset] = optima.at(c.get_choice("m"));
  double x = c.get_real("x");
  return offset - 4.0 * (x - center) * (x - center);
}

ConfigSpace mixed_space() {
  ConfigSpace s;
  s.add(ParamSpec::real("x", 0.0, 1.0));
  s.add(ParamSpec::categorical("m", {"a", "b", "c", "d"}));
  return s;
}

}  // namespace

TEST_CASE("split_observations sizes") {
  auto [g8, b8] = split_observations(observations({1, 2, 3, 4, 5, 6, 7, 8}), 0.25);
  CHECK(g8.size() == 2);
  CHECK(b8.size() == 6);
  CHECK(g8[0].value == 8);
  CHECK(g8[1].value == 7);
  auto [g3, b3] = split_observations(observations({1, 2, 3}), 0.25);
  CHECK(g3.size() == 1);
  auto [g, b] = split_observations(observations({5, 1, 9}), 0.34);
  REQUIRE(g.size() == 2);
  CHECK(g[0].value == 9);
  CHECK(g[1].value == 5);
  CHECK(b.size() == 1);
  CHECK(b[0].value == 1);
}

TEST_CASE("split_observations ties, partition and errors") {
  auto d = observations({3, 3, 3, 1});
  auto [g, b] = split_observations(d, 0.5);
  REQUIRE(g.size() == 2);
  CHECK(g[0].config.get_int("i") == 0);
  CHECK(g[1].config.get_int("i") == 1);
  CHECK(g.size() + b.size() == d.size());
  auto [g2, b2] = split_observations(observations({1, 2}), 0.99);
  CHECK(g2.size() == 1);
  CHECK(b2.size() == 1);
  CHECK_THROWS_AS(split_observations(observations({1}), 0.25), InputError);
  CHECK_THROWS_AS(split_observations(observations({1, 2}), 1.0), InputError);
}

TEST_CASE("numeric densities integrate to one") {
  ConfigSpace s;
  s.add(ParamSpec::real("x", -2.0, 3.0));
  s.add(ParamSpec::integer("k", 1, 9));
  s.add(ParamSpec::real("tol", 1e-6, 0.1));
  Rng rng(1);
  std::vector<Observation> obs;
  for (int i = 0; i < 7; ++i) obs.push_back({sample_uniform(s, rng), 0.0});
  obs.push_back(obs.front());
  auto dens = fit_density(s, obs, {});
  for (const auto& dim : dens.dims) {
    const auto& nd = std::get<NumericDensity>(dim);
    const int n = 200000;
    std::uniform_real_distribution<double> u(nd.lower, nd.upper);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += nd.pdf(u(rng));
    double integral = sum / n * (nd.upper - nd.lower);
    CHECK(std::abs(integral - 1.0) < 0.02);
  }
}

TEST_CASE("categorical densities are Laplace-smoothed and sum to one") {
  ConfigSpace s;
  s.add(ParamSpec::categorical("m", {"a", "b"}));
  std::vector<Observation> good, bad;
  for (int i = 0; i < 9; ++i) good.push_back({Configuration{{{"m", std::string("a")}}}, 1.0});
  good.push_back({Configuration{{{"m", std::string("b")}}}, 1.0});
  for (int i = 0; i < 9; ++i) bad.push_back({Configuration{{{"m", std::string("b")}}}, 0.0});
  bad.push_back({Configuration{{{"m", std::string("a")}}}, 0.0});
  ParzenPair pair{fit_density(s, good, {}), fit_density(s, bad, {}), 0.25};
  const auto& pg = std::get<CategoricalDensity>(pair.good.dims[0]).probabilities;
  CHECK(pg[0] == doctest::Approx(10.0 / 12.0));
  CHECK(pg[1] == doctest::Approx(2.0 / 12.0));
  CHECK(std::abs(pg[0] + pg[1] - 1.0) < 1e-6);

  Rng rng(3);
  int a = 0;
  for (int rep = 0; rep < 1000; ++rep) a += propose(s, pair, 1, rng).get_choice("m") == "a";
  CHECK(a > 800);
}

TEST_CASE("propose prefers the higher density ratio") {
  ConfigSpace s = unit_real();
  std::vector<Observation> good, bad;
  for (double v : {0.1, 0.12, 0.15, 0.18}) good.push_back({Configuration{{{"x", v}}}, 1.0});
  for (double v : {0.8, 0.85, 0.9, 0.95}) bad.push_back({Configuration{{{"x", v}}}, 0.0});
  ParzenPair pair{fit_density(s, good, {}), fit_density(s, bad, {}), 0.25};
  Rng rng(4);
  for (int i = 0; i < 50; ++i) CHECK(propose(s, pair, 24, rng).get_real("x") < 0.5);

  Configuration ca{{{"x", 0.14}}}, cb{{{"x", 0.9}}};
  double ra = pair.good.log_pdf(s, ca) - pair.bad.log_pdf(s, ca);
  double rb = pair.good.log_pdf(s, cb) - pair.bad.log_pdf(s, cb);
  CHECK(ra > rb);
}

TEST_CASE("identical densities pick candidates uniformly") {
  ConfigSpace s;
  s.add(ParamSpec::categorical("m", {"a", "b", "c", "d"}));
  std::vector<Observation> obs;
  for (auto c : {"a", "b", "c", "d"}) obs.push_back({Configuration{{{"m", std::string(c)}}}, 0.0});
  auto d = fit_density(s, obs, {});
  ParzenPair pair{d, d, 0.25};
  Rng rng(5);
  std::map<std::string, int> counts;
  for (int i = 0; i < 4000; ++i) counts[propose(s, pair, 8, rng).get_choice("m")]++;
  REQUIRE(counts.size() == 4);
  for (auto& kv : counts) CHECK(std::abs(kv.second - 1000) < 120);
}

TEST_CASE("run_tpe finds the quadratic optimum against a grid oracle") {
  auto s = unit_real();
  auto f = [](const Configuration& c) {
    double x = c.get_real("x");
    return -(x - 0.3) * (x - 0.3);
  };
  double grid_best = -1e9, grid_x = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    double x = i / 10000.0;
    double v = -(x - 0.3) * (x - 0.3);
    if (v > grid_best) {
      grid_best = v;
      grid_x = x;
    }
  }
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto r = run_tpe(f, s, LowerBudget::evaluations(50), rng);
    hits += std::abs(r.best.get_real("x") - grid_x) <= 0.05;
    CHECK(r.value <= grid_best + 1e-12);
  }
  CHECK(hits >= 18);
}

TEST_CASE("call count, argmax consistency and validity") {
  auto s = mixed_space();
  s.add(ParamSpec::integer("k", 1, 30));
  s.add(ParamSpec::real("tol", 1e-6, 0.1));
  for (std::size_t budget : {1, 2, 3, 7, 10, 41, 60}) {
    std::size_t calls = 0;
    double best = -1e300;
    auto f = [&](const Configuration& c) {
      ++calls;
      CHECK(validate_config(s, c));
      double v = mixed_objective(c) - 0.001 * c.get_int("k") + std::log10(c.get_real("tol")) * 0.01;
      best = std::max(best, v);
      return v;
    };
    Rng rng(budget);
    auto r = run_tpe(f, s, LowerBudget::evaluations(budget), rng);
    CHECK(calls == budget);
    CHECK(r.history.size() == budget);
    CHECK(r.value == best);
    CHECK(r.n_init == std::min<std::size_t>(10, std::max<std::size_t>(2, budget / 4)));
  }
}

TEST_CASE("budget of one returns the first space-filling sample") {
  auto s = unit_real();
  Rng a(9), b(9);
  auto r = run_tpe([](const Configuration& c) { return c.get_real("x"); }, s, LowerBudget::evaluations(1), a);
  auto init = space_filling_sample(s, 2, b);
  CHECK(r.best == init[0]);
  CHECK(r.value == init[0].get_real("x"));
}

TEST_CASE("constant objective and empty space") {
  auto s = mixed_space();
  Rng rng(2);
  auto r = run_tpe([](const Configuration&) { return 0.42; }, s, LowerBudget::evaluations(15), rng);
  CHECK(r.value == 0.42);
  CHECK(validate_config(s, r.best));
  int calls = 0;
  auto e = run_tpe([&](const Configuration&) { return ++calls; }, ConfigSpace{}, LowerBudget::evaluations(5), rng);
  CHECK(calls == 1);
  CHECK(e.value == 1.0);
}

TEST_CASE("exhausted budgets") {
  auto s = unit_real();
  Rng rng(1);
  auto f = [](const Configuration&) { return 0.0; };
  CHECK_THROWS_AS(run_tpe(f, s, LowerBudget::evaluations(0), rng), BudgetExhaustedError);
  auto past = LowerBudget::seconds(0.0, SteadyClock::now() - std::chrono::seconds(1));
  CHECK_THROWS_AS(run_tpe(f, s, past, rng), BudgetExhaustedError);
}

TEST_CASE("time budgets stop close to the deadline") {
  auto s = unit_real();
  Rng rng(1);
  auto start = SteadyClock::now();
  auto r = run_tpe([](const Configuration& c) { return -c.get_real("x"); }, s, LowerBudget::seconds(0.2, start), rng);
  double took = std::chrono::duration<double>(SteadyClock::now() - start).count();
  CHECK(took < 0.5);
  CHECK(r.history.size() > 10);
}

TEST_CASE("TPE beats random search on a mixed problem") {
  auto s = mixed_space();
  std::vector<double> tpe_best, random_best;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed + 1000);
    tpe_best.push_back(run_tpe(mixed_objective, s, LowerBudget::evaluations(40), a).value);
    double best = -1e300;
    for (int i = 0; i < 40; ++i) best = std::max(best, mixed_objective(sample_uniform(s, b)));
    random_best.push_back(best);
  }
  CHECK(median(tpe_best) >= median(random_best));
}

TEST_CASE("run_tpe is reproducible") {
  auto s = mixed_space();
  Rng a(31), b(31);
  auto r1 = run_tpe(mixed_objective, s, LowerBudget::evaluations(30), a);
  auto r2 = run_tpe(mixed_objective, s, LowerBudget::evaluations(30), b);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) CHECK(r1.history[i].config == r2.history[i].config);
}
