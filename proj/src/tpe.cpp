#include "bilo/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bilo/error.hpp"

namespace bilo {

LowerBudget LowerBudget::evaluations(std::size_t n) {
  LowerBudget b;
  b.max_evaluations = n;
  return b;
}

LowerBudget LowerBudget::seconds(double s, SteadyClock::time_point start) {
  LowerBudget b;
  b.deadline = start + std::chrono::duration_cast<SteadyClock::duration>(std::chrono::duration<double>(s));
  return b;
}

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double internal_value(const ParamSpec& spec, const ParamValue& v) {
  if (spec.kind == ParamKind::integer) return static_cast<double>(std::get<std::int64_t>(v));
  return spec.to_internal(std::get<double>(v));
}

std::size_t choice_index(const ParamSpec& spec, const ParamValue& v) {
  const auto& s = std::get<std::string>(v);
  auto it = std::find(spec.choices.begin(), spec.choices.end(), s);
  if (it == spec.choices.end()) throw InputError("choice '" + s + "' not in '" + spec.name + "'");
  return static_cast<std::size_t>(it - spec.choices.begin());
}

}  // namespace

double NumericDensity::pdf(double u) const {
  if (u < lower || u > upper) return 0.0;
  if (centers.empty() && prior_weight <= 0.0) return 0.0;
  double s = upper > lower ? prior_weight / (upper - lower) : 0.0;
  for (double c : centers) {
    double z = (u - c) / bandwidth;
    double mass = normal_cdf((upper - c) / bandwidth) - normal_cdf((lower - c) / bandwidth);
    s += kInvSqrt2Pi * std::exp(-0.5 * z * z) / (bandwidth * std::max(mass, 1e-300));
  }
  return s / (static_cast<double>(centers.size()) + prior_weight);
}

double NumericDensity::sample(Rng& rng) const {
  const double n = static_cast<double>(centers.size());
  if (prior_weight > 0.0 && std::uniform_real_distribution<double>(0.0, n + prior_weight)(rng) >= n)
    return std::uniform_real_distribution<double>(lower, upper)(rng);
  std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
  double c = centers[pick(rng)];
  std::normal_distribution<double> noise(c, bandwidth);
  for (int tries = 0; tries < 1000; ++tries) {
    double u = noise(rng);
    if (u >= lower && u <= upper) return u;
  }
  return std::clamp(c, lower, upper);
}

std::size_t CategoricalDensity::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> d(probabilities.begin(), probabilities.end());
  return d(rng);
}

double ParzenDensity::log_pdf(const ConfigSpace& space, const Configuration& config) const {
  double s = 0.0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& spec = space.params()[i];
    const auto& v = config.at(spec.name);
    double p = std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, NumericDensity>)
            return d.pdf(internal_value(spec, v));
          else
            return d.pdf(choice_index(spec, v));
        },
        dims[i]);
    s += std::log(std::max(p, 1e-300));
  }
  return s;
}

Configuration ParzenDensity::sample(const ConfigSpace& space, Rng& rng) const {
  Configuration out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& spec = space.params()[i];
    if (const auto* num = std::get_if<NumericDensity>(&dims[i])) {
      double u = spec.from_internal(num->sample(rng));
      if (spec.kind == ParamKind::integer)
        out.values[spec.name] = static_cast<std::int64_t>(u);
      else
        out.values[spec.name] = u;
    } else {
      out.values[spec.name] = spec.choices[std::get<CategoricalDensity>(dims[i]).sample(rng)];
    }
  }
  return out;
}

std::pair<std::vector<Observation>, std::vector<Observation>> split_observations(const std::vector<Observation>& d,
                                                                                 double gamma) {
  if (d.size() < 2) throw InputError("split_observations needs at least two observations");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must be in (0, 1)");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a].value > d[b].value; });
  auto n_good = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(d.size()) - 1e-12));
  n_good = std::clamp<std::size_t>(n_good, 1, d.size() - 1);
  std::pair<std::vector<Observation>, std::vector<Observation>> out;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_good ? out.first : out.second).push_back(d[order[i]]);
  return out;
}

ParzenDensity fit_density(const ConfigSpace& space, const std::vector<Observation>& obs, const TpeSettings& settings) {
  ParzenDensity density;
  for (const auto& spec : space.params()) {
    if (spec.kind == ParamKind::categorical) {
      CategoricalDensity cat;
      cat.probabilities.assign(spec.choices.size(), settings.laplace_alpha);
      for (const auto& o : obs) cat.probabilities[choice_index(spec, o.config.at(spec.name))] += 1.0;
      double total = static_cast<double>(obs.size()) + settings.laplace_alpha * static_cast<double>(spec.choices.size());
      for (auto& p : cat.probabilities) p /= total;
      density.dims.emplace_back(std::move(cat));
      continue;
    }
    NumericDensity num;
    std::tie(num.lower, num.upper) = spec.internal_range();
    num.prior_weight = settings.prior_weight;
    for (const auto& o : obs) num.centers.push_back(internal_value(spec, o.config.at(spec.name)));
    const double n = static_cast<double>(num.centers.size());
    double sd = 0.0;
    if (num.centers.size() > 1) {
      double mean = std::accumulate(num.centers.begin(), num.centers.end(), 0.0) / n;
      for (double c : num.centers) sd += (c - mean) * (c - mean);
      sd = std::sqrt(sd / (n - 1.0));
    }
    // Scott's rule in one dimension.
    double h = sd * std::pow(n, -0.2);
    // The floor shrinks with the sample size towards bandwidth_floor.
    double range = num.upper - num.lower;
    double floor = std::max(settings.bandwidth_floor, 1.0 / (n + 1.0));
    num.bandwidth = std::max(h, floor * range);
    if (!(num.bandwidth > 0.0)) num.bandwidth = 1e-12;
    density.dims.emplace_back(std::move(num));
  }
  return density;
}

ParzenPair fit_parzen_pair(const ConfigSpace& space, const std::vector<Observation>& d, const TpeSettings& settings) {
  auto [good, bad] = split_observations(d, settings.gamma);
  ParzenPair pair;
  pair.gamma = settings.gamma;
  pair.good = fit_density(space, good, settings);
  pair.bad = fit_density(space, bad, settings);
  return pair;
}

Configuration propose(const ConfigSpace& space, const ParzenPair& pair, std::size_t n_candidates, Rng& rng) {
  if (n_candidates == 0) throw InputError("propose needs at least one candidate");
  Configuration best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_candidates; ++i) {
    auto c = pair.good.sample(space, rng);
    double score = pair.good.log_pdf(space, c) - pair.bad.log_pdf(space, c);
    if (i == 0 || score > best_score) {
      best_score = score;
      best = std::move(c);
    }
  }
  return best;
}

TpeResult run_tpe(const Objective& objective, const ConfigSpace& space, const LowerBudget& budget, Rng& rng,
                  const TpeSettings& settings) {
  if (budget.max_evaluations && *budget.max_evaluations == 0)
    throw BudgetExhaustedError("lower-level budget allows no evaluation");
  auto exhausted = [&](std::size_t done) {
    if (budget.max_evaluations && done >= *budget.max_evaluations) return true;
    if (budget.deadline && SteadyClock::now() >= *budget.deadline) return true;
    return false;
  };

  TpeResult result;
  auto record = [&](Configuration c) {
    double v = objective(c);
    if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
    if (result.history.empty() || v > result.value) {
      result.value = v;
      result.best = c;
    }
    result.history.push_back({std::move(c), v});
  };

  std::size_t n_init = settings.max_init;
  if (budget.max_evaluations)
    n_init = std::min(settings.max_init, std::max<std::size_t>(2, *budget.max_evaluations / 4));
  if (space.empty()) n_init = 1;
  result.n_init = n_init;

  for (auto& c : space_filling_sample(space, n_init, rng)) {
    if (exhausted(result.history.size())) break;
    record(std::move(c));
  }
  if (!space.empty()) {
    while (!exhausted(result.history.size())) {
      Configuration next;
      if (result.history.size() < 2) {
        next = sample_uniform(space, rng);
      } else {
        auto pair = fit_parzen_pair(space, result.history, settings);
        next = propose(space, pair, settings.n_candidates, rng);
      }
      if (exhausted(result.history.size())) break;
      record(std::move(next));
    }
  }
  if (result.history.empty()) throw BudgetExhaustedError("lower-level budget expired before the first evaluation");
  return result;
}

}  // namespace bilo
