#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "bilo/seed.hpp"
#include "bilo/space.hpp"

namespace bilo {

using SteadyClock = std::chrono::steady_clock;

struct Observation {
  Configuration config;
  double value = 0.0;  // higher is better
};

// Either limit may be set; the run stops at whichever is hit first.
struct LowerBudget {
  std::optional<std::size_t> max_evaluations;
  std::optional<SteadyClock::time_point> deadline;

  static LowerBudget evaluations(std::size_t n);
  static LowerBudget seconds(double s, SteadyClock::time_point start = SteadyClock::now());
};

struct TpeSettings {
  double gamma = 0.25;
  std::size_t n_candidates = 24;
  // Space-filling design size: min(max_init, max(2, evaluations / 4)), and
  // max_init itself under a pure time budget.
  std::size_t max_init = 10;
  double laplace_alpha = 1.0;
  // Kernel bandwidth floor as a fraction of the internal range.
  double bandwidth_floor = 0.01;
  // Weight, in kernel units, of a uniform component mixed into every numeric
  // density.
  double prior_weight = 1.0;
};

// Mixture of truncated Gaussians in a dimension's internal coordinate.
struct NumericDensity {
  double lower = 0.0;
  double upper = 1.0;
  double bandwidth = 1.0;
  double prior_weight = 0.0;
  std::vector<double> centers;

  double pdf(double u) const;
  double sample(Rng& rng) const;
};

struct CategoricalDensity {
  std::vector<double> probabilities;

  double pdf(std::size_t index) const { return probabilities[index]; }
  std::size_t sample(Rng& rng) const;
};

using DimensionDensity = std::variant<NumericDensity, CategoricalDensity>;

// Product of independent per-dimension densities over a ConfigSpace.
struct ParzenDensity {
  std::vector<DimensionDensity> dims;

  double log_pdf(const ConfigSpace& space, const Configuration& config) const;
  Configuration sample(const ConfigSpace& space, Rng& rng) const;
};

struct ParzenPair {
  ParzenDensity good;
  ParzenDensity bad;
  double gamma = 0.25;
};

// good = top ceil(gamma * |D|) by value (earlier insertion wins ties), capped
// so that bad keeps at least one observation; bad = the rest.
std::pair<std::vector<Observation>, std::vector<Observation>> split_observations(const std::vector<Observation>& d,
                                                                                 double gamma);

ParzenDensity fit_density(const ConfigSpace& space, const std::vector<Observation>& obs, const TpeSettings& settings);
ParzenPair fit_parzen_pair(const ConfigSpace& space, const std::vector<Observation>& d, const TpeSettings& settings);

// Draws candidates from the good density and returns the one maximizing
// good(x) / bad(x); the first maximum wins.
Configuration propose(const ConfigSpace& space, const ParzenPair& pair, std::size_t n_candidates, Rng& rng);

struct TpeResult {
  Configuration best;
  double value = 0.0;
  std::vector<Observation> history;
  std::size_t n_init = 0;
};

using Objective = std::function<double(const Configuration&)>;

// Space-filling initialization followed by surrogate-guided proposals until
// the budget is spent. Budgets are checked before every objective call; an
// in-flight call is never interrupted. A space without parameters has one
// configuration and is evaluated once. Throws BudgetExhaustedError when not a
// single evaluation fits in the budget.
TpeResult run_tpe(const Objective& objective, const ConfigSpace& space, const LowerBudget& budget, Rng& rng,
                  const TpeSettings& settings = {});

}  // namespace bilo
