#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bilo/space.hpp"
#include "bilo/tpe.hpp"

namespace bilo {

// Insertion-ordered set of combinations; the oldest entry is evicted first
// once max_len is reached.
class TabuList {
 public:
  explicit TabuList(std::optional<std::size_t> max_len = std::nullopt) : max_len_(max_len) {}

  bool contains(const Combination& x) const;
  // Returns false when x was already present.
  bool add(const Combination& x);
  const std::vector<Combination>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::optional<std::size_t> max_len_;
  std::vector<Combination> entries_;
};

// Outcome of one lower-level optimization of a combination.
struct LowerRun {
  Configuration config;
  double value = 0.0;
  std::size_t evaluations = 0;
};

// Lower routine handed to the upper level. `role` is "upper-init" for the
// current combination and "neighbor" for neighborhood members. Must be safe to
// call concurrently when threads > 1. May throw BudgetExhaustedError.
using LowerSolver =
    std::function<LowerRun(const Combination& x, const LowerBudget& budget, std::uint64_t seed, const std::string& role)>;

// Overall budget of the upper level. Any combination of limits may be set.
struct UpperBudget {
  std::optional<SteadyClock::time_point> deadline;
  std::optional<std::size_t> max_evaluations;  // objective calls across all lower runs
  std::optional<std::size_t> max_lower_runs;
};

struct TabuSettings {
  std::optional<std::size_t> max_len;
  // Per lower run; at least one must be set.
  std::optional<std::size_t> lower_evaluations;
  std::optional<double> lower_seconds;
  std::size_t stagnation_limit = 2;
  std::size_t threads = 1;
};

struct MemoEntry {
  Configuration config;
  double value = 0.0;
  std::size_t order = 0;  // position in the visit sequence
};

struct UpperState {
  Combination current;
  std::map<Combination, MemoEntry> memo;
  std::vector<Combination> visits;  // every combination submitted to the lower level, in order

  // Argmax over the memo; ties go to the earliest visit.
  const std::pair<const Combination, MemoEntry>* best() const;
};

struct CandidateResult {
  Combination combination;
  Configuration config;
  double value = 0.0;
  bool partial = false;   // the budget ran out before the neighborhood was covered
  std::size_t runs = 0;   // lower runs performed in this step
  bool valid = false;     // false when nothing could be evaluated
};

// Budget bookkeeping shared across the steps of one search. Evaluation
// counts are reserved before a run starts so that a batch of runs gets the
// same allotments whether it executes sequentially or in parallel.
class BudgetTracker {
 public:
  struct Reservation {
    std::optional<std::size_t> evaluations;
  };

  BudgetTracker(const UpperBudget& upper, const TabuSettings& settings);

  bool exhausted() const;
  std::optional<Reservation> reserve();
  // The lower budget of a reserved run, with its clock starting now. Returns
  // nullopt when the overall deadline has already passed.
  std::optional<LowerBudget> start(const Reservation& r) const;
  // Releases the reservation after the run made `used` objective calls.
  void settle(const Reservation& r, std::size_t used);
  std::size_t runs() const { return runs_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  UpperBudget upper_;
  TabuSettings settings_;
  std::size_t runs_ = 0;
  std::size_t evaluations_ = 0;
  std::size_t reserved_ = 0;
};

// One step of the upper level: the current combination is handled first
// (memoized value reused when already known), then every non-tabu neighbor in
// canonical order. Only combinations never submitted before trigger a lower
// run; the others compete with their memoized value. The incumbent changes on
// strict improvement only.
CandidateResult search_candidate(const Portfolio& portfolio, UpperState& state, const TabuList& tabu,
                                 BudgetTracker& budget, const LowerSolver& solver, const TabuSettings& settings,
                                 std::uint64_t seed, std::size_t iteration);

struct TabuStep {
  Combination current;
  Combination accepted;
  double value = 0.0;
  std::size_t runs = 0;
  bool partial = false;
  std::optional<Combination> escape;
};

struct TabuResult {
  Combination combination;
  Configuration config;
  double value = 0.0;
  std::size_t lower_runs = 0;
  std::size_t evaluations = 0;
  std::vector<Combination> visits;
  std::vector<Combination> tabu_list;
  std::vector<TabuStep> steps;
};

// Tabu search over the combinations of `portfolio`. Starts from a uniformly
// random combination, accepts the best candidate of every step into the tabu
// list, and jumps to a random unvisited combination after `stagnation_limit`
// consecutive steps without movement. Stops when the budget is spent or every
// combination has been visited. Throws BudgetExhaustedError when no lower run
// completed.
TabuResult run_tabu(const Portfolio& portfolio, const LowerSolver& solver, const UpperBudget& budget, Rng& rng,
                    const TabuSettings& settings = {.lower_evaluations = 100});

}  // namespace bilo
