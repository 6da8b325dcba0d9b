#include "bilo/tabu.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "bilo/error.hpp"
#include "bilo/seed.hpp"

namespace bilo {

bool TabuList::contains(const Combination& x) const {
  return std::find(entries_.begin(), entries_.end(), x) != entries_.end();
}

bool TabuList::add(const Combination& x) {
  if (contains(x)) return false;
  if (max_len_ && *max_len_ == 0) return false;
  if (max_len_ && entries_.size() >= *max_len_) entries_.erase(entries_.begin());
  entries_.push_back(x);
  return true;
}

const std::pair<const Combination, MemoEntry>* UpperState::best() const {
  const std::pair<const Combination, MemoEntry>* out = nullptr;
  for (const auto& kv : memo) {
    if (out == nullptr || kv.second.value > out->second.value ||
        (kv.second.value == out->second.value && kv.second.order < out->second.order))
      out = &kv;
  }
  return out;
}

BudgetTracker::BudgetTracker(const UpperBudget& upper, const TabuSettings& settings)
    : upper_(upper), settings_(settings) {
  if (!settings.lower_evaluations && !settings.lower_seconds)
    throw ConfigError("a lower-level budget (evaluations or seconds) is required");
  if (settings.lower_evaluations && *settings.lower_evaluations == 0)
    throw ConfigError("lower-level evaluation budget must be positive");
  if (settings.lower_seconds && !(*settings.lower_seconds > 0.0))
    throw ConfigError("lower-level time budget must be positive");
}

bool BudgetTracker::exhausted() const {
  if (upper_.deadline && SteadyClock::now() >= *upper_.deadline) return true;
  if (upper_.max_evaluations && evaluations_ + reserved_ >= *upper_.max_evaluations) return true;
  if (upper_.max_lower_runs && runs_ >= *upper_.max_lower_runs) return true;
  return false;
}

std::optional<BudgetTracker::Reservation> BudgetTracker::reserve() {
  if (exhausted()) return std::nullopt;
  Reservation r;
  r.evaluations = settings_.lower_evaluations;
  if (upper_.max_evaluations) {
    std::size_t left = *upper_.max_evaluations - evaluations_ - reserved_;
    r.evaluations = r.evaluations ? std::min(*r.evaluations, left) : left;
  }
  if (r.evaluations) reserved_ += *r.evaluations;
  ++runs_;
  return r;
}

std::optional<LowerBudget> BudgetTracker::start(const Reservation& r) const {
  auto now = SteadyClock::now();
  if (upper_.deadline && now >= *upper_.deadline) return std::nullopt;
  LowerBudget b;
  b.max_evaluations = r.evaluations;
  if (settings_.lower_seconds)
    b.deadline = LowerBudget::seconds(*settings_.lower_seconds, now).deadline;
  if (upper_.deadline) b.deadline = b.deadline ? std::min(*b.deadline, *upper_.deadline) : *upper_.deadline;
  return b;
}

void BudgetTracker::settle(const Reservation& r, std::size_t used) {
  if (r.evaluations) reserved_ -= *r.evaluations;
  evaluations_ += used;
}

namespace {

struct Job {
  Combination x;
  std::string role;
  BudgetTracker::Reservation reservation;
  std::optional<LowerRun> run;
};

void execute(std::vector<Job>& jobs, const BudgetTracker& budget, const LowerSolver& solver, const Portfolio& portfolio,
             std::uint64_t seed, std::size_t iteration, std::size_t threads) {
  auto one = [&](Job& job) {
    auto lb = budget.start(job.reservation);
    if (!lb) return;
    auto s = derive_seed(seed, "lower", {portfolio.index_of(job.x), iteration});
    try {
      job.run = solver(job.x, *lb, s, job.role);
    } catch (const BudgetExhaustedError&) {
      job.run.reset();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (threads == 1) {
    for (auto& job : jobs) one(job);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) one(jobs[i]);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

CandidateResult search_candidate(const Portfolio& portfolio, UpperState& state, const TabuList& tabu,
                                 BudgetTracker& budget, const LowerSolver& solver, const TabuSettings& settings,
                                 std::uint64_t seed, std::size_t iteration) {
  std::vector<std::pair<Combination, std::string>> candidates{{state.current, "upper-init"}};
  for (auto& n : neighborhood(portfolio, state.current))
    if (!tabu.contains(n)) candidates.emplace_back(std::move(n), "neighbor");

  CandidateResult result;
  std::vector<Job> jobs;
  for (const auto& [x, role] : candidates) {
    if (state.memo.count(x) != 0) continue;
    auto r = budget.reserve();
    if (!r) {
      result.partial = true;
      break;
    }
    jobs.push_back({x, role, *r, std::nullopt});
  }

  execute(jobs, budget, solver, portfolio, seed, iteration, settings.threads);

  for (auto& job : jobs) {
    budget.settle(job.reservation, job.run ? job.run->evaluations : 0);
    if (!job.run) {
      result.partial = true;
      continue;
    }
    state.memo[job.x] = {std::move(job.run->config), job.run->value, state.visits.size()};
    state.visits.push_back(job.x);
    ++result.runs;
  }

  for (const auto& [x, role] : candidates) {
    auto it = state.memo.find(x);
    if (it == state.memo.end()) continue;
    if (!result.valid || it->second.value > result.value) {
      result.valid = true;
      result.combination = x;
      result.config = it->second.config;
      result.value = it->second.value;
    }
  }
  return result;
}

TabuResult run_tabu(const Portfolio& portfolio, const LowerSolver& solver, const UpperBudget& budget, Rng& rng,
                    const TabuSettings& settings) {
  if (portfolio.empty()) throw ConfigError("portfolio has no combinations");
  BudgetTracker tracker(budget, settings);
  const std::uint64_t seed = rng();
  const auto all = portfolio.all_combinations();

  UpperState state;
  state.current = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
  TabuList tabu(settings.max_len);
  TabuResult out;
  std::size_t stagnant = 0;

  for (std::size_t iteration = 0; !tracker.exhausted(); ++iteration) {
    auto c = search_candidate(portfolio, state, tabu, tracker, solver, settings, seed, iteration);
    TabuStep step{state.current, c.combination, c.value, c.runs, c.partial, std::nullopt};
    if (!c.valid) {
      out.steps.push_back(step);
      break;
    }
    stagnant = c.combination == state.current ? stagnant + 1 : 0;
    tabu.add(c.combination);
    state.current = c.combination;
    if (state.memo.size() == all.size() || c.partial) {
      out.steps.push_back(step);
      break;
    }
    if (stagnant >= settings.stagnation_limit) {
      std::vector<Combination> unvisited;
      for (const auto& x : all)
        if (state.memo.count(x) == 0) unvisited.push_back(x);
      state.current = unvisited[std::uniform_int_distribution<std::size_t>(0, unvisited.size() - 1)(rng)];
      step.escape = state.current;
      stagnant = 0;
    }
    out.steps.push_back(std::move(step));
  }

  const auto* best = state.best();
  if (best == nullptr) throw BudgetExhaustedError("upper-level budget expired before any lower-level run completed");
  out.combination = best->first;
  out.config = best->second.config;
  out.value = best->second.value;
  out.lower_runs = state.visits.size();
  out.evaluations = tracker.evaluations();
  out.visits = state.visits;
  out.tabu_list = tabu.entries();
  return out;
}

}  // namespace bilo
