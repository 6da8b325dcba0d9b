#include "bilo/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>

#include "bilo/error.hpp"
#include "bilo/portfolio_file.hpp"
#include "bilo/seed.hpp"

namespace bilo {

using nlohmann::json;

std::string to_string(LowerMode mode) { return mode == LowerMode::seconds ? "seconds" : "evaluations"; }

std::string to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::bilevel: return "bilevel";
    case SearchMode::single: return "single";
    case SearchMode::bilevel_l: return "bilevel-l";
  }
  return "bilevel";
}

LowerMode parse_lower_mode(const std::string& text) {
  if (text == "seconds") return LowerMode::seconds;
  if (text == "evaluations") return LowerMode::evaluations;
  throw ConfigError("unknown lower-level mode '" + text + "' (expected seconds or evaluations)");
}

SearchMode parse_search_mode(const std::string& text) {
  if (text == "bilevel") return SearchMode::bilevel;
  if (text == "single") return SearchMode::single;
  if (text == "bilevel-l") return SearchMode::bilevel_l;
  throw ConfigError("unknown mode '" + text + "' (expected bilevel, single or bilevel-l)");
}

BudgetConfig BudgetConfig::mode_h(double total_seconds, double lower_seconds) {
  BudgetConfig b;
  b.total_seconds = total_seconds;
  b.lower_mode = LowerMode::seconds;
  b.lower_amount = lower_seconds;
  return b;
}

BudgetConfig BudgetConfig::mode_l(double total_seconds, std::size_t lower_evaluations) {
  BudgetConfig b;
  b.total_seconds = total_seconds;
  b.lower_mode = LowerMode::evaluations;
  b.lower_amount = static_cast<double>(lower_evaluations);
  return b;
}

void BudgetConfig::validate() const {
  if (!(total_seconds > 0.0)) throw ConfigError("total budget must be positive");
  if (!(lower_amount > 0.0)) throw ConfigError("lower-level budget must be positive");
  if (lower_mode == LowerMode::evaluations && lower_amount != std::floor(lower_amount))
    throw ConfigError("lower-level evaluation budget must be a whole number");
  if (total_evaluations && *total_evaluations == 0) throw ConfigError("total evaluation budget must be positive");
}

std::size_t threads_from_env() {
  const char* v = std::getenv("BILOPT_THREADS");
  if (v == nullptr) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

// ---- serialization ----

json to_json(const Configuration& config) {
  json j = json::object();
  for (const auto& [name, value] : config.values) std::visit([&](const auto& v) { j[name] = v; }, value);
  return j;
}

Configuration config_from_json(const json& j) {
  Configuration c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (v.is_number_integer())
      c.values[it.key()] = v.get<std::int64_t>();
    else if (v.is_number_float())
      c.values[it.key()] = v.get<double>();
    else if (v.is_string())
      c.values[it.key()] = v.get<std::string>();
    else
      throw ConfigError("configuration value '" + it.key() + "' has an unsupported type");
  }
  return c;
}

namespace {

json objective_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double objective_from(const json& j) { return j.is_null() ? kFailedObjective : j.get<double>(); }

json combination_json(const Combination& x) { return json{{"transfer", x.transfer_id}, {"classifier", x.classifier_id}}; }
Combination combination_from(const json& j) {
  return {j.at("transfer").get<std::string>(), j.at("classifier").get<std::string>()};
}

}  // namespace

json to_json(const TrialRecord& r) {
  return json{{"type", "trial"},
              {"seq", r.seq},
              {"combination", combination_json(r.combination)},
              {"config", to_json(r.config)},
              {"value", objective_json(r.value)},
              {"failed", r.failed},
              {"single_class", r.single_class},
              {"partial", r.partial},
              {"clamped", r.clamped},
              {"error", r.error},
              {"adapt_seconds", r.adapt_seconds},
              {"train_seconds", r.train_seconds},
              {"score_seconds", r.score_seconds},
              {"started", r.started},
              {"elapsed", r.elapsed},
              {"seed", r.seed},
              {"level", r.level},
              {"lower_run", r.lower_run}};
}

TrialRecord trial_from_json(const json& j) {
  TrialRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.combination = combination_from(j.at("combination"));
  r.config = config_from_json(j.at("config"));
  r.value = objective_from(j.at("value"));
  r.failed = j.value("failed", false);
  r.single_class = j.value("single_class", false);
  r.partial = j.value("partial", false);
  r.clamped = j.value("clamped", std::vector<std::string>{});
  r.error = j.value("error", std::string{});
  r.adapt_seconds = j.value("adapt_seconds", 0.0);
  r.train_seconds = j.value("train_seconds", 0.0);
  r.score_seconds = j.value("score_seconds", 0.0);
  r.started = j.value("started", 0.0);
  r.elapsed = j.value("elapsed", 0.0);
  r.seed = j.at("seed").get<std::uint64_t>();
  r.level = j.value("level", std::string{});
  r.lower_run = j.value("lower_run", std::uint64_t{0});
  return r;
}

json to_json(const LowerRunRecord& r) {
  json j{{"type", "lower_run"},
         {"id", r.id},
         {"combination", combination_json(r.combination)},
         {"role", r.role},
         {"started", r.started},
         {"finished", r.finished},
         {"evaluations", r.evaluations},
         {"best_value", objective_json(r.best_value)}};
  j["budget_seconds"] = r.budget_seconds ? json(*r.budget_seconds) : json(nullptr);
  j["budget_evaluations"] = r.budget_evaluations ? json(*r.budget_evaluations) : json(nullptr);
  return j;
}

LowerRunRecord lower_run_from_json(const json& j) {
  LowerRunRecord r;
  r.id = j.at("id").get<std::uint64_t>();
  r.combination = combination_from(j.at("combination"));
  r.role = j.value("role", std::string{});
  r.started = j.at("started").get<double>();
  r.finished = j.at("finished").get<double>();
  r.evaluations = j.at("evaluations").get<std::size_t>();
  r.best_value = objective_from(j.at("best_value"));
  if (j.contains("budget_seconds") && !j["budget_seconds"].is_null()) r.budget_seconds = j["budget_seconds"].get<double>();
  if (j.contains("budget_evaluations") && !j["budget_evaluations"].is_null())
    r.budget_evaluations = j["budget_evaluations"].get<std::size_t>();
  return r;
}

// ---- trial log ----

TrialLog::TrialLog(const std::filesystem::path& path) : out_(path, std::ios::out | std::ios::trunc) {
  if (!out_) throw ConfigError("cannot open trial log '" + path.string() + "'");
}

void TrialLog::write(const json& j) {
  if (!out_.is_open()) return;
  out_ << j.dump() << '\n';
  out_.flush();
}

std::uint64_t TrialLog::append(TrialRecord record) {
  std::lock_guard lock(mu_);
  record.seq = trials_.size();
  write(to_json(record));
  trials_.push_back(std::move(record));
  return trials_.back().seq;
}

std::uint64_t TrialLog::append(LowerRunRecord record) {
  std::lock_guard lock(mu_);
  write(to_json(record));
  lower_runs_.push_back(std::move(record));
  return lower_runs_.back().id;
}

std::vector<TrialRecord> TrialLog::trials() const {
  std::lock_guard lock(mu_);
  return trials_;
}

std::vector<LowerRunRecord> TrialLog::lower_runs() const {
  std::lock_guard lock(mu_);
  return lower_runs_;
}

std::size_t TrialLog::size() const {
  std::lock_guard lock(mu_);
  return trials_.size();
}

LogContents read_trial_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read trial log '" + path.string() + "'");
  LogContents out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      auto type = j.value("type", std::string{"trial"});
      if (type == "trial")
        out.trials.push_back(trial_from_json(j));
      else if (type == "lower_run")
        out.lower_runs.push_back(lower_run_from_json(j));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---- flattened space ----

ConfigSpace flatten_portfolio(const Portfolio& portfolio) {
  ConfigSpace flat;
  std::vector<std::string> ts, cs;
  for (const auto& t : portfolio.transfers()) ts.push_back(t.id);
  for (const auto& c : portfolio.classifiers()) cs.push_back(c.id);
  flat.add(ParamSpec::categorical("transfer", ts));
  flat.add(ParamSpec::categorical("classifier", cs));
  auto append = [&](const ConfigSpace& space, const std::string& owner) {
    for (auto p : space.params()) {
      p.name = joint_name(owner, p.name);
      flat.add(std::move(p));
    }
  };
  for (const auto& t : portfolio.transfers()) append(t.space, t.id);
  for (const auto& c : portfolio.classifiers()) append(c.space, c.id);
  return flat;
}

std::pair<Combination, Configuration> unflatten(const Portfolio& portfolio, const Configuration& flat) {
  Combination x{flat.get_choice("transfer"), flat.get_choice("classifier")};
  Configuration config;
  const auto space = portfolio.joint_space(x);
  for (const auto& p : space.params()) config.values[p.name] = flat.at(p.name);
  return {x, config};
}

Configuration flatten(const Portfolio& portfolio, const Combination& x, const Configuration& config) {
  Configuration flat;
  const auto space = flatten_portfolio(portfolio);
  for (const auto& p : space.params()) {
    if (p.kind == ParamKind::categorical)
      flat.values[p.name] = p.choices.front();
    else if (p.kind == ParamKind::integer)
      flat.values[p.name] = static_cast<std::int64_t>(p.lower);
    else
      flat.values[p.name] = p.lower;
  }
  flat.values["transfer"] = x.transfer_id;
  flat.values["classifier"] = x.classifier_id;
  for (const auto& [name, value] : config.values) flat.values[name] = value;
  return flat;
}

// ---- search ----

namespace {

double since(SteadyClock::time_point t0, SteadyClock::time_point t = SteadyClock::now()) {
  return std::chrono::duration<double>(t - t0).count();
}

// Evaluates one trial and logs it.
double run_trial(const CombinationEvaluator& evaluator, const Combination& x, const Configuration& config,
                 std::uint64_t seed, const std::string& level, std::uint64_t lower_run, SteadyClock::time_point t0,
                 TrialLog& log) {
  auto start = SteadyClock::now();
  TrialOutcome out = evaluator.evaluate(x, config, seed);
  auto end = SteadyClock::now();
  TrialRecord r;
  r.combination = x;
  r.config = config;
  r.value = out.value;
  r.failed = out.failed;
  r.single_class = out.single_class;
  r.clamped = std::move(out.clamped);
  r.error = std::move(out.error);
  r.adapt_seconds = out.adapt_seconds;
  r.train_seconds = out.train_seconds;
  r.score_seconds = out.score_seconds;
  r.started = since(t0, start);
  r.elapsed = since(start, end);
  r.seed = seed;
  r.level = level;
  r.lower_run = lower_run;
  log.append(std::move(r));
  return out.value;
}

}  // namespace

SearchOutcome search_bilevel(const CombinationEvaluator& evaluator, const Portfolio& portfolio,
                             const EngineSettings& settings, std::uint64_t seed, TrialLog& log) {
  settings.budget.validate();
  const auto t0 = SteadyClock::now();
  UpperBudget upper;
  upper.deadline = LowerBudget::seconds(settings.budget.total_seconds, t0).deadline;
  upper.max_evaluations = settings.budget.total_evaluations;

  TabuSettings ts;
  ts.max_len = settings.tabu_max_len;
  ts.stagnation_limit = settings.stagnation_limit;
  ts.threads = std::max<std::size_t>(1, settings.threads);
  if (settings.budget.lower_mode == LowerMode::seconds)
    ts.lower_seconds = settings.budget.lower_amount;
  else
    ts.lower_evaluations = static_cast<std::size_t>(settings.budget.lower_amount);

  std::atomic<std::uint64_t> next_run{0};
  LowerSolver solver = [&](const Combination& x, const LowerBudget& budget, std::uint64_t run_seed,
                           const std::string& role) {
    const std::uint64_t run_id = next_run++;
    const auto space = portfolio.joint_space(x);
    LowerRunRecord rec;
    rec.id = run_id;
    rec.combination = x;
    rec.role = role;
    rec.started = since(t0);
    if (budget.deadline) rec.budget_seconds = std::chrono::duration<double>(*budget.deadline - SteadyClock::now()).count();
    rec.budget_evaluations = budget.max_evaluations;
    std::uint64_t k = 0;
    Objective objective = [&](const Configuration& c) {
      return run_trial(evaluator, x, c, derive_seed(run_seed, "trial", {k++}), role, run_id, t0, log);
    };
    Rng rng(derive_seed(run_seed, "tpe"));
    auto result = run_tpe(objective, space, budget, rng, settings.tpe);
    rec.finished = since(t0);
    rec.evaluations = result.history.size();
    rec.best_value = result.value;
    log.append(rec);
    return LowerRun{result.best, result.value, result.history.size()};
  };

  Rng rng(derive_seed(seed, "upper"));
  auto tabu = run_tabu(portfolio, solver, upper, rng, ts);
  SearchOutcome out;
  out.combination = tabu.combination;
  out.config = tabu.config;
  out.value = tabu.value;
  out.trials = log.size();
  out.lower_runs = tabu.lower_runs;
  out.elapsed_seconds = since(t0);
  out.visits = tabu.visits;
  out.tabu_list = tabu.tabu_list;
  return out;
}

SearchOutcome search_single_level(const CombinationEvaluator& evaluator, const Portfolio& portfolio,
                                  const EngineSettings& settings, std::uint64_t seed, TrialLog& log) {
  settings.budget.validate();
  const auto t0 = SteadyClock::now();
  const auto space = flatten_portfolio(portfolio);
  LowerBudget budget = LowerBudget::seconds(settings.budget.total_seconds, t0);
  budget.max_evaluations = settings.budget.total_evaluations;

  const std::uint64_t run_seed = derive_seed(seed, "single");
  std::uint64_t k = 0;
  Objective objective = [&](const Configuration& flat) {
    auto [x, config] = unflatten(portfolio, flat);
    return run_trial(evaluator, x, config, derive_seed(run_seed, "trial", {k++}), "single-level", 0, t0, log);
  };
  Rng rng(derive_seed(run_seed, "tpe"));
  auto result = run_tpe(objective, space, budget, rng, settings.tpe);

  LowerRunRecord rec;
  rec.id = 0;
  rec.role = "single-level";
  rec.finished = since(t0);
  rec.evaluations = result.history.size();
  rec.best_value = result.value;
  rec.budget_seconds = settings.budget.total_seconds;
  rec.budget_evaluations = settings.budget.total_evaluations;

  SearchOutcome out;
  std::tie(out.combination, out.config) = unflatten(portfolio, result.best);
  rec.combination = out.combination;
  log.append(rec);
  out.value = result.value;
  out.trials = result.history.size();
  out.lower_runs = 1;
  out.elapsed_seconds = since(t0);
  out.visits = {out.combination};
  return out;
}

// ---- CPDP orchestration ----

json to_json(const ModelRecommendation& r) {
  json j{{"target", r.target},
         {"seed", r.seed},
         {"failed", r.failed},
         {"error", r.error},
         {"total_trials", r.total_trials},
         {"lower_runs", r.lower_runs},
         {"elapsed_seconds", r.elapsed_seconds},
         {"notes", r.notes}};
  if (!r.failed) {
    j["combination"] = combination_json(r.combination);
    j["config"] = to_json(r.config);
    j["training_auc"] = objective_json(r.training_auc);
    j["holdout_auc"] = r.holdout_auc ? json(*r.holdout_auc) : json(nullptr);
    j["holdout_audit"] = json{{"holdout_size", r.audit.holdout_size},
                              {"training_size", r.audit.training_size},
                              {"overlap", r.audit.overlap}};
  }
  return j;
}

ModelRecommendation optimize_cpdp(const std::vector<Project>& projects, const std::string& target,
                                  const Portfolio& portfolio, const CpdpOptions& options, std::uint64_t seed,
                                  TrialLog& log) {
  ModelRecommendation rec;
  rec.target = target;
  rec.seed = seed;
  auto task = CpdpTask::from_projects(projects, target, seed, options.holdout_fraction);
  auto bound = bind_portfolio(portfolio, task_sizes(task), options.bind);
  rec.notes = bound.notes;
  CpdpEvaluator evaluator(task);

  EngineSettings settings = options.settings;
  if (options.mode == SearchMode::bilevel_l && settings.budget.lower_mode != LowerMode::evaluations) {
    settings.budget.lower_mode = LowerMode::evaluations;
    settings.budget.lower_amount = 100;
  }
  SearchOutcome outcome;
  try {
    outcome = options.mode == SearchMode::single ? search_single_level(evaluator, bound.portfolio, settings, seed, log)
                                                 : search_bilevel(evaluator, bound.portfolio, settings, seed, log);
  } catch (const BudgetExhaustedError& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.total_trials = log.size();
    return rec;
  }
  rec.combination = outcome.combination;
  rec.config = outcome.config;
  rec.training_auc = outcome.value;
  rec.total_trials = outcome.trials;
  rec.lower_runs = outcome.lower_runs;
  rec.elapsed_seconds = outcome.elapsed_seconds;

  const auto& split = evaluator.split_for(rec.combination.transfer_id);
  auto v = validate(split.train, split.test, rec.combination, rec.config, derive_seed(seed, "validate"), &rec.audit);
  rec.holdout_auc = v.holdout_auc;
  if (!v.error.empty()) rec.notes.push_back(v.error);
  return rec;
}

std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t index) {
  return derive_seed(base_seed, "repeat", {index});
}

std::vector<ModelRecommendation> repeat_runs(
    std::size_t n_repeats, std::uint64_t base_seed,
    const std::function<ModelRecommendation(std::uint64_t seed, std::size_t index)>& run) {
  if (n_repeats == 0) throw ConfigError("repeats must be at least 1");
  std::vector<ModelRecommendation> out;
  for (std::size_t i = 0; i < n_repeats; ++i) {
    const auto s = repeat_seed(base_seed, i);
    try {
      out.push_back(run(s, i));
    } catch (const std::exception& e) {
      ModelRecommendation failed;
      failed.seed = s;
      failed.failed = true;
      failed.error = e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

// ---- manifest and replay ----

json to_json(const RunManifest& m) {
  const auto& s = m.options.settings;
  json budget{{"total_seconds", s.budget.total_seconds},
              {"lower_mode", to_string(s.budget.lower_mode)},
              {"lower_amount", s.budget.lower_amount},
              {"billing", "optimization phase only; data loading and holdout validation excluded"}};
  budget["total_evaluations"] = s.budget.total_evaluations ? json(*s.budget.total_evaluations) : json(nullptr);
  json tabu{{"stagnation_limit", s.stagnation_limit}};
  tabu["max_len"] = s.tabu_max_len ? json(*s.tabu_max_len) : json(nullptr);
  return json{{"data_dir", m.data_dir},
              {"target", m.target},
              {"base_seed", m.base_seed},
              {"repeat", m.repeat},
              {"seed", m.seed},
              {"mode", to_string(m.options.mode)},
              {"holdout_fraction", m.options.holdout_fraction},
              {"drop_unsupported", m.options.bind.drop_unsupported},
              {"threads", s.threads},
              {"budget", budget},
              {"tpe",
               {{"gamma", s.tpe.gamma},
                {"n_candidates", s.tpe.n_candidates},
                {"max_init", s.tpe.max_init},
                {"laplace_alpha", s.tpe.laplace_alpha},
                {"bandwidth_floor", s.tpe.bandwidth_floor},
                {"prior_weight", s.tpe.prior_weight}}},
              {"tabu", tabu},
              {"portfolio", m.portfolio_text},
              {"notes", m.notes}};
}

RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.data_dir = j.at("data_dir").get<std::string>();
    m.target = j.at("target").get<std::string>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.repeat = j.at("repeat").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.options.mode = parse_search_mode(j.at("mode").get<std::string>());
    m.options.holdout_fraction = j.at("holdout_fraction").get<double>();
    m.options.bind.drop_unsupported = j.at("drop_unsupported").get<bool>();
    auto& s = m.options.settings;
    s.threads = j.at("threads").get<std::size_t>();
    const auto& b = j.at("budget");
    s.budget.total_seconds = b.at("total_seconds").get<double>();
    s.budget.lower_mode = parse_lower_mode(b.at("lower_mode").get<std::string>());
    s.budget.lower_amount = b.at("lower_amount").get<double>();
    if (!b.at("total_evaluations").is_null()) s.budget.total_evaluations = b["total_evaluations"].get<std::size_t>();
    const auto& t = j.at("tpe");
    s.tpe.gamma = t.at("gamma").get<double>();
    s.tpe.n_candidates = t.at("n_candidates").get<std::size_t>();
    s.tpe.max_init = t.at("max_init").get<std::size_t>();
    s.tpe.laplace_alpha = t.at("laplace_alpha").get<double>();
    s.tpe.bandwidth_floor = t.at("bandwidth_floor").get<double>();
    s.tpe.prior_weight = t.value("prior_weight", s.tpe.prior_weight);
    const auto& tb = j.at("tabu");
    s.stagnation_limit = tb.at("stagnation_limit").get<std::size_t>();
    if (!tb.at("max_len").is_null()) s.tabu_max_len = tb["max_len"].get<std::size_t>();
    m.portfolio_text = j.at("portfolio").get<std::string>();
    m.notes = j.value("notes", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

TrialReplayer::TrialReplayer(const std::vector<Project>& projects, const RunManifest& manifest)
    : task_(CpdpTask::from_projects(projects, manifest.target, manifest.seed, manifest.options.holdout_fraction)),
      evaluator_(task_) {}

TrialOutcome TrialReplayer::replay(const TrialRecord& record) const {
  return evaluator_.evaluate(record.combination, record.config, record.seed);
}

}  // namespace bilo
