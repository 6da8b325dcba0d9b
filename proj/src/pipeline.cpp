#include "bilo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "bilo/error.hpp"
#include "bilo/learners.hpp"
#include "bilo/seed.hpp"
#include "bilo/transfer.hpp"

namespace bilo {

CpdpTask CpdpTask::from_projects(const std::vector<Project>& projects, std::string_view target_name,
                                 std::uint64_t seed, double holdout_fraction) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must be in (0, 1)");
  CpdpTask task;
  task.target_name = std::string(target_name);
  task.seed = seed;
  task.holdout_fraction = holdout_fraction;
  bool found = false;
  for (const auto& p : projects) {
    if (p.name == target_name) {
      task.target = p.instances;
      found = true;
    } else {
      task.source.insert(task.source.end(), p.instances.begin(), p.instances.end());
    }
  }
  if (!found) throw ConfigError("target project '" + std::string(target_name) + "' not found");
  if (task.source.empty()) throw DataError("task needs at least one source project");
  return task;
}

TaskSplit holdout_split(const CpdpTask& task, bool uses_target) {
  TaskSplit split;
  split.train.source = task.source;
  if (!uses_target) {
    split.test.instances = task.target;
    return split;
  }

  Rng rng(derive_seed(task.seed, "split", {hash_tag(task.target_name)}));
  const std::size_t n = task.target.size();
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < n; ++i) by_class[task.target[i].label].push_back(i);

  std::vector<bool> held(n, false);
  bool stratified = true;
  std::size_t counts[2] = {0, 0};
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].empty()) continue;
    counts[c] = static_cast<std::size_t>(std::llround(task.holdout_fraction * static_cast<double>(by_class[c].size())));
    if (counts[c] < 1) stratified = false;
  }
  if (stratified) {
    for (int c = 0; c < 2; ++c) {
      std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
      for (std::size_t i = 0; i < counts[c]; ++i) held[by_class[c][i]] = true;
    }
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(task.holdout_fraction * static_cast<double>(n))));
    for (std::size_t i = 0; i < m && i < n; ++i) held[all[i]] = true;
  }
  split.stratified = stratified;
  for (std::size_t i = 0; i < n; ++i) (held[i] ? split.test.instances : split.train.target_train).push_back(task.target[i]);
  return split;
}

TaskSplit split_task(const CpdpTask& task, std::string_view transfer_id) {
  return holdout_split(task, needs_target(transfer_id));
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney count, kept in integers so the result is the exact
  // ratio of pair counts.
  std::uint64_t neg_below = 0, twice_wins = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos_here = 0, neg_here = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos_here : neg_here) += 1;
      ++j;
    }
    twice_wins += 2 * pos_here * neg_below + pos_here * neg_here;
    neg_below += neg_here;
    n_pos += pos_here;
    n_neg += neg_here;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw UndefinedAucError("AUC undefined for single-class labels");
  return static_cast<double>(twice_wins) / static_cast<double>(2 * n_pos * n_neg);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool single_class(const std::vector<Instance>& data) {
  if (data.empty()) return true;
  return std::all_of(data.begin(), data.end(), [&](const Instance& i) { return i.label == data.front().label; });
}

struct Fitted {
  AdaptedData adapted;
  std::optional<TrainedModel> model;
};

Fitted fit(const TrainView& train, const Combination& x_u, const Configuration& x_l, std::uint64_t seed,
           EvaluationResult& result) {
  Fitted f;
  auto t0 = Clock::now();
  Rng adapt_rng(derive_seed(seed, "adapt"));
  f.adapted = adapt(x_u.transfer_id, learner_part(x_l, x_u.transfer_id), train.source, train.target_train, adapt_rng);
  result.adapt_seconds = seconds_since(t0);
  result.clamped = f.adapted.clamped;
  result.n_train = f.adapted.instances.size();
  if (single_class(f.adapted.instances)) {
    result.single_class = true;
    return f;
  }
  auto t1 = Clock::now();
  Rng train_rng(derive_seed(seed, "train"));
  f.model = bilo::train(x_u.classifier_id, learner_part(x_l, x_u.classifier_id), f.adapted.instances, train_rng);
  result.train_seconds = seconds_since(t1);
  return f;
}

double score(const TrainedModel& model, const std::vector<Instance>& data) {
  auto scores = model.ranking_scores(data);
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& i : data) labels.push_back(i.label);
  return auc(scores, labels);
}

}  // namespace

EvaluationResult evaluate(const TrainView& train, const Combination& x_u, const Configuration& x_l,
                          std::uint64_t seed) {
  EvaluationResult result;
  try {
    auto f = fit(train, x_u, x_l, seed, result);
    if (result.single_class) {
      result.training_auc = 0.5;
      return result;
    }
    auto t0 = Clock::now();
    result.training_auc = score(*f.model, f.adapted.instances);
    result.score_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    result.failed = true;
    result.training_auc = kFailedObjective;
    result.error = e.what();
  }
  return result;
}

EvaluationResult validate(const TrainView& train, const TestView& test, const Combination& x_u,
                          const Configuration& x_l, std::uint64_t seed, HoldoutAudit* audit) {
  EvaluationResult result;
  auto f = fit(train, x_u, x_l, seed, result);
  if (audit != nullptr) {
    std::unordered_set<std::uint64_t> training_uids;
    for (const auto& i : f.adapted.instances) training_uids.insert(i.uid);
    audit->holdout_size = test.instances.size();
    audit->training_size = f.adapted.instances.size();
    audit->overlap = static_cast<std::size_t>(std::count_if(
        test.instances.begin(), test.instances.end(), [&](const Instance& i) { return training_uids.count(i.uid) != 0; }));
  }
  if (result.single_class) {
    result.training_auc = 0.5;
    result.holdout_auc = 0.5;
    return result;
  }
  result.training_auc = score(*f.model, f.adapted.instances);
  std::vector<Instance> mapped;
  mapped.reserve(test.instances.size());
  for (const auto& i : test.instances) mapped.push_back(f.adapted.feature_map ? f.adapted.feature_map->apply(i) : i);
  try {
    result.holdout_auc = score(*f.model, mapped);
  } catch (const UndefinedAucError& e) {
    result.holdout_auc = 0.5;
    result.error = std::string("holdout: ") + e.what() + "; 0.5 substituted";
  }
  return result;
}

DataSizes task_sizes(const CpdpTask& task) {
  DataSizes sizes;
  sizes.n_source = task.source.size();
  sizes.n_target = holdout_split(task, true).train.target_train.size();
  return sizes;
}

BoundPortfolio bind_portfolio(const Portfolio& portfolio, const DataSizes& sizes, const BindOptions& options) {
  BoundPortfolio bound;
  bound.sizes = sizes;
  auto prune = [&](const std::string& owner, const ConfigSpace& space, auto native_choices) {
    ConfigSpace out;
    for (auto p : space.params()) {
      if (p.kind == ParamKind::categorical) {
        if (auto native = native_choices(owner, p.name)) {
          std::vector<std::string> kept;
          for (const auto& c : p.choices) {
            if (std::find(native->begin(), native->end(), c) != native->end())
              kept.push_back(c);
            else
              bound.notes.push_back(owner + "." + p.name + ": choice '" + c + "' not implemented; removed");
          }
          if (kept.empty())
            throw UnsupportedError(owner + "." + p.name + ": no implemented choice remains");
          p.choices = std::move(kept);
        }
      }
      out.add(std::move(p));
    }
    return out;
  };

  std::vector<TransferSpec> ts;
  for (const auto& t : portfolio.transfers()) {
    if (!is_native_transfer(t.id)) {
      if (!options.drop_unsupported)
        throw UnsupportedError("transfer learner '" + t.id +
                               "' is not implemented; native transfer learners: identity, NNfilter, TD, PCAmining");
      bound.notes.push_back("transfer learner '" + t.id + "' not implemented; dropped");
      continue;
    }
    bool needs = needs_target(t.id);
    if (needs != t.needs_target_data)
      bound.notes.push_back("transfer learner '" + t.id + "': needs-target flag set to " + (needs ? "true" : "false"));
    ts.push_back({t.id, prune(t.id, t.space, native_transfer_choices), needs});
  }
  std::vector<ClassifierSpec> cs;
  for (const auto& c : portfolio.classifiers()) {
    if (!is_native_classifier(c.id)) {
      if (!options.drop_unsupported)
        throw UnsupportedError("classifier '" + c.id +
                               "' is not implemented; native classifiers: NB, LR, KNN, DT, Bagging");
      bound.notes.push_back("classifier '" + c.id + "' not implemented; dropped");
      continue;
    }
    cs.push_back({c.id, prune(c.id, c.space, native_classifier_choices)});
  }
  if (ts.empty() || cs.empty()) throw BindingError("bound portfolio is empty");
  bound.portfolio = resolve_bounds(Portfolio(std::move(ts), std::move(cs)), sizes, &bound.notes);
  return bound;
}

CpdpEvaluator::CpdpEvaluator(const CpdpTask& task)
    : with_target_(holdout_split(task, true)), without_target_(holdout_split(task, false)) {}

const TaskSplit& CpdpEvaluator::split_for(std::string_view transfer_id) const {
  return needs_target(transfer_id) ? with_target_ : without_target_;
}

TrialOutcome CpdpEvaluator::evaluate(const Combination& x_u, const Configuration& x_l, std::uint64_t seed) const {
  TrialOutcome out;
  EvaluationResult r;
  try {
    r = bilo::evaluate(split_for(x_u.transfer_id).train, x_u, x_l, seed);
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  out.value = r.failed ? kFailedObjective : r.training_auc;
  out.failed = r.failed;
  out.single_class = r.single_class;
  out.clamped = std::move(r.clamped);
  out.error = std::move(r.error);
  out.adapt_seconds = r.adapt_seconds;
  out.train_seconds = r.train_seconds;
  out.score_seconds = r.score_seconds;
  return out;
}

}  // namespace bilo
