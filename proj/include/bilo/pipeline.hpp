#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bilo/dataset.hpp"
#include "bilo/objective.hpp"
#include "bilo/space.hpp"

namespace bilo {

// One target project plus the pooled remaining projects as source.
struct CpdpTask {
  std::string target_name;
  std::vector<Instance> target;
  std::vector<Instance> source;
  double holdout_fraction = 0.10;
  std::uint64_t seed = 0;

  static CpdpTask from_projects(const std::vector<Project>& projects, std::string_view target_name,
                                std::uint64_t seed, double holdout_fraction = 0.10);
};

// Everything an optimizer may see.
struct TrainView {
  std::vector<Instance> source;
  std::vector<Instance> target_train;
};

// Reserved for validation after optimization.
struct TestView {
  std::vector<Instance> instances;
};

struct TaskSplit {
  TrainView train;
  TestView test;
  bool stratified = true;
};

// With `uses_target` a stratified holdout_fraction of the target is held out
// and the rest becomes target training data; otherwise the whole target is
// the test set. Deterministic in (task.seed, task.target_name).
TaskSplit holdout_split(const CpdpTask& task, bool uses_target);
TaskSplit split_task(const CpdpTask& task, std::string_view transfer_id);

// Area under the ROC curve with half credit for ties. Throws
// UndefinedAucError when labels hold a single class.
double auc(std::span<const double> scores, std::span<const int> labels);

struct EvaluationResult {
  double training_auc = kFailedObjective;
  std::optional<double> holdout_auc;
  double adapt_seconds = 0.0;
  double train_seconds = 0.0;
  double score_seconds = 0.0;
  std::size_t n_train = 0;
  bool failed = false;
  bool single_class = false;
  std::vector<std::string> clamped;
  std::string error;
};

// adapt -> train -> score on the adapted training set. Never throws for
// learner failures; they come back as `failed` with a -inf objective.
EvaluationResult evaluate(const TrainView& train, const Combination& x_u, const Configuration& x_l,
                          std::uint64_t seed);

struct HoldoutAudit {
  std::size_t holdout_size = 0;
  std::size_t training_size = 0;
  std::size_t overlap = 0;  // holdout uids present in the training set
};

// Retrains the recommended model on the full training view and scores it on
// the test view. Only called after optimization.
EvaluationResult validate(const TrainView& train, const TestView& test, const Combination& x_u,
                          const Configuration& x_l, std::uint64_t seed, HoldoutAudit* audit = nullptr);

struct BindOptions {
  bool drop_unsupported = false;
};

struct BoundPortfolio {
  Portfolio portfolio;
  std::vector<std::string> notes;
  DataSizes sizes;
};

// Resolves data-dependent bounds against the task, removes categorical
// choices the native learners do not implement (recorded in notes), and
// rejects non-native learners unless `drop_unsupported` is set.
BoundPortfolio bind_portfolio(const Portfolio& portfolio, const DataSizes& sizes, const BindOptions& options = {});
DataSizes task_sizes(const CpdpTask& task);

// CombinationEvaluator over one task's training view.
class CpdpEvaluator final : public CombinationEvaluator {
 public:
  explicit CpdpEvaluator(const CpdpTask& task);

  TrialOutcome evaluate(const Combination& x_u, const Configuration& x_l, std::uint64_t seed) const override;

  const TaskSplit& split_for(std::string_view transfer_id) const;

 private:
  TaskSplit with_target_;
  TaskSplit without_target_;
};

}  // namespace bilo
