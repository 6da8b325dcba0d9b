#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bilo/dataset.hpp"
#include "bilo/objective.hpp"
#include "bilo/pipeline.hpp"
#include "bilo/space.hpp"
#include "bilo/tabu.hpp"
#include "bilo/tpe.hpp"

namespace bilo {

enum class LowerMode { seconds, evaluations };
enum class SearchMode { bilevel, single, bilevel_l };

std::string to_string(LowerMode mode);
std::string to_string(SearchMode mode);
LowerMode parse_lower_mode(const std::string& text);
SearchMode parse_search_mode(const std::string& text);

struct BudgetConfig {
  double total_seconds = 3600.0;
  // Optional cap on objective calls across the whole run.
  std::optional<std::size_t> total_evaluations;
  LowerMode lower_mode = LowerMode::seconds;
  double lower_amount = 20.0;  // seconds, or a count in evaluation mode

  static BudgetConfig mode_h(double total_seconds = 3600.0, double lower_seconds = 20.0);
  static BudgetConfig mode_l(double total_seconds = 3600.0, std::size_t lower_evaluations = 100);
  void validate() const;  // throws ConfigError
};

struct EngineSettings {
  BudgetConfig budget;
  TpeSettings tpe;
  std::optional<std::size_t> tabu_max_len;
  std::size_t stagnation_limit = 2;
  std::size_t threads = 1;
};

// Parallel evaluation cap from BILOPT_THREADS; 1 when unset or invalid.
std::size_t threads_from_env();

struct TrialRecord {
  std::uint64_t seq = 0;
  Combination combination;
  Configuration config;
  double value = kFailedObjective;
  bool failed = false;
  bool single_class = false;
  bool partial = false;
  std::vector<std::string> clamped;
  std::string error;
  double adapt_seconds = 0.0;
  double train_seconds = 0.0;
  double score_seconds = 0.0;
  double started = 0.0;  // seconds since the optimization started
  double elapsed = 0.0;  // wall time of this trial
  std::uint64_t seed = 0;
  std::string level;  // upper-init, neighbor or single-level
  std::uint64_t lower_run = 0;
};

struct LowerRunRecord {
  std::uint64_t id = 0;
  Combination combination;
  std::string role;
  double started = 0.0;
  double finished = 0.0;
  std::size_t evaluations = 0;
  double best_value = kFailedObjective;
  std::optional<double> budget_seconds;
  std::optional<std::size_t> budget_evaluations;
};

nlohmann::json to_json(const Configuration& config);
Configuration config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrialRecord& r);
TrialRecord trial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LowerRunRecord& r);
LowerRunRecord lower_run_from_json(const nlohmann::json& j);

// Append-only trial log. Every record is written as one JSON object per line
// and flushed immediately. Safe to append from several threads.
class TrialLog {
 public:
  TrialLog() = default;
  explicit TrialLog(const std::filesystem::path& path);

  std::uint64_t append(TrialRecord record);
  std::uint64_t append(LowerRunRecord record);

  std::vector<TrialRecord> trials() const;
  std::vector<LowerRunRecord> lower_runs() const;
  std::size_t size() const;

 private:
  void write(const nlohmann::json& j);

  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<TrialRecord> trials_;
  std::vector<LowerRunRecord> lower_runs_;
};

struct LogContents {
  std::vector<TrialRecord> trials;
  std::vector<LowerRunRecord> lower_runs;
};

LogContents read_trial_log(const std::filesystem::path& path);

struct SearchOutcome {
  Combination combination;
  Configuration config;
  double value = kFailedObjective;
  std::size_t trials = 0;
  std::size_t lower_runs = 0;
  double elapsed_seconds = 0.0;
  std::vector<Combination> visits;
  std::vector<Combination> tabu_list;
};

// The flattened single-level space: categorical "transfer" and "classifier"
// dimensions followed by every learner parameter under its joint name.
ConfigSpace flatten_portfolio(const Portfolio& portfolio);
// Active part of a flattened configuration.
std::pair<Combination, Configuration> unflatten(const Portfolio& portfolio, const Configuration& flat);
// Embeds a bi-level point into the flattened space; inactive dimensions take
// their lower bound or first choice.
Configuration flatten(const Portfolio& portfolio, const Combination& x, const Configuration& config);

// Tabu search over combinations with TPE as the lower routine.
SearchOutcome search_bilevel(const CombinationEvaluator& evaluator, const Portfolio& portfolio,
                             const EngineSettings& settings, std::uint64_t seed, TrialLog& log);

// A single TPE run over the flattened space consuming the whole budget.
SearchOutcome search_single_level(const CombinationEvaluator& evaluator, const Portfolio& portfolio,
                                  const EngineSettings& settings, std::uint64_t seed, TrialLog& log);

struct ModelRecommendation {
  std::string target;
  std::uint64_t seed = 0;
  Combination combination;
  Configuration config;
  double training_auc = kFailedObjective;
  std::optional<double> holdout_auc;
  std::size_t total_trials = 0;
  std::size_t lower_runs = 0;
  double elapsed_seconds = 0.0;
  HoldoutAudit audit;
  std::vector<std::string> notes;
  bool failed = false;
  std::string error;
};

nlohmann::json to_json(const ModelRecommendation& r);

struct CpdpOptions {
  SearchMode mode = SearchMode::bilevel;
  EngineSettings settings;
  BindOptions bind;
  double holdout_fraction = 0.10;
};

// Binds the portfolio to the task, runs the search on the training view only,
// then retrains the recommendation and scores it once on the holdout. The
// budget covers the search only.
ModelRecommendation optimize_cpdp(const std::vector<Project>& projects, const std::string& target,
                                  const Portfolio& portfolio, const CpdpOptions& options, std::uint64_t seed,
                                  TrialLog& log);

std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t index);

// Runs `run` for repeats 0..n-1 with seeds derived from base_seed. A run that
// throws yields a placeholder marked failed.
std::vector<ModelRecommendation> repeat_runs(
    std::size_t n_repeats, std::uint64_t base_seed,
    const std::function<ModelRecommendation(std::uint64_t seed, std::size_t index)>& run);

// Everything needed to re-run a CPDP optimization or replay one of its trials.
struct RunManifest {
  std::string data_dir;
  std::string target;
  std::uint64_t base_seed = 0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  CpdpOptions options;
  std::string portfolio_text;
  std::vector<std::string> notes;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Re-evaluates logged trials against the task a manifest describes.
class TrialReplayer {
 public:
  TrialReplayer(const std::vector<Project>& projects, const RunManifest& manifest);
  TrialOutcome replay(const TrialRecord& record) const;

 private:
  CpdpTask task_;
  CpdpEvaluator evaluator_;
};

}  // namespace bilo
