#include "bilo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "bilo/dataset.hpp"
#include "bilo/error.hpp"
#include "bilo/portfolio_file.hpp"
#include "bilo/report.hpp"
#include "bilo/synth.hpp"

namespace bilo {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- configuration ----

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  std::istringstream in(value);
  in >> v;
  if (in.fail() || !in.eof()) throw ConfigError("'" + key + "': cannot parse '" + value + "'");
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + value + "'");
  return parse_number<std::size_t>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + value + "'");
}

}  // namespace

void apply_settings(RunConfig& c, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "data")
      c.data_dir = value;
    else if (key == "target")
      c.target = value;
    else if (key == "all")
      c.all = parse_bool(key, value);
    else if (key == "mode")
      c.mode = parse_search_mode(value);
    else if (key == "budget")
      c.budget_seconds = parse_number<double>(key, value);
    else if (key == "total-evals")
      c.total_evaluations = parse_count(key, value);
    else if (key == "lower-seconds")
      c.lower_seconds = parse_number<double>(key, value);
    else if (key == "lower-evals")
      c.lower_evaluations = parse_count(key, value);
    else if (key == "repeats")
      c.repeats = parse_count(key, value);
    else if (key == "seed")
      c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "portfolio")
      c.portfolio_path = value;
    else if (key == "out")
      c.out_dir = value;
    else if (key == "holdout")
      c.holdout_fraction = parse_number<double>(key, value);
    else if (key == "drop-unsupported")
      c.drop_unsupported = parse_bool(key, value);
    else if (key == "threads")
      c.threads = parse_count(key, value);
    else if (key == "tpe-gamma")
      c.tpe.gamma = parse_number<double>(key, value);
    else if (key == "tpe-candidates")
      c.tpe.n_candidates = parse_count(key, value);
    else if (key == "tpe-init")
      c.tpe.max_init = parse_count(key, value);
    else if (key == "tabu-max-len")
      c.tabu_max_len = parse_count(key, value);
    else
      throw ConfigError("unknown setting '" + key + "'");
  }
}

CpdpOptions RunConfig::options() const {
  CpdpOptions o;
  o.mode = mode;
  o.holdout_fraction = holdout_fraction;
  o.bind.drop_unsupported = drop_unsupported;
  auto& s = o.settings;
  s.tpe = tpe;
  s.tabu_max_len = tabu_max_len;
  s.threads = threads ? *threads : threads_from_env();
  s.budget.total_seconds = budget_seconds;
  s.budget.total_evaluations = total_evaluations;
  bool by_count = mode == SearchMode::bilevel_l || (lower_evaluations && !lower_seconds);
  if (by_count) {
    s.budget.lower_mode = LowerMode::evaluations;
    s.budget.lower_amount = static_cast<double>(lower_evaluations.value_or(100));
  } else {
    s.budget.lower_mode = LowerMode::seconds;
    s.budget.lower_amount = lower_seconds.value_or(20.0);
  }
  return o;
}

void RunConfig::validate() const {
  if (data_dir.empty()) throw ConfigError("--data is required");
  if (!fs::is_directory(data_dir)) throw ConfigError("data directory '" + data_dir + "' does not exist");
  if (all == target.has_value()) throw ConfigError("give exactly one of --target and --all");
  if (repeats < 1) throw ConfigError("--repeats must be at least 1");
  if (portfolio_path && !fs::exists(*portfolio_path))
    throw ConfigError("portfolio file '" + *portfolio_path + "' does not exist");
  if (mode == SearchMode::bilevel_l && lower_seconds)
    throw ConfigError("--lower-seconds does not apply to mode bilevel-l");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout must be in (0, 1)");
  if (!(tpe.gamma > 0.0 && tpe.gamma < 1.0)) throw ConfigError("tpe-gamma must be in (0, 1)");
  if (tpe.n_candidates == 0) throw ConfigError("tpe-candidates must be positive");
  if (tpe.max_init == 0) throw ConfigError("tpe-init must be positive");
  options().settings.budget.validate();
}

// ---- commands ----

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string format_auc(const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); }

// Runs one (target, repeat) and writes its artifacts. Returns the recommendation.
ModelRecommendation run_one(const std::vector<Project>& projects, const Portfolio& portfolio,
                            const RunManifest& manifest, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  write_json(run_dir / "manifest.json", to_json(manifest));
  TrialLog log(run_dir / "trials.jsonl");
  ModelRecommendation rec;
  try {
    rec = optimize_cpdp(projects, manifest.target, portfolio, manifest.options, manifest.seed, log);
  } catch (const BudgetExhaustedError& e) {
    rec.target = manifest.target;
    rec.seed = manifest.seed;
    rec.failed = true;
    rec.error = e.what();
  }
  write_json(run_dir / "recommendation.json", to_json(rec));
  return rec;
}

int cmd_optimize(const RunConfig& config, const std::optional<std::string>& manifest_path, std::ostream& out) {
  std::vector<RunManifest> runs;
  std::string portfolio_text;
  std::vector<Project> projects;
  fs::path out_dir = config.out_dir;

  if (manifest_path) {
    auto m = manifest_from_json(read_json(*manifest_path));
    if (!config.data_dir.empty()) m.data_dir = config.data_dir;
    portfolio_text = m.portfolio_text;
    projects = load_dataset_dir(m.data_dir);
    runs.push_back(std::move(m));
  } else {
    config.validate();
    portfolio_text = config.portfolio_path ? read_text(*config.portfolio_path) : std::string(default_portfolio_text());
    projects = load_dataset_dir(config.data_dir);
    std::vector<std::string> targets;
    if (config.all) {
      for (const auto& p : projects) targets.push_back(p.name);
    } else {
      targets.push_back(*config.target);
    }
    if (projects.size() < 2) throw DataError("'" + config.data_dir + "' needs at least two projects");
    for (const auto& t : targets) {
      if (std::none_of(projects.begin(), projects.end(), [&](const Project& p) { return p.name == t; }))
        throw ConfigError("target project '" + t + "' not found in '" + config.data_dir + "'");
      for (std::size_t i = 0; i < config.repeats; ++i) {
        RunManifest m;
        m.data_dir = fs::absolute(config.data_dir).lexically_normal().string();
        m.target = t;
        m.base_seed = config.seed;
        m.repeat = i;
        m.seed = repeat_seed(config.seed, i);
        m.options = config.options();
        m.portfolio_text = portfolio_text;
        runs.push_back(std::move(m));
      }
    }
  }
  const Portfolio portfolio = parse_portfolio(portfolio_text);

  fs::create_directories(out_dir);
  std::ofstream summary(out_dir / "summary.csv");
  summary << "target,repeat,seed,combination,training_auc,holdout_auc,trials,lower_runs,elapsed_seconds,failed\n";
  bool any_exhausted = false;
  for (const auto& m : runs) {
    auto run_dir = out_dir / m.target / ("run_" + std::to_string(m.repeat));
    auto rec = run_one(projects, portfolio, m, run_dir);
    if (rec.failed) any_exhausted = true;
    summary << m.target << ',' << m.repeat << ',' << m.seed << ',' << (rec.failed ? "" : rec.combination.label()) << ','
            << (rec.failed ? "" : std::to_string(rec.training_auc)) << ',' << (rec.holdout_auc ? std::to_string(*rec.holdout_auc) : "")
            << ',' << rec.total_trials << ',' << rec.lower_runs << ',' << rec.elapsed_seconds << ','
            << (rec.failed ? "true" : "false") << '\n';
    summary.flush();
    out << m.target << " run " << m.repeat << ": ";
    if (rec.failed)
      out << "failed: " << rec.error << '\n';
    else
      out << rec.combination.label() << " training AUC " << rec.training_auc << ", holdout AUC "
          << format_auc(rec.holdout_auc) << " (" << rec.total_trials << " trials, " << rec.elapsed_seconds << " s)\n";
  }
  if (!summary) throw ConfigError("cannot write summary under '" + out_dir.string() + "'");
  return any_exhausted ? kExitBudget : kExitOk;
}

int cmd_replay(const fs::path& run_dir, const std::optional<std::string>& data_override, std::size_t samples,
               std::uint64_t seed, std::ostream& out) {
  auto m = manifest_from_json(read_json(run_dir / "manifest.json"));
  if (data_override) m.data_dir = *data_override;
  auto projects = load_dataset_dir(m.data_dir);
  auto log = read_trial_log(run_dir / "trials.jsonl");
  std::vector<TrialRecord> picked = log.trials;
  if (samples > 0 && samples < picked.size()) {
    Rng rng(seed);
    std::shuffle(picked.begin(), picked.end(), rng);
    picked.resize(samples);
    std::sort(picked.begin(), picked.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
  }
  TrialReplayer replayer(projects, m);
  std::size_t mismatches = 0;
  for (const auto& t : picked) {
    auto o = replayer.replay(t);
    if (!(o.value == t.value)) {
      ++mismatches;
      out << "trial " << t.seq << ": logged " << t.value << ", replayed " << o.value << '\n';
    }
  }
  out << "replayed " << picked.size() << " trials, " << mismatches << " mismatches\n";
  return mismatches == 0 ? kExitOk : kExitFailure;
}

int cmd_compare(const std::vector<std::string>& dirs, const fs::path& out_dir, ReportMetric metric, std::ostream& out) {
  std::vector<TechniqueResults> techniques;
  for (const auto& d : dirs) techniques.push_back(load_technique(d, metric));
  auto report = compare_techniques(techniques);
  write_report(report, out_dir);
  out << report.markdown();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bi-level model discovery for cross-project defect prediction", "bilopt"};
  app.require_subcommand(1);

  // optimize
  auto* opt = app.add_subcommand("optimize", "Search combinations and hyper-parameters for one or more targets");
  std::map<std::string, std::string> flag_values;
  std::string config_path, manifest_path;
  opt->add_option("--config", config_path, "key = value settings file; flags override it");
  opt->add_option("--manifest", manifest_path, "Re-run exactly the run a manifest describes");
  struct FlagSpec {
    const char* name;
    const char* help;
  };
  const FlagSpec valued[] = {
      {"data", "Directory of project CSV files"},
      {"target", "Target project name"},
      {"mode", "bilevel, single or bilevel-l"},
      {"budget", "Total optimization budget in seconds (default 3600)"},
      {"total-evals", "Optional cap on objective evaluations across the run"},
      {"lower-seconds", "Seconds per lower-level run (default 20)"},
      {"lower-evals", "Evaluations per lower-level run (default 100 in bilevel-l)"},
      {"repeats", "Independent repeats per target"},
      {"seed", "Master seed"},
      {"portfolio", "Portfolio file (default: native subset)"},
      {"out", "Output directory"},
      {"holdout", "Fraction of the target held out for validation"},
      {"threads", "Parallel lower-level runs (default: BILOPT_THREADS or 1)"},
      {"tpe-gamma", "TPE quantile splitting good from bad"},
      {"tpe-candidates", "TPE candidates per proposal"},
      {"tpe-init", "Maximum space-filling initial evaluations"},
      {"tabu-max-len", "Tabu list capacity (default unbounded)"},
  };
  std::map<std::string, std::string> raw;
  for (const auto& f : valued) opt->add_option(std::string("--") + f.name, raw[f.name], f.help);
  bool all_flag = false, drop_flag = false;
  opt->add_flag("--all", all_flag, "Use every project as target in turn");
  opt->add_flag("--drop-unsupported", drop_flag, "Drop learners without a native implementation");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare techniques from optimize output directories");
  std::vector<std::string> dirs;
  std::string cmp_out = "bilopt-report", metric = "holdout";
  cmp->add_option("dirs", dirs, "One optimize output directory per technique")->required();
  cmp->add_option("--out", cmp_out, "Report directory");
  cmp->add_option("--metric", metric, "holdout or training")->check(CLI::IsMember({"holdout", "training"}));

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write synthetic projects with a controllable domain gap");
  SynthSpec synth;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--projects", synth.projects, "Number of projects");
  gen->add_option("--instances", synth.instances, "Instances per project");
  gen->add_option("--features", synth.features, "Features per instance");
  gen->add_option("--shift", synth.shift, "Inter-project mean shift (standard deviation per feature)");
  gen->add_option("--defect-rate", synth.defect_rate, "Fraction of defective instances");
  gen->add_option("--separation", synth.separation, "Class mean distance per feature");
  gen->add_option("--seed", synth.seed, "Seed");
  gen->add_option("--prefix", synth.prefix, "Project name prefix");

  // replay
  auto* rep = app.add_subcommand("replay", "Re-evaluate logged trials of one run");
  std::string run_dir, rep_data;
  std::size_t samples = 0;
  std::uint64_t rep_seed = 0;
  rep->add_option("--run-dir", run_dir, "Directory holding manifest.json and trials.jsonl")->required();
  rep->add_option("--data", rep_data, "Override the manifest's data directory");
  rep->add_option("--samples", samples, "Number of trials to sample (0 = all)");
  rep->add_option("--seed", rep_seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*opt) {
      RunConfig config;
      if (!config_path.empty()) apply_settings(config, parse_key_values(read_text(config_path)));
      for (const auto& f : valued)
        if (opt->count(std::string("--") + f.name) > 0) flag_values[f.name] = raw[f.name];
      if (all_flag) flag_values["all"] = "true";
      if (drop_flag) flag_values["drop-unsupported"] = "true";
      apply_settings(config, flag_values);
      std::optional<std::string> manifest;
      if (!manifest_path.empty()) manifest = manifest_path;
      return cmd_optimize(config, manifest, out);
    }
    if (*cmp)
      return cmd_compare(dirs, cmp_out, metric == "training" ? ReportMetric::training : ReportMetric::holdout, out);
    if (*gen) {
      auto paths = write_synthetic(synth, gen_out);
      for (const auto& p : paths) out << "wrote " << p.string() << '\n';
      return kExitOk;
    }
    if (*rep) {
      std::optional<std::string> data;
      if (!rep_data.empty()) data = rep_data;
      return cmd_replay(run_dir, data, samples, rep_seed, out);
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const BudgetExhaustedError& e) {
    err << "budget exhausted: " << e.what() << '\n';
    return kExitBudget;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const BindingError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace bilo
