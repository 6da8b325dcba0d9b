#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "bilo/cli.hpp"
#include "bilo/dataset.hpp"
#include "bilo/engine.hpp"
#include "bilo/pipeline.hpp"
#include "bilo/portfolio_file.hpp"
#include "bilo/seed.hpp"
#include "bilo/stats.hpp"
#include "bilo/tabu.hpp"
#include "bilo/tpe.hpp"

using namespace bilo;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---- 1: AUC against pair enumeration ----

Verdict criterion_auc() {
  Rng rng(derive_seed(1, "acceptance-auc"));
  std::size_t mismatches = 0, instances = 0;
  double worst = 0.0;
  while (instances < 500) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
    bool tied = instances % 2 == 0;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> small(0, 9);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0.05, 0.95)(rng));
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = tied ? static_cast<double>(small(rng)) : z(rng);
      labels[i] = coin(rng) ? 1 : 0;
    }
    std::size_t pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == n) continue;
    ++instances;
    // Twice the Mann-Whitney count, an exact integer.
    long long twice_u = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (labels[i] == 1 && labels[j] == 0) twice_u += scores[i] > scores[j] ? 2 : scores[i] == scores[j] ? 1 : 0;
    const double pairs = static_cast<double>(pos) * static_cast<double>(n - pos);
    const double oracle = static_cast<double>(twice_u) / (2.0 * pairs);
    const double fast = auc(scores, labels);
    const double diff = std::abs(fast - oracle);
    worst = std::max(worst, diff);
    bool exact_rational = std::llround(fast * 2.0 * pairs) == twice_u;
    if (diff > 1e-12 || !exact_rational) ++mismatches;
  }
  return {mismatches == 0, std::to_string(instances) + " instances, " + std::to_string(mismatches) +
                               " mismatches, max |diff| " + fmt("%.3g", worst)};
}

// ---- 2: statistics against brute force ----

double brute_force_wilcoxon(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) less += 1;
      if (std::abs(d[j]) == std::abs(d[i])) equal += 1;
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  double le = 0, ge = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += rank[i];
    if (w <= observed + 1e-9) le += 1;
    if (w >= observed - 1e-9) ge += 1;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / std::ldexp(1.0, static_cast<int>(n)));
}

Verdict criterion_stats() {
  Rng rng(derive_seed(2, "acceptance-stats"));
  std::size_t w_bad = 0, a_bad = 0, c_bad = 0, bitwise = 0;
  double worst = 0.0;
  for (int f = 0; f < 100; ++f) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    std::vector<double> a(n), b(n);
    // Integer-valued samples so that ties and zero differences occur.
    std::uniform_int_distribution<int> v(0, f % 3 == 0 ? 4 : 50);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = v(rng);
      b[i] = v(rng);
    }
    auto r = wilcoxon_signed_rank(a, b, WilcoxonMethod::exact);
    double oracle = brute_force_wilcoxon(a, b);
    double diff = std::abs(r.p_value - oracle);
    worst = std::max(worst, diff);
    if (diff > 1e-12) ++w_bad;
  }
  for (int f = 0; f < 1000; ++f) {
    std::size_t na = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
    std::size_t nb = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
    std::vector<double> a(na), b(nb);
    std::uniform_int_distribution<int> v(0, 10);
    for (auto& x : a) x = v(rng);
    for (auto& x : b) x = v(rng);
    double twice = 0;
    for (double x : a)
      for (double y : b) twice += x > y ? 2 : x == y ? 1 : 0;
    const double denom = 2.0 * static_cast<double>(na * nb);
    double count = twice / denom;
    double forward = a12(a, b);
    // Exact as a rational: the value recovers the integer pair count.
    if (std::llround(forward * denom) != std::llround(twice) || std::abs(forward - count) > 1e-15) ++a_bad;
    if (forward != count) ++bitwise;
    if (forward + a12(b, a) != 1.0) ++c_bad;
  }
  return {w_bad == 0 && a_bad == 0 && c_bad == 0,
          "wilcoxon mismatches " + std::to_string(w_bad) + "/100 (max |diff| " + fmt("%.3g", worst) +
              "), a12 mismatches " + std::to_string(a_bad) + "/1000 (" + std::to_string(bitwise) +
              " differ in the last bit), complement failures " + std::to_string(c_bad) + "/1000"};
}

// ---- 3: TPE against random search ----

double mixed_objective(const Configuration& c) {
  static const std::map<std::string, std::pair<double, double>> optima = {
      {"a", {0.2, 0.0}}, {"b", {0.7, 0.3}}, {"c", {0.5, -0.2}}, {"d", {0.9, 0.1}}};
  auto [center, offset] = optima.at(c.get_choice("m"));
  double x = c.get_real("x");
  return offset - 4.0 * (x - center) * (x - center);
}

Verdict criterion_tpe() {
  ConfigSpace s;
  s.add(ParamSpec::real("x", 0.0, 1.0));
  s.add(ParamSpec::categorical("m", {"a", "b", "c", "d"}));
  const double optimum = 0.3;
  std::vector<double> tpe_best, random_best;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(derive_seed(seed, "acceptance-tpe")), b(derive_seed(seed, "acceptance-random"));
    tpe_best.push_back(run_tpe(mixed_objective, s, LowerBudget::evaluations(50), a).value);
    double best = -1e300;
    for (int i = 0; i < 50; ++i) best = std::max(best, mixed_objective(sample_uniform(s, b)));
    random_best.push_back(best);
  }
  double mt = median(tpe_best), mr = median(random_best);
  double regret_t = optimum - mt, regret_r = optimum - mr;
  return {mt >= mr && regret_t <= 0.5 * regret_r,
          "median best TPE " + fmt("%.6f", mt) + " vs random " + fmt("%.6f", mr) + "; median regret " +
              fmt("%.3g", regret_t) + " vs " + fmt("%.3g", regret_r)};
}

// ---- 4: Tabu argmax recovery ----

Portfolio grid(std::size_t nt, std::size_t nc) {
  std::vector<TransferSpec> ts;
  std::vector<ClassifierSpec> cs;
  for (std::size_t i = 0; i < nt; ++i) ts.push_back({"t" + std::to_string(i), {}, false});
  for (std::size_t i = 0; i < nc; ++i) cs.push_back({"c" + std::to_string(i), {}});
  return Portfolio(ts, cs);
}

Verdict criterion_tabu() {
  auto p = grid(4, 4);
  std::size_t hits = 0, duplicate_runs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng table_rng(derive_seed(seed, "acceptance-table"));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::map<Combination, double> table;
    for (const auto& x : p.all_combinations()) table[x] = u(table_rng);
    auto argmax = std::max_element(table.begin(), table.end(), [](auto& a, auto& b) { return a.second < b.second; });
    std::size_t ties = std::count_if(table.begin(), table.end(), [&](auto& kv) { return kv.second == argmax->second; });
    if (ties != 1) return {false, "stub table without a unique maximum"};

    LowerSolver solver = [&](const Combination& x, const LowerBudget&, std::uint64_t, const std::string&) {
      LowerRun r;
      r.value = table.at(x);
      r.evaluations = 1;
      return r;
    };
    UpperBudget budget;
    budget.max_lower_runs = 16;
    TabuSettings settings;
    settings.lower_evaluations = 1;
    Rng rng(derive_seed(seed, "acceptance-tabu"));
    auto r = run_tabu(p, solver, budget, rng, settings);
    if (r.combination == argmax->first) ++hits;
    std::set<Combination> tabu(r.tabu_list.begin(), r.tabu_list.end());
    std::set<Combination> visits(r.visits.begin(), r.visits.end());
    if (tabu.size() != r.tabu_list.size() || visits.size() != r.visits.size()) ++duplicate_runs;
  }
  return {hits >= 19 && duplicate_runs == 0, "argmax found in " + std::to_string(hits) + "/20 seeds, " +
                                                 std::to_string(duplicate_runs) + " runs with duplicates"};
}

// ---- 5 and 6: hierarchical synthetic objective ----

// 4 x 4 combinations, two real parameters per learner, so every joint
// configuration has four dimensions. The value is a per-combination base minus
// a quadratic in the configuration around a combination-specific center.
// In the deceptive layout the dominant combination (t2, c1) sits in the row
// and column holding the worst other entries, so the per-dimension marginals
// point away from it.
class HierarchicalEvaluator final : public CombinationEvaluator {
 public:
  HierarchicalEvaluator(Portfolio p, bool deceptive) : portfolio_(std::move(p)), deceptive_(deceptive) {}

  TrialOutcome evaluate(const Combination& x, const Configuration& c, std::uint64_t) const override {
    const int ti = x.transfer_id[1] - '0', ci = x.classifier_id[1] - '0';
    double v;
    if (ti == 2 && ci == 1)
      v = 0.9;
    else if (deceptive_)
      v = (ti == 2 || ci == 1) ? 0.2 : 0.5 + 0.05 * ((ti * 3 + ci) % 4);
    else
      v = 0.4 + 0.05 * ((ti * 5 + ci * 3) % 7);
    const auto index = static_cast<double>(portfolio_.index_of(x));
    double k = 0.0;
    for (const auto& [name, value] : c.values) {
      double center = 0.1 + 0.8 * std::fmod(0.618 * (index * 4.0 + k + 1.0), 1.0);
      double d = std::get<double>(value) - center;
      v -= d * d;
      k += 1.0;
    }
    TrialOutcome out;
    out.value = v;
    return out;
  }

 private:
  Portfolio portfolio_;
  bool deceptive_;
};

Portfolio hierarchical_portfolio() {
  std::string text;
  for (int i = 0; i < 4; ++i) {
    auto s = std::to_string(i);
    text += "transfer t" + s + "\n  a" + s + " real 0 1\n  b" + s + " real 0 1\n";
  }
  for (int i = 0; i < 4; ++i) {
    auto s = std::to_string(i);
    text += "classifier c" + s + "\n  r" + s + " real 0 1\n  s" + s + " real 0 1\n";
  }
  return parse_portfolio(text);
}

EngineSettings count_budget(std::size_t total, std::size_t per_run) {
  EngineSettings s;
  s.budget = BudgetConfig::mode_l(3600.0, per_run);
  s.budget.total_evaluations = total;
  return s;
}

struct Paired {
  std::vector<double> a, b;
};

Paired run_pairs(bool deceptive, const std::function<double(const CombinationEvaluator&, const Portfolio&, std::uint64_t)>& first,
                 const std::function<double(const CombinationEvaluator&, const Portfolio&, std::uint64_t)>& second) {
  auto p = hierarchical_portfolio();
  HierarchicalEvaluator eval(p, deceptive);
  Paired out;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = derive_seed(seed, "acceptance-hierarchical");
    out.a.push_back(first(eval, p, s));
    out.b.push_back(second(eval, p, s));
  }
  return out;
}

double bilevel_value(const CombinationEvaluator& e, const Portfolio& p, std::uint64_t seed, std::size_t per_run) {
  TrialLog log;
  return search_bilevel(e, p, count_budget(200, per_run), seed, log).value;
}

double single_value(const CombinationEvaluator& e, const Portfolio& p, std::uint64_t seed) {
  TrialLog log;
  return search_single_level(e, p, count_budget(200, 10), seed, log).value;
}

Verdict compare_pairs(const Paired& r, const std::string& a, const std::string& b) {
  double ma = median(r.a), mb = median(r.b);
  double p = wilcoxon_signed_rank(r.a, r.b).p_value;
  return {ma > mb && p < 0.05,
          "median " + a + " " + fmt("%.4f", ma) + " vs " + b + " " + fmt("%.4f", mb) + ", Wilcoxon p " + fmt("%.3g", p)};
}

Verdict criterion_bilevel_vs_single(bool deceptive) {
  auto r = run_pairs(
      deceptive, [](auto& e, auto& p, auto s) { return bilevel_value(e, p, s, 10); },
      [](auto& e, auto& p, auto s) { return single_value(e, p, s); });
  return compare_pairs(r, "bi-level", "single-level");
}

Verdict criterion_h_vs_l(bool deceptive) {
  auto r = run_pairs(
      deceptive, [](auto& e, auto& p, auto s) { return bilevel_value(e, p, s, 10); },
      [](auto& e, auto& p, auto s) { return bilevel_value(e, p, s, 100); });
  return compare_pairs(r, "h", "l");
}

// ---- 7, 8, 9: end to end on synthetic projects ----

struct EndToEnd {
  bool ran = false;
  int exit_code = -1;
  double wall_seconds = 0.0;
  fs::path data_dir, out_dir;
  std::vector<fs::path> run_dirs;
};

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "bilopt");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

EndToEnd run_end_to_end(const fs::path& work) {
  EndToEnd e;
  e.data_dir = work / "synth";
  e.out_dir = work / "optimize";
  fs::remove_all(e.data_dir);
  fs::remove_all(e.out_dir);
  std::string err;
  if (cli({"gen-synth", "--out", e.data_dir.string(), "--projects", "3", "--instances", "300", "--shift", "0.5",
           "--seed", "1"},
          &err) != 0) {
    std::cerr << err;
    return e;
  }
  auto start = std::chrono::steady_clock::now();
  e.exit_code = cli({"optimize", "--data", e.data_dir.string(), "--all", "--budget", "60", "--lower-seconds", "2",
                     "--repeats", "5", "--seed", "2026", "--out", e.out_dir.string()},
                    &err);
  e.wall_seconds = seconds_since(start);
  if (!err.empty()) std::cerr << err;
  e.ran = true;
  for (const char* t : {"synthA", "synthB", "synthC"})
    for (int r = 0; r < 5; ++r) e.run_dirs.push_back(e.out_dir / t / ("run_" + std::to_string(r)));
  return e;
}

Verdict criterion_end_to_end(const EndToEnd& e) {
  if (!e.ran) return {false, "gen-synth failed"};
  if (e.exit_code != 0) return {false, "optimize exited with " + std::to_string(e.exit_code)};
  auto projects = load_dataset_dir(e.data_dir);
  std::size_t below = 0, overlapping = 0, missing = 0;
  double worst = 1.0;
  for (const auto& dir : e.run_dirs) {
    if (!fs::exists(dir / "recommendation.json") || !fs::exists(dir / "manifest.json")) {
      ++missing;
      continue;
    }
    auto rec = read_json(dir / "recommendation.json");
    if (rec.value("failed", false) || !rec["holdout_auc"].is_number()) {
      ++below;
      continue;
    }
    double h = rec["holdout_auc"].get<double>();
    worst = std::min(worst, h);
    if (!(h > 0.8)) ++below;
    if (rec["holdout_audit"]["overlap"].get<std::size_t>() != 0) ++overlapping;

    // Rebuild the split from the manifest and check the uids directly.
    auto m = manifest_from_json(read_json(dir / "manifest.json"));
    auto task = CpdpTask::from_projects(projects, m.target, m.seed, m.options.holdout_fraction);
    auto split = split_task(task, rec["combination"]["transfer"].get<std::string>());
    std::set<std::uint64_t> training;
    for (const auto& i : split.train.source) training.insert(i.uid);
    for (const auto& i : split.train.target_train) training.insert(i.uid);
    for (const auto& i : split.test.instances)
      if (training.count(i.uid)) {
        ++overlapping;
        break;
      }
  }
  const double limit = 5 * 3 * 75.0;
  bool pass = missing == 0 && below == 0 && overlapping == 0 && e.wall_seconds <= limit;
  return {pass, "wall " + fmt("%.1f", e.wall_seconds) + " s (limit " + fmt("%.0f", limit) + "), " +
                    std::to_string(e.run_dirs.size() - missing) + " runs, min holdout AUC " + fmt("%.4f", worst) + ", " +
                    std::to_string(below) + " at or below 0.8, " + std::to_string(overlapping) + " with holdout overlap"};
}

Verdict criterion_budget(const EndToEnd& e) {
  if (!e.ran || e.run_dirs.empty()) return {false, "no end-to-end logs"};
  // Bookkeeping between the last trial and the end-of-run timestamp.
  const double slack = 0.01;
  std::size_t run_violations = 0, lower_violations = 0, lower_runs = 0;
  double worst_run = -1e9, worst_lower = -1e9;
  for (const auto& dir : e.run_dirs) {
    if (!fs::exists(dir / "trials.jsonl")) return {false, "missing log in " + dir.string()};
    auto log = read_trial_log(dir / "trials.jsonl");
    auto rec = read_json(dir / "recommendation.json");
    double max_trial = 0.0;
    std::map<std::uint64_t, double> max_in_run;
    for (const auto& t : log.trials) {
      max_trial = std::max(max_trial, t.elapsed);
      max_in_run[t.lower_run] = std::max(max_in_run[t.lower_run], t.elapsed);
    }
    double billed = rec["elapsed_seconds"].get<double>();
    double margin = billed - (60.0 + max_trial);
    worst_run = std::max(worst_run, margin);
    if (margin > slack) ++run_violations;
    for (const auto& lr : log.lower_runs) {
      ++lower_runs;
      double limit = lr.budget_seconds.value_or(2.0) + max_in_run[lr.id];
      double over = (lr.finished - lr.started) - limit;
      worst_lower = std::max(worst_lower, over);
      if (over > slack) ++lower_violations;
    }
  }
  return {run_violations == 0 && lower_violations == 0 && lower_runs > 0,
          std::to_string(run_violations) + " runs over 60 s + max trial (worst margin " + fmt("%+.3f", worst_run) +
              " s), " + std::to_string(lower_violations) + "/" + std::to_string(lower_runs) +
              " lower runs over 2 s + one trial (worst margin " + fmt("%+.3f", worst_lower) + " s)"};
}

Verdict criterion_replay(const EndToEnd& e) {
  if (!e.ran || e.run_dirs.empty()) return {false, "no end-to-end logs"};
  auto projects = load_dataset_dir(e.data_dir);
  struct Ref {
    std::size_t run;
    TrialRecord trial;
  };
  std::vector<Ref> all;
  std::vector<RunManifest> manifests;
  for (std::size_t i = 0; i < e.run_dirs.size(); ++i) {
    manifests.push_back(manifest_from_json(read_json(e.run_dirs[i] / "manifest.json")));
    for (auto& t : read_trial_log(e.run_dirs[i] / "trials.jsonl").trials) all.push_back({i, std::move(t)});
  }
  if (all.size() < 100) return {false, "only " + std::to_string(all.size()) + " logged trials"};
  Rng rng(derive_seed(9, "acceptance-replay"));
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(100);
  std::map<std::size_t, std::unique_ptr<TrialReplayer>> replayers;
  std::size_t mismatches = 0;
  for (const auto& r : all) {
    auto& rep = replayers[r.run];
    if (!rep) rep = std::make_unique<TrialReplayer>(projects, manifests[r.run]);
    auto o = rep->replay(r.trial);
    if (!(o.value == r.trial.value)) ++mismatches;
  }
  return {mismatches == 0, "100 sampled trials from " + std::to_string(replayers.size()) + " runs, " +
                               std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for bilopt", "acceptance"};
  std::string work = "acceptance-work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for the end-to-end run");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  bool all_pass = true;
  auto report = [&](int n, const std::string& name, double limit, const std::function<Verdict()>& f) {
    if (!wanted(n)) return;
    auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    double t = seconds_since(start);
    if (limit > 0 && t >= limit) {
      v.pass = false;
      v.detail += "; runtime over " + fmt("%.0f", limit) + " s";
    }
    all_pass = all_pass && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << name << "): " << v.detail << " ["
              << fmt("%.2f", t) << " s]" << std::endl;
  };

  report(1, "AUC oracle", 5.0, criterion_auc);
  report(2, "statistics oracle", 10.0, criterion_stats);
  report(3, "TPE vs random", 30.0, criterion_tpe);
  report(4, "tabu argmax", 10.0, criterion_tabu);
  if (wanted(5) || wanted(6)) {
    auto neutral = criterion_bilevel_vs_single(false);
    std::cout << "info: neutral hierarchical layout, bi-level vs single-level: " << neutral.detail << std::endl;
  }
  report(5, "bi-level vs single-level", 120.0, [] { return criterion_bilevel_vs_single(true); });
  report(6, "mode h vs mode l", 120.0, [] { return criterion_h_vs_l(true); });

  EndToEnd e;
  if (wanted(7) || wanted(8) || wanted(9)) e = run_end_to_end(work);
  report(7, "end-to-end CPDP", 0.0, [&] { return criterion_end_to_end(e); });
  report(8, "budget discipline", 0.0, [&] { return criterion_budget(e); });
  report(9, "replay determinism", 0.0, [&] { return criterion_replay(e); });

  std::cout << (all_pass ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return all_pass ? 0 : 1;
}
