#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bilo/cli.hpp"
#include "bilo/dataset.hpp"
#include "bilo/error.hpp"
#include "bilo/synth.hpp"

using namespace bilo;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "bilopt");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("bilo_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

fs::path small_synth(const std::string& name, std::size_t projects = 3) {
  auto dir = fresh_dir(name);
  auto r = run({"gen-synth", "--out", dir.string(), "--projects", std::to_string(projects), "--instances", "60",
                "--features", "4", "--seed", "5"});
  REQUIRE(r.code == 0);
  return dir;
}

std::vector<std::string> quick_flags() { return {"--total-evals", "12", "--lower-evals", "4", "--budget", "600"}; }

}  // namespace

TEST_CASE("parse_key_values handles comments, blanks and whitespace") {
  auto kv = parse_key_values("# header\n\n data = /tmp/x \nseed=7 # trailing\n  mode =  single\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("data") == "/tmp/x");
  CHECK(kv.at("seed") == "7");
  CHECK(kv.at("mode") == "single");
  CHECK(parse_key_values("").empty());
}

TEST_CASE("parse_key_values reports the offending line") {
  try {
    parse_key_values("seed = 1\n\nnot a setting\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  try {
    parse_key_values("seed = 1\nseed = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_key_values(" = 3\n"), ConfigError);
}

TEST_CASE("apply_settings maps keys and rejects bad values") {
  RunConfig c;
  apply_settings(c, {{"data", "d"}, {"target", "synthA"}, {"mode", "bilevel-l"}, {"budget", "60"},
                     {"lower-evals", "7"}, {"repeats", "3"}, {"seed", "42"}, {"drop-unsupported", "true"},
                     {"tpe-gamma", "0.25"}, {"tabu-max-len", "5"}});
  CHECK(c.data_dir == "d");
  CHECK(c.target == std::optional<std::string>("synthA"));
  CHECK(c.mode == SearchMode::bilevel_l);
  CHECK(c.budget_seconds == 60.0);
  CHECK(c.lower_evaluations == std::optional<std::size_t>(7));
  CHECK(c.repeats == 3);
  CHECK(c.seed == 42);
  CHECK(c.drop_unsupported);
  CHECK(c.tpe.gamma == 0.25);
  CHECK(c.tabu_max_len == std::optional<std::size_t>(5));

  RunConfig d;
  CHECK_THROWS_AS(apply_settings(d, {{"colour", "blue"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(d, {{"repeats", "-1"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(d, {{"budget", "soon"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(d, {{"all", "maybe"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(d, {{"mode", "triple"}}), ConfigError);
}

TEST_CASE("RunConfig options follow the mode") {
  RunConfig h;
  h.lower_seconds = 2.0;
  auto oh = h.options();
  CHECK(oh.settings.budget.lower_mode == LowerMode::seconds);
  CHECK(oh.settings.budget.lower_amount == 2.0);

  RunConfig l;
  l.mode = SearchMode::bilevel_l;
  auto ol = l.options();
  CHECK(ol.settings.budget.lower_mode == LowerMode::evaluations);
  CHECK(ol.settings.budget.lower_amount == 100.0);

  RunConfig e;
  e.lower_evaluations = 9;
  CHECK(e.options().settings.budget.lower_mode == LowerMode::evaluations);
  CHECK(e.options().settings.budget.lower_amount == 9.0);
}

TEST_CASE("RunConfig validation") {
  auto data = fresh_dir("validate");
  RunConfig c;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.data_dir = (data / "missing").string();
  c.target = "x";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.data_dir = data.string();
  c.validate();
  c.all = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.target.reset();
  c.validate();
  c.repeats = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.repeats = 1;
  c.mode = SearchMode::bilevel_l;
  c.lower_seconds = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.lower_seconds.reset();
  c.holdout_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("gen-synth is byte-identical for a fixed seed") {
  auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b"), c = fresh_dir("synth_c");
  std::vector<std::string> common = {"--projects", "2", "--instances", "50", "--features", "3"};
  auto args = [&](const fs::path& d, const std::string& seed) {
    std::vector<std::string> v = {"gen-synth", "--out", d.string(), "--seed", seed};
    v.insert(v.end(), common.begin(), common.end());
    return v;
  };
  REQUIRE(run(args(a, "9")).code == 0);
  REQUIRE(run(args(b, "9")).code == 0);
  REQUIRE(run(args(c, "10")).code == 0);
  for (const char* f : {"synthA.csv", "synthB.csv"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) != slurp(c / f));
  }
}

TEST_CASE("gen-synth defect rate 0.3 over 100 instances gives 30 positives") {
  SynthSpec s;
  s.instances = 100;
  s.defect_rate = 0.3;
  s.projects = 4;
  for (const auto& p : generate_synthetic(s)) {
    std::size_t pos = 0;
    for (const auto& i : p.instances) pos += i.label;
    CHECK(pos == 30);
    CHECK(p.instances.size() == 100);
  }
}

TEST_CASE("gen-synth with shift 0 draws every project from one distribution") {
  SynthSpec s;
  s.shift = 0.0;
  s.separation = 0.0;
  s.instances = 4000;
  s.features = 3;
  s.projects = 3;
  auto projects = generate_synthetic(s);
  for (std::size_t f = 0; f < s.features; ++f) {
    std::vector<double> means;
    for (const auto& p : projects) {
      double m = 0.0;
      for (const auto& i : p.instances) m += i.features[f];
      means.push_back(m / static_cast<double>(p.instances.size()));
    }
    // Standard error of each mean is about 0.016.
    for (double m : means) CHECK(std::abs(m) < 0.07);
  }

  SynthSpec shifted = s;
  shifted.shift = 3.0;
  auto moved = generate_synthetic(shifted);
  double spread = 0.0;
  for (std::size_t f = 0; f < s.features; ++f) {
    double m = 0.0;
    for (const auto& i : moved[0].instances) m += i.features[f];
    spread += std::abs(m / static_cast<double>(moved[0].instances.size()));
  }
  CHECK(spread > 0.3);
}

TEST_CASE("optimize --all writes one directory per target and exits 0") {
  auto data = small_synth("all_data");
  auto out = fresh_dir("all_out");
  std::vector<std::string> args = {"optimize", "--data", data.string(), "--all", "--out", out.string(), "--seed", "3"};
  for (auto& f : quick_flags()) args.push_back(f);
  auto r = run(args);
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* t : {"synthA", "synthB", "synthC"}) {
    auto run_dir = out / t / "run_0";
    CHECK(fs::exists(run_dir / "manifest.json"));
    CHECK(fs::exists(run_dir / "trials.jsonl"));
    CHECK(fs::exists(run_dir / "recommendation.json"));
  }
  auto summary = slurp(out / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
}

TEST_CASE("config file values are overridden by flags") {
  auto data = small_synth("cfg_data");
  auto out = fresh_dir("cfg_out");
  auto cfg = out / "run.cfg";
  write_text(cfg, "data = " + data.string() + "\ntarget = synthA\nseed = 1\nrepeats = 2\ntotal-evals = 8\nlower-evals = 4\n");
  auto r = run({"optimize", "--config", cfg.string(), "--repeats", "1", "--out", (out / "o").string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "o" / "synthA" / "run_0"));
  CHECK_FALSE(fs::exists(out / "o" / "synthA" / "run_1"));

  write_text(cfg, "data = " + data.string() + "\nfavourite = 3\n");
  auto bad = run({"optimize", "--config", cfg.string(), "--target", "synthA"});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("favourite") != std::string::npos);
}

TEST_CASE("exit codes for config and data errors") {
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"optimize", "--bogus"}).code == kExitConfig);
  auto data = small_synth("codes_data");
  CHECK(run({"optimize", "--data", data.string(), "--target", "nope"}).code == kExitConfig);
  CHECK(run({"optimize", "--data", data.string()}).code == kExitConfig);
  CHECK(run({"optimize", "--data", data.string(), "--target", "synthA", "--mode", "sideways"}).code == kExitConfig);

  auto one = small_synth("codes_one", 1);
  auto r = run({"optimize", "--data", one.string(), "--target", "synthA"});
  CHECK(r.code == kExitData);
}

TEST_CASE("a file without a label column is reported by name") {
  auto data = small_synth("nolabel");
  write_text(data / "broken.csv", "a,b,c\n1,2,3\n4,5,6\n");
  auto r = run({"optimize", "--data", data.string(), "--target", "synthA", "--out", fresh_dir("nolabel_out").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("broken.csv") != std::string::npos);
  CHECK(r.err.find("label") != std::string::npos);
}

TEST_CASE("an exhausted budget exits 4") {
  auto data = small_synth("budget_data");
  auto out = fresh_dir("budget_out");
  auto r = run({"optimize", "--data", data.string(), "--target", "synthA", "--out", out.string(), "--budget", "0.000001",
                "--lower-seconds", "0.000001"});
  CHECK(r.code == kExitBudget);
  CHECK(fs::exists(out / "synthA" / "run_0" / "recommendation.json"));
}

TEST_CASE("manifest re-run reproduces the trial log; replay matches") {
  auto data = small_synth("manifest_data");
  auto out = fresh_dir("manifest_out");
  std::vector<std::string> args = {"optimize", "--data", data.string(), "--target", "synthB", "--out",
                                   (out / "first").string(), "--seed", "11"};
  for (auto& f : quick_flags()) args.push_back(f);
  REQUIRE(run(args).code == 0);
  auto first_dir = out / "first" / "synthB" / "run_0";

  auto again = run({"optimize", "--manifest", (first_dir / "manifest.json").string(), "--out", (out / "second").string()});
  INFO(again.err);
  REQUIRE(again.code == 0);
  auto a = read_trial_log(first_dir / "trials.jsonl");
  auto b = read_trial_log(out / "second" / "synthB" / "run_0" / "trials.jsonl");
  REQUIRE(a.trials.size() == b.trials.size());
  REQUIRE_FALSE(a.trials.empty());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].combination == b.trials[i].combination);
    CHECK(a.trials[i].config == b.trials[i].config);
    CHECK(a.trials[i].value == b.trials[i].value);
    CHECK(a.trials[i].seed == b.trials[i].seed);
  }

  auto rep = run({"replay", "--run-dir", first_dir.string()});
  CHECK(rep.code == 0);
  CHECK(rep.out.find(" 0 mismatches") != std::string::npos);
  auto sampled = run({"replay", "--run-dir", first_dir.string(), "--samples", "3", "--seed", "2"});
  CHECK(sampled.code == 0);
  CHECK(sampled.out.find("replayed 3 trials") != std::string::npos);
}

TEST_CASE("compare writes a report for two techniques") {
  auto data = small_synth("compare_data");
  auto root = fresh_dir("compare_out");
  for (const std::string mode : {"bilevel", "single"}) {
    std::vector<std::string> args = {"optimize", "--data", data.string(), "--target", "synthA", "--repeats", "2",
                                     "--mode", mode, "--out", (root / mode).string()};
    for (auto& f : quick_flags()) args.push_back(f);
    auto r = run(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
  }
  auto report = root / "report";
  auto r = run({"compare", (root / "bilevel").string(), (root / "single").string(), "--out", report.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("bilevel") != std::string::npos);
  CHECK(r.out.find("single") != std::string::npos);
  for (const char* f : {"report.md", "means.csv", "pairwise.csv", "ranks.csv", "ranks.svg"}) CHECK(fs::exists(report / f));
  CHECK(slurp(report / "ranks.svg").rfind("<svg", 0) == 0);

  auto missing = run({"compare", (root / "nothing").string()});
  CHECK(missing.code == kExitConfig);
}
