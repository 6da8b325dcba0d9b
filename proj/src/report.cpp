#include "bilo/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bilo/error.hpp"

namespace bilo {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

TechniqueResults load_technique(const fs::path& dir, ReportMetric metric) {
  if (!fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  TechniqueResults t;
  t.id = fs::absolute(dir).lexically_normal().filename().string();
  if (t.id.empty()) t.id = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  static const std::regex run_re("run_([0-9]+)");
  for (const auto& project_dir : fs::directory_iterator(dir)) {
    if (!project_dir.is_directory()) continue;
    std::map<std::size_t, std::optional<double>> runs;
    for (const auto& run_dir : fs::directory_iterator(project_dir.path())) {
      std::smatch m;
      auto name = run_dir.path().filename().string();
      if (!run_dir.is_directory() || !std::regex_match(name, m, run_re)) continue;
      auto rec_path = run_dir.path() / "recommendation.json";
      if (!fs::exists(rec_path)) continue;
      std::ifstream in(rec_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(rec_path.string() + ": " + e.what());
      }
      std::optional<double> v;
      const char* key = metric == ReportMetric::holdout ? "holdout_auc" : "training_auc";
      if (!j.value("failed", false) && j.contains(key) && j[key].is_number()) v = j[key].get<double>();
      runs[std::stoul(m[1].str())] = v;
    }
    if (runs.empty()) continue;
    auto& values = t.per_project[project_dir.path().filename().string()];
    values.assign(runs.rbegin()->first + 1, std::nullopt);
    for (auto& [i, v] : runs) values[i] = v;
  }
  if (t.per_project.empty()) throw DataError("no recommendations found under '" + dir.string() + "'");
  return t;
}

ComparisonReport compare_techniques(const std::vector<TechniqueResults>& techniques) {
  ComparisonReport report;
  std::set<std::string> ids;
  for (const auto& t : techniques) {
    if (!ids.insert(t.id).second) throw ConfigError("technique '" + t.id + "' given twice");
    report.techniques.push_back(t.id);
  }
  if (techniques.size() < 2) report.notices.push_back("single technique: statistical tests skipped");

  std::set<std::string> projects;
  for (const auto& t : techniques)
    for (const auto& kv : t.per_project) projects.insert(kv.first);

  for (const auto& project : projects) {
    ProjectSummary s;
    s.project = project;
    std::vector<SampleSet> samples;
    bool pairable = techniques.size() >= 2;
    std::optional<std::size_t> length;
    for (const auto& t : techniques) {
      auto it = t.per_project.find(project);
      std::vector<double> values;
      bool complete = it != t.per_project.end();
      if (it != t.per_project.end())
        for (const auto& v : it->second) {
          if (v)
            values.push_back(*v);
          else
            complete = false;
        }
      s.mean[t.id] = mean(values);
      s.stddev[t.id] = stddev(values);
      s.count[t.id] = values.size();
      if (!complete || values.size() < 2 || (length && *length != values.size())) pairable = false;
      length = values.size();
      samples.push_back({t.id, std::move(values)});
    }
    if (techniques.size() >= 2 && !pairable)
      s.notices.push_back(project + ": repeat counts differ or runs failed; paired tests refused");
    if (pairable) {
      s.ranks = scott_knott(samples);
      for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = i + 1; j < samples.size(); ++j)
          s.pairwise.push_back({project, samples[i].id, samples[j].id,
                                wilcoxon_signed_rank(samples[i].values, samples[j].values).p_value,
                                a12(samples[i].values, samples[j].values)});
    }
    for (const auto& n : s.notices) report.notices.push_back(n);
    report.projects.push_back(std::move(s));
  }
  return report;
}

std::string ComparisonReport::markdown() const {
  std::ostringstream o;
  o << "# Technique comparison\n\n";
  o << "## Mean AUC (stddev)\n\n| project |";
  for (const auto& t : techniques) o << ' ' << t << " |";
  o << "\n|---|";
  for (std::size_t i = 0; i < techniques.size(); ++i) o << "---|";
  o << '\n';
  for (const auto& p : projects) {
    o << "| " << p.project << " |";
    for (const auto& t : techniques) {
      if (p.count.at(t) == 0)
        o << " n/a |";
      else
        o << ' ' << num(p.mean.at(t)) << " (" << num(p.stddev.at(t)) << ") |";
    }
    o << '\n';
  }
  bool any_ranks = std::any_of(projects.begin(), projects.end(), [](const auto& p) { return p.ranks.has_value(); });
  if (any_ranks) {
    o << "\n## Scott-Knott ranks (larger is better)\n\n| project |";
    for (const auto& t : techniques) o << ' ' << t << " |";
    o << "\n|---|";
    for (std::size_t i = 0; i < techniques.size(); ++i) o << "---|";
    o << '\n';
    for (const auto& p : projects) {
      if (!p.ranks) continue;
      o << "| " << p.project << " |";
      for (const auto& t : techniques) o << ' ' << p.ranks->rank_of(t) << " |";
      o << '\n';
    }
    o << "\n## Pairwise Wilcoxon signed-rank p and A12\n\n| project | a | b | p | A12(a,b) |\n|---|---|---|---|---|\n";
    for (const auto& p : projects)
      for (const auto& r : p.pairwise)
        o << "| " << r.project << " | " << r.a << " | " << r.b << " | " << sci(r.p_value) << " | " << num(r.a12, 3)
          << " |\n";
  }
  if (!notices.empty()) {
    o << "\n## Notices\n\n";
    for (const auto& n : notices) o << "- " << n << '\n';
  }
  return o.str();
}

std::string ComparisonReport::means_csv() const {
  std::ostringstream o;
  o << "project,technique,n,mean,stddev\n";
  for (const auto& p : projects)
    for (const auto& t : techniques)
      o << p.project << ',' << t << ',' << p.count.at(t) << ',' << num(p.mean.at(t), 6) << ','
        << num(p.stddev.at(t), 6) << '\n';
  return o.str();
}

std::string ComparisonReport::pairwise_csv() const {
  std::ostringstream o;
  o << "project,a,b,p_value,a12\n";
  for (const auto& p : projects)
    for (const auto& r : p.pairwise)
      o << r.project << ',' << r.a << ',' << r.b << ',' << sci(r.p_value) << ',' << num(r.a12, 6) << '\n';
  return o.str();
}

std::string ComparisonReport::ranks_csv() const {
  std::ostringstream o;
  o << "project,technique,rank\n";
  for (const auto& p : projects) {
    if (!p.ranks) continue;
    for (const auto& t : techniques) o << p.project << ',' << t << ',' << p.ranks->rank_of(t) << '\n';
  }
  return o.str();
}

std::string ComparisonReport::rank_chart_svg() const {
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  std::vector<const ProjectSummary*> ranked;
  int max_rank = 1;
  for (const auto& p : projects)
    if (p.ranks) {
      ranked.push_back(&p);
      for (const auto& kv : p.ranks->rank) max_rank = std::max(max_rank, kv.second);
    }
  const double bar = 18.0, gap = 24.0, left = 50.0, top = 30.0, height = 200.0;
  const double group = bar * static_cast<double>(techniques.size()) + gap;
  const double width = left + group * static_cast<double>(std::max<std::size_t>(1, ranked.size())) + 20.0;
  const double legend_y = top + height + 45.0;
  const double total_h = legend_y + 20.0 * static_cast<double>(techniques.size()) + 10.0;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width, 0) << "\" height=\"" << num(total_h, 0)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<text x=\"" << num(left, 0) << "\" y=\"18\" font-size=\"13\">Scott-Knott rank per project (larger is better)</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << num(width - 10, 0) << "\" y2=\""
    << top + height << "\" stroke=\"black\"/>\n";
  for (int r = 0; r <= max_rank; ++r) {
    double y = top + height - height * r / max_rank;
    o << "<text x=\"" << left - 8 << "\" y=\"" << num(y + 4, 1) << "\" text-anchor=\"end\">" << r << "</text>\n";
  }
  for (std::size_t g = 0; g < ranked.size(); ++g) {
    double x0 = left + gap / 2 + group * static_cast<double>(g);
    for (std::size_t i = 0; i < techniques.size(); ++i) {
      int r = ranked[g]->ranks->rank_of(techniques[i]);
      double h = height * r / max_rank;
      o << "<rect x=\"" << num(x0 + bar * static_cast<double>(i), 1) << "\" y=\"" << num(top + height - h, 1)
        << "\" width=\"" << bar - 2 << "\" height=\"" << num(h, 1) << "\" fill=\"" << palette[i % 10] << "\"/>\n";
    }
    o << "<text x=\"" << num(x0 + (group - gap) / 2, 1) << "\" y=\"" << top + height + 16
      << "\" text-anchor=\"middle\">" << xml_escape(ranked[g]->project) << "</text>\n";
  }
  for (std::size_t i = 0; i < techniques.size(); ++i) {
    double y = legend_y + 20.0 * static_cast<double>(i);
    o << "<rect x=\"" << left << "\" y=\"" << num(y - 10, 1) << "\" width=\"12\" height=\"12\" fill=\"" << palette[i % 10]
      << "\"/>\n<text x=\"" << left + 18 << "\" y=\"" << num(y, 1) << "\">" << xml_escape(techniques[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_report(const ComparisonReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "report.md", report.markdown());
  write_file(dir / "means.csv", report.means_csv());
  write_file(dir / "pairwise.csv", report.pairwise_csv());
  write_file(dir / "ranks.csv", report.ranks_csv());
  write_file(dir / "ranks.svg", report.rank_chart_svg());
}

}  // namespace bilo
