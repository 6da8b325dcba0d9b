#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bilo/stats.hpp"

namespace bilo {

// One technique's results: per project, one value per repeat index
// (nullopt for a failed run).
struct TechniqueResults {
  std::string id;
  std::map<std::string, std::vector<std::optional<double>>> per_project;
};

enum class ReportMetric { holdout, training };

// Reads `<dir>/<project>/run_<i>/recommendation.json` files written by the
// optimize command. The technique id is the directory name.
TechniqueResults load_technique(const std::filesystem::path& dir, ReportMetric metric = ReportMetric::holdout);

struct PairwiseRow {
  std::string project;
  std::string a;
  std::string b;
  double p_value = 1.0;
  double a12 = 0.5;
};

struct ProjectSummary {
  std::string project;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;
  std::map<std::string, std::size_t> count;
  std::optional<RankTable> ranks;  // missing when paired tests were refused
  std::vector<PairwiseRow> pairwise;
  std::vector<std::string> notices;
};

struct ComparisonReport {
  std::vector<std::string> techniques;
  std::vector<ProjectSummary> projects;
  std::vector<std::string> notices;

  std::string markdown() const;
  std::string means_csv() const;
  std::string pairwise_csv() const;
  std::string ranks_csv() const;
  std::string rank_chart_svg() const;
};

// Paired tests run only when every technique has the same number of
// successful repeats for a project; otherwise only means are reported.
ComparisonReport compare_techniques(const std::vector<TechniqueResults>& techniques);

// Writes report.md, means.csv, pairwise.csv, ranks.csv and ranks.svg.
void write_report(const ComparisonReport& report, const std::filesystem::path& dir);

}  // namespace bilo
