#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace bilo {

enum class WilcoxonMethod { exact, normal, none };

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n_used = 0;     // pairs left after dropping zero differences
  std::size_t n_dropped = 0;  // zero differences
  WilcoxonMethod method = WilcoxonMethod::none;
  bool all_zero = false;
};

inline constexpr std::size_t kExactWilcoxonLimit = 20;

// Two-sided paired signed-rank test. Zero differences are dropped, tied
// absolute differences get average ranks. Exact null distribution for up to
// kExactWilcoxonLimit pairs, normal approximation with continuity and tie
// correction above. Throws InputError on unequal lengths.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method);

// Vargha-Delaney effect size: probability that a draw from `a` exceeds one
// from `b`, ties counted half.
double a12(std::span<const double> a, std::span<const double> b);

struct SampleSet {
  std::string id;
  std::vector<double> values;
};

struct RankTable {
  std::map<std::string, int> rank;  // larger is better
  std::vector<std::vector<std::string>> clusters;  // ordered from worst to best
  int rank_of(const std::string& id) const { return rank.at(id); }
};

struct ScottKnottSettings {
  double alpha = 0.05;
  double min_effect = 0.56;
};

// Orders techniques by mean and splits recursively at the boundary with the
// largest between-group sum of squares. A split is kept only when the two
// techniques adjacent to the boundary differ significantly and the better one
// has A12 >= min_effect over the other.
RankTable scott_knott(std::vector<SampleSet> samples, const ScottKnottSettings& settings = {});

double mean(std::span<const double> v);
double stddev(std::span<const double> v);  // sample standard deviation; 0 for fewer than two values

}  // namespace bilo
