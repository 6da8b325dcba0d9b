#include "bilo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "bilo/error.hpp"

namespace bilo {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

struct SignedRanks {
  std::vector<std::int64_t> twice_rank;  // average ranks doubled, always integral
  std::vector<bool> positive;
  std::vector<std::size_t> tie_sizes;
  std::size_t dropped = 0;
};

SignedRanks rank_differences(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("wilcoxon: samples differ in length");
  std::vector<double> d;
  SignedRanks out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a[i] - b[i];
    if (x == 0.0)
      ++out.dropped;
    else
      d.push_back(x);
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  out.twice_rank.assign(d.size(), 0);
  out.positive.assign(d.size(), false);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    // Ranks i+1..j share their average (i+1+j)/2.
    auto tr = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      out.twice_rank[order[k]] = tr;
      out.positive[order[k]] = d[order[k]] > 0.0;
    }
    out.tie_sizes.push_back(j - i);
    i = j;
  }
  return out;
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  return wilcoxon_signed_rank(a, b, WilcoxonMethod::none);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
  auto ranks = rank_differences(a, b);
  WilcoxonResult r;
  r.n_dropped = ranks.dropped;
  r.n_used = ranks.twice_rank.size();
  if (r.n_used == 0) {
    r.all_zero = true;
    r.p_value = 1.0;
    return r;
  }
  std::int64_t twice_plus = 0, twice_total = 0;
  for (std::size_t i = 0; i < r.n_used; ++i) {
    twice_total += ranks.twice_rank[i];
    if (ranks.positive[i]) twice_plus += ranks.twice_rank[i];
  }
  r.w_plus = static_cast<double>(twice_plus) / 2.0;
  r.w_minus = static_cast<double>(twice_total - twice_plus) / 2.0;
  if (method == WilcoxonMethod::none)
    method = r.n_used <= kExactWilcoxonLimit ? WilcoxonMethod::exact : WilcoxonMethod::normal;
  r.method = method;

  if (method == WilcoxonMethod::exact) {
    // counts[s] = number of sign assignments whose doubled W+ equals s.
    std::vector<double> counts(static_cast<std::size_t>(twice_total) + 1, 0.0);
    counts[0] = 1.0;
    std::int64_t reach = 0;
    for (auto tr : ranks.twice_rank) {
      for (std::int64_t s = reach; s >= 0; --s)
        if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + tr)] += counts[static_cast<std::size_t>(s)];
      reach += tr;
    }
    std::int64_t t = std::min(twice_plus, twice_total - twice_plus);
    double tail = 0.0;
    for (std::int64_t s = 0; s <= t; ++s) tail += counts[static_cast<std::size_t>(s)];
    double total = std::ldexp(1.0, static_cast<int>(r.n_used));
    r.p_value = std::min(1.0, 2.0 * tail / total);
    return r;
  }

  const double n = static_cast<double>(r.n_used);
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  for (auto t : ranks.tie_sizes) {
    double tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  if (!(var > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  double dev = std::abs(r.w_plus - n * (n + 1.0) / 4.0);
  double z = std::max(0.0, dev - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(2.0 * normal_upper_tail(z), std::numeric_limits<double>::min(), 1.0);
  return r;
}

double a12(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("a12: empty sample");
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sb.begin(), sb.end());
  std::uint64_t wins = 0, ties = 0;
  for (double x : a) {
    auto lo = std::lower_bound(sb.begin(), sb.end(), x);
    auto hi = std::upper_bound(lo, sb.end(), x);
    wins += static_cast<std::uint64_t>(lo - sb.begin());
    ties += static_cast<std::uint64_t>(hi - lo);
  }
  const std::uint64_t pairs = a.size() * b.size();
  const std::uint64_t losses = pairs - wins - ties;
  const double denom = 2.0 * static_cast<double>(pairs);
  // Evaluate from the side at or above one half so that a12(a,b) + a12(b,a)
  // sums to one without rounding error.
  if (wins >= losses) return static_cast<double>(2 * wins + ties) / denom;
  return 1.0 - static_cast<double>(2 * losses + ties) / denom;
}

namespace {

void split(const std::vector<SampleSet>& s, const std::vector<double>& means, std::size_t lo, std::size_t hi,
           const ScottKnottSettings& settings, std::vector<std::pair<std::size_t, std::size_t>>& out) {
  if (hi - lo < 2) {
    out.emplace_back(lo, hi);
    return;
  }
  auto weight = [&](std::size_t i) { return static_cast<double>(s[i].values.size()); };
  double n_all = 0.0, sum_all = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    n_all += weight(i);
    sum_all += weight(i) * means[i];
  }
  const double mu = sum_all / n_all;
  std::size_t best_k = lo + 1;
  double best_ss = -1.0;
  double n_left = 0.0, sum_left = 0.0;
  for (std::size_t k = lo + 1; k < hi; ++k) {
    n_left += weight(k - 1);
    sum_left += weight(k - 1) * means[k - 1];
    double n_right = n_all - n_left, sum_right = sum_all - sum_left;
    double ml = sum_left / n_left, mr = sum_right / n_right;
    double ss = n_left * (ml - mu) * (ml - mu) + n_right * (mr - mu) * (mr - mu);
    if (ss > best_ss) {
      best_ss = ss;
      best_k = k;
    }
  }
  const auto& lower = s[best_k - 1].values;
  const auto& upper = s[best_k].values;
  bool accept = wilcoxon_signed_rank(upper, lower).p_value < settings.alpha && a12(upper, lower) >= settings.min_effect;
  if (!accept) {
    out.emplace_back(lo, hi);
    return;
  }
  split(s, means, lo, best_k, settings, out);
  split(s, means, best_k, hi, settings, out);
}

}  // namespace

RankTable scott_knott(std::vector<SampleSet> samples, const ScottKnottSettings& settings) {
  if (samples.empty()) throw InputError("scott_knott: no techniques");
  for (const auto& s : samples) {
    if (s.values.size() != samples.front().values.size())
      throw InputError("scott_knott: techniques have different repeat counts");
    if (s.values.size() < 2) throw InputError("scott_knott: technique '" + s.id + "' needs at least two repeats");
  }
  std::sort(samples.begin(), samples.end(), [](const SampleSet& x, const SampleSet& y) {
    double mx = mean(x.values), my = mean(y.values);
    return mx != my ? mx < my : x.id < y.id;
  });
  std::vector<double> means;
  for (const auto& s : samples) means.push_back(mean(s.values));

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  split(samples, means, 0, samples.size(), settings, ranges);
  RankTable table;
  int rank = 0;
  for (auto [lo, hi] : ranges) {
    ++rank;
    std::vector<std::string> members;
    for (std::size_t i = lo; i < hi; ++i) {
      members.push_back(samples[i].id);
      table.rank[samples[i].id] = rank;
    }
    table.clusters.push_back(std::move(members));
  }
  return table;
}

}  // namespace bilo
