#include <algorithm>
#include <cmath>
#include <numeric>

#include "bilo/detail/classifiers.hpp"
#include "bilo/error.hpp"

namespace bilo::detail {
namespace {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // fraction of positives
};

double impurity(double pos, double n, bool entropy) {
  if (n <= 0.0) return 0.0;
  double p = pos / n;
  if (entropy) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
  }
  return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingMatrix& data, const TreeOptions& opt, Rng& rng) : data_(data), opt_(opt), rng_(rng) {}

  std::vector<Node> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, int depth) {
    const double n = static_cast<double>(rows.size());
    double pos = 0.0;
    for (auto r : rows) pos += data_.y[r];
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].value = pos / n;

    if (pos == 0.0 || pos == n || depth >= opt_.max_depth || rows.size() < static_cast<std::size_t>(opt_.min_samples_split))
      return id;

    auto features = candidate_features();
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, std::size_t>> sorted(rows.size());
    const auto min_leaf = static_cast<std::size_t>(std::max(1, opt_.min_samples_leaf));

    for (std::size_t f : features) {
      for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {data_.x[rows[i] * data_.cols + f], rows[i]};
      std::sort(sorted.begin(), sorted.end());
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_pos += data_.y[sorted[i].second];
        if (sorted[i].first == sorted[i + 1].first) continue;
        std::size_t nl = i + 1, nr = sorted.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        double score = (static_cast<double>(nl) * impurity(left_pos, static_cast<double>(nl), opt_.entropy) +
                        static_cast<double>(nr) * impurity(pos - left_pos, static_cast<double>(nr), opt_.entropy)) /
                       n;
        // Strict improvement keeps the lowest feature index, then the lowest threshold.
        if (score < best_score - 1e-12) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (data_.x[r * data_.cols + best_feature] <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    int l = grow(left, depth + 1);
    int rr = grow(right, depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = rr;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> all(data_.cols);
    std::iota(all.begin(), all.end(), 0);
    if (opt_.max_features == 0 || opt_.max_features >= data_.cols) return all;
    for (std::size_t i = 0; i < opt_.max_features; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng_)]);
    }
    all.resize(opt_.max_features);
    std::sort(all.begin(), all.end());
    return all;
  }

  const TrainingMatrix& data_;
  const TreeOptions& opt_;
  Rng& rng_;
  std::vector<Node> nodes_;
};

class TreeModel final : public ClassifierModel {
 public:
  explicit TreeModel(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> z) const override {
    int i = 0;
    while (nodes_[i].feature >= 0) i = z[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return nodes_[i].value;
  }

 private:
  std::vector<Node> nodes_;
};

class BaggingModel final : public ClassifierModel {
 public:
  struct Member {
    std::vector<std::size_t> columns;
    std::shared_ptr<const ClassifierModel> tree;
  };

  explicit BaggingModel(std::vector<Member> members) : members_(std::move(members)) {}

  double predict(std::span<const double> z) const override {
    double s = 0.0;
    std::vector<double> sub;
    for (const auto& m : members_) {
      sub.resize(m.columns.size());
      for (std::size_t j = 0; j < m.columns.size(); ++j) sub[j] = z[m.columns[j]];
      s += m.tree->predict(sub);
    }
    return s / static_cast<double>(members_.size());
  }

 private:
  std::vector<Member> members_;
};

}  // namespace

std::shared_ptr<const ClassifierModel> make_tree(const TrainingMatrix& data, std::span<const std::size_t> rows,
                                                 const TreeOptions& options, Rng& rng) {
  if (rows.empty()) throw InputError("decision tree needs at least one row");
  TreeBuilder builder(data, options, rng);
  return std::make_shared<TreeModel>(builder.build({rows.begin(), rows.end()}));
}

std::shared_ptr<const ClassifierModel> make_bagging(const TrainingMatrix& data, int n_estimators, double max_samples,
                                                    double max_features, Rng& rng) {
  const std::size_t n_rows =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(max_samples * static_cast<double>(data.rows))));
  const std::size_t n_cols =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(max_features * static_cast<double>(data.cols))));
  std::vector<BaggingModel::Member> members;
  members.reserve(static_cast<std::size_t>(n_estimators));
  std::uniform_int_distribution<std::size_t> row_pick(0, data.rows - 1);
  TreeOptions opt;

  for (int e = 0; e < n_estimators; ++e) {
    std::vector<std::size_t> cols(data.cols);
    std::iota(cols.begin(), cols.end(), 0);
    for (std::size_t i = 0; i < n_cols; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cols.size() - 1);
      std::swap(cols[i], cols[pick(rng)]);
    }
    cols.resize(n_cols);
    std::sort(cols.begin(), cols.end());

    std::vector<std::size_t> sample(n_rows);
    for (auto& r : sample) r = row_pick(rng);
    std::sort(sample.begin(), sample.end());
    // Compact the bootstrap into its own matrix; duplicated rows keep their weight.
    TrainingMatrix sub;
    sub.rows = n_rows;
    sub.cols = n_cols;
    sub.x.reserve(n_rows * n_cols);
    for (auto r : sample) {
      for (auto c : cols) sub.x.push_back(data.x[r * data.cols + c]);
      sub.y.push_back(data.y[r]);
    }
    std::vector<std::size_t> idx(n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    members.push_back({std::move(cols), make_tree(sub, idx, opt, rng)});
  }
  return std::make_shared<BaggingModel>(std::move(members));
}

}  // namespace bilo::detail
