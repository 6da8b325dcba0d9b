#include "bilo/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "bilo/error.hpp"
#include "bilo/learners.hpp"

namespace bilo {

std::vector<double> FeatureMap::apply(std::span<const double> x) const {
  if (x.size() != input_width)
    throw InputError("feature map expects width " + std::to_string(input_width) + ", got " + std::to_string(x.size()));
  std::vector<double> z(input_width);
  for (std::size_t j = 0; j < input_width; ++j) z[j] = (x[j] - mean[j]) / scale[j];
  std::vector<double> out(output_width, 0.0);
  for (std::size_t c = 0; c < output_width; ++c)
    for (std::size_t j = 0; j < input_width; ++j) out[c] += components[c * input_width + j] * z[j];
  return out;
}

Instance FeatureMap::apply(const Instance& inst) const {
  return {apply(inst.features), inst.label, inst.uid};
}

namespace {

constexpr std::string_view kNative[] = {"identity", "NNfilter", "TD", "PCAmining"};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix standardized(std::span<const Instance> data, const Standardizer& s) {
  const std::size_t d = s.mean.size();
  RowMatrix m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.size() != d) throw InputError("inconsistent feature width between source and target");
    for (std::size_t j = 0; j < d; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (data[i].features[j] - s.mean[j]) / s.scale[j];
  }
  return m;
}

std::size_t clamp_count(std::int64_t requested, std::size_t available, std::string_view name,
                        std::vector<std::string>& clamped) {
  if (requested < 1) throw InputError(std::string(name) + " must be >= 1");
  if (static_cast<std::size_t>(requested) > available) {
    clamped.push_back(std::string(name) + " clamped from " + std::to_string(requested) + " to " +
                      std::to_string(available));
    return available;
  }
  return static_cast<std::size_t>(requested);
}

// Indices of the k rows of `points` closest to `query`; ties go to the lower index.
std::vector<std::size_t> nearest(const RowMatrix& points, const Eigen::RowVectorXd& query, std::size_t k,
                                 const std::string& metric) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::RowVectorXd diff = points.row(static_cast<Eigen::Index>(i)) - query;
    double v;
    if (metric == "Euc" || metric == "Mah")
      v = diff.squaredNorm();
    else if (metric == "Man")
      v = diff.cwiseAbs().sum();
    else if (metric == "Che")
      v = diff.cwiseAbs().maxCoeff();
    else  // "Min", order 3
      v = diff.cwiseAbs().array().cube().sum();
    dist[i] = {v, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

// Instances of `source` at the selected indices, in source order, deduplicated
// on exact feature tuples.
std::vector<Instance> select_rows(std::span<const Instance> source, const std::vector<bool>& selected) {
  std::vector<Instance> out;
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < source.size(); ++i)
    if (selected[i] && seen.insert(source[i].features).second) out.push_back(source[i]);
  return out;
}

AdaptedData nn_filter(const Configuration& config, std::span<const Instance> source,
                      std::span<const Instance> target) {
  AdaptedData out;
  const auto& metric = config.get_choice("metric");
  static const std::set<std::string> metrics = {"Euc", "Man", "Che", "Min", "Mah"};
  if (metrics.count(metric) == 0) throw InputError("NNfilter.metric '" + metric + "' unknown");
  std::size_t k = clamp_count(config.get_int("k"), source.size(), "NNfilter.k", out.clamped);

  auto s = Standardizer::fit(source);
  RowMatrix src = standardized(source, s);
  RowMatrix tgt = standardized(target, s);
  if (metric == "Mah") {
    // Whitening with the ridge-regularized pooled source covariance turns
    // Mahalanobis distance into Euclidean distance.
    const double n = static_cast<double>(src.rows());
    Eigen::RowVectorXd mu = src.colwise().mean();
    RowMatrix centered = src.rowwise() - mu;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / n;
    double ridge = 1e-6 * cov.trace() / static_cast<double>(cov.rows());
    if (!(ridge > 0.0)) ridge = 1e-6;
    cov.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
    src = src * linv.transpose();
    tgt = tgt * linv.transpose();
  }

  std::vector<bool> selected(source.size(), false);
  for (Eigen::Index t = 0; t < tgt.rows(); ++t)
    for (auto i : nearest(src, tgt.row(t), k, metric)) selected[i] = true;
  out.instances = select_rows(source, selected);
  return out;
}

AdaptedData td_filter(const Configuration& config, std::span<const Instance> source,
                      std::span<const Instance> target) {
  AdaptedData out;
  const auto& strategy = config.get_choice("strategy");
  if (strategy != "NN") throw UnsupportedError("TD.strategy '" + strategy + "' unsupported; supported: NN");
  std::size_t k = clamp_count(config.get_int("k"), source.size(), "TD.k", out.clamped);
  auto s = Standardizer::fit(source);
  RowMatrix src = standardized(source, s);
  RowMatrix tgt = standardized(target, s);
  Eigen::RowVectorXd centroid = tgt.colwise().mean();
  std::vector<bool> selected(source.size(), false);
  for (auto i : nearest(src, centroid, k, "Euc")) selected[i] = true;
  out.instances = select_rows(source, selected);
  return out;
}

AdaptedData pca_mining(const Configuration& config, std::span<const Instance> source,
                       std::span<const Instance> target) {
  AdaptedData out;
  const std::size_t width = source.front().features.size();
  std::size_t dims = clamp_count(config.get_int("dime"), width, "PCAmining.dime", out.clamped);

  std::vector<Instance> pooled(source.begin(), source.end());
  for (const auto& t : target) pooled.push_back({t.features, 0, t.uid});
  auto s = Standardizer::fit(pooled);
  RowMatrix z = standardized(pooled, s);
  Eigen::RowVectorXd mu = z.colwise().mean();
  RowMatrix centered = z.rowwise() - mu;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(z.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  FeatureMap map;
  map.mean = s.mean;
  map.scale = s.scale;
  map.input_width = width;
  map.output_width = dims;
  map.components.resize(width * dims);
  for (std::size_t c = 0; c < dims; ++c) {
    // Eigenvalues come in ascending order.
    Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(width - 1 - c));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t j = 0; j < width; ++j) map.components[c * width + j] = v(static_cast<Eigen::Index>(j));
  }
  out.instances.reserve(source.size());
  for (const auto& inst : source) out.instances.push_back(map.apply(inst));
  out.feature_map = std::move(map);
  return out;
}

}  // namespace

bool is_native_transfer(std::string_view id) {
  return std::find(std::begin(kNative), std::end(kNative), id) != std::end(kNative);
}

std::optional<std::vector<std::string>> native_transfer_choices(std::string_view id, std::string_view param) {
  if (id == "TD" && param == "strategy") return std::vector<std::string>{"NN"};
  return std::nullopt;
}

bool needs_target(std::string_view transfer_id) {
  if (transfer_id == "identity") return false;
  if (transfer_id == "NNfilter" || transfer_id == "TD" || transfer_id == "PCAmining") return true;
  throw InputError("unknown transfer learner '" + std::string(transfer_id) + "'");
}

AdaptedData adapt(std::string_view transfer_id, const Configuration& config, std::span<const Instance> source,
                  std::span<const Instance> target_train, Rng& rng) {
  (void)rng;  // the native learners are deterministic
  if (!is_native_transfer(transfer_id))
    throw UnsupportedError("transfer learner '" + std::string(transfer_id) +
                           "' is not implemented; native transfer learners: identity, NNfilter, TD, PCAmining");
  if (source.empty()) throw InputError("adapt needs a non-empty source");
  bool needs = needs_target(transfer_id);
  if (needs && target_train.empty())
    throw InputError(std::string(transfer_id) + " needs target training instances");

  if (transfer_id == "identity") {
    AdaptedData out;
    out.instances.assign(source.begin(), source.end());
    return out;
  }
  if (transfer_id == "NNfilter") return nn_filter(config, source, target_train);
  if (transfer_id == "TD") return td_filter(config, source, target_train);
  return pca_mining(config, source, target_train);
}

}  // namespace bilo
