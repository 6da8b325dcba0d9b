#include "bilo/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bilo/detail/classifiers.hpp"
#include "bilo/error.hpp"

namespace bilo {

Standardizer Standardizer::fit(std::span<const Instance> data) {
  Standardizer s;
  if (data.empty()) return s;
  const std::size_t d = data.front().features.size();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& inst : data)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += inst.features[j];
  for (auto& m : s.mean) m /= static_cast<double>(data.size());
  for (const auto& inst : data)
    for (std::size_t j = 0; j < d; ++j) {
      double c = inst.features[j] - s.mean[j];
      s.scale[j] += c * c;
    }
  for (auto& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(data.size()));
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
  return z;
}

TrainedModel::TrainedModel(std::string classifier_id, std::size_t width, Standardizer standardizer,
                           std::shared_ptr<const detail::ClassifierModel> model, bool degenerate)
    : classifier_id_(std::move(classifier_id)),
      width_(width),
      standardizer_(std::move(standardizer)),
      model_(std::move(model)),
      degenerate_(degenerate) {}

double TrainedModel::predict_proba(std::span<const double> features) const {
  if (features.size() != width_)
    throw InputError("feature width " + std::to_string(features.size()) + " does not match model width " +
                     std::to_string(width_));
  auto z = standardizer_.apply(features);
  return std::clamp(model_->predict(z), 0.0, 1.0);
}

std::vector<double> TrainedModel::predict_proba(std::span<const Instance> data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& inst : data) out.push_back(predict_proba(inst.features));
  return out;
}

std::vector<double> TrainedModel::ranking_scores(std::span<const Instance> data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    if (inst.features.size() != width_)
      throw InputError("feature width " + std::to_string(inst.features.size()) + " does not match model width " +
                       std::to_string(width_));
    out.push_back(model_->score(standardizer_.apply(inst.features)));
  }
  return out;
}

namespace detail {
namespace {

class ConstantModel final : public ClassifierModel {
 public:
  explicit ConstantModel(double p) : p_(p) {}
  double predict(std::span<const double>) const override { return p_; }

 private:
  double p_;
};

class GaussianNb final : public ClassifierModel {
 public:
  GaussianNb(const TrainingMatrix& data) : d_(data.cols) {
    double max_var = 0.0;
    {
      std::vector<double> mean(d_, 0.0), var(d_, 0.0);
      for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < d_; ++j) mean[j] += data.row(i)[j];
      for (auto& m : mean) m /= static_cast<double>(data.rows);
      for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < d_; ++j) {
          double c = data.row(i)[j] - mean[j];
          var[j] += c * c;
        }
      for (auto& v : var) max_var = std::max(max_var, v / static_cast<double>(data.rows));
    }
    double floor = 1e-9 * (max_var > 0.0 ? max_var : 1.0);

    for (int c = 0; c < 2; ++c) {
      mean_[c].assign(d_, 0.0);
      var_[c].assign(d_, 0.0);
    }
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < data.rows; ++i) {
      int c = data.y[i];
      ++count[c];
      for (std::size_t j = 0; j < d_; ++j) mean_[c][j] += data.row(i)[j];
    }
    for (int c = 0; c < 2; ++c)
      for (auto& m : mean_[c]) m /= static_cast<double>(count[c]);
    for (std::size_t i = 0; i < data.rows; ++i) {
      int c = data.y[i];
      for (std::size_t j = 0; j < d_; ++j) {
        double r = data.row(i)[j] - mean_[c][j];
        var_[c][j] += r * r;
      }
    }
    for (int c = 0; c < 2; ++c) {
      for (auto& v : var_[c]) v = v / static_cast<double>(count[c]) + floor;
      log_prior_[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(data.rows));
    }
  }

  double log_likelihood(std::span<const double> z, int c) const {
    double s = log_prior_[c];
    for (std::size_t j = 0; j < d_; ++j) {
      double r = z[j] - mean_[c][j];
      s -= 0.5 * std::log(2.0 * M_PI * var_[c][j]) + r * r / (2.0 * var_[c][j]);
    }
    return s;
  }

  double predict(std::span<const double> z) const override {
    return 1.0 / (1.0 + std::exp(log_likelihood(z, 0) - log_likelihood(z, 1)));
  }

  double score(std::span<const double> z) const override { return log_likelihood(z, 1) - log_likelihood(z, 0); }

 private:
  std::size_t d_;
  std::vector<double> mean_[2];
  std::vector<double> var_[2];
  double log_prior_[2] = {0.0, 0.0};
};

class LogisticModel final : public ClassifierModel {
 public:
  explicit LogisticModel(LogisticFit fit) : fit_(std::move(fit)) {}
  double score(std::span<const double> z) const override {
    double s = fit_.intercept;
    for (std::size_t j = 0; j < z.size(); ++j) s += fit_.weights[j] * z[j];
    return s;
  }
  double predict(std::span<const double> z) const override { return 1.0 / (1.0 + std::exp(-score(z))); }

 private:
  LogisticFit fit_;
};

class KnnModel final : public ClassifierModel {
 public:
  KnnModel(const TrainingMatrix& data, std::size_t k, int p) : data_(data), k_(std::min(k, data.rows)), p_(p) {}

  double predict(std::span<const double> z) const override {
    std::vector<std::pair<double, std::size_t>> dist(data_.rows);
    for (std::size_t i = 0; i < data_.rows; ++i) dist[i] = {minkowski(z, data_.row(i), p_), i};
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_ - 1), dist.end());
    std::size_t votes = 0;
    for (std::size_t i = 0; i < k_; ++i) votes += static_cast<std::size_t>(data_.y[dist[i].second]);
    return static_cast<double>(votes) / static_cast<double>(k_);
  }

 private:
  TrainingMatrix data_;
  std::size_t k_;
  int p_;
};

}  // namespace

double minkowski(std::span<const double> a, std::span<const double> b, int p) {
  double s = 0.0;
  switch (p) {
    case 1:
      for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
      return s;
    case 2:
      for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
      return std::sqrt(s);
    default:
      for (std::size_t j = 0; j < a.size(); ++j) s += std::pow(std::abs(a[j] - b[j]), p);
      return std::pow(s, 1.0 / p);
  }
}

std::shared_ptr<const ClassifierModel> make_gaussian_nb(const TrainingMatrix& data) {
  return std::make_shared<GaussianNb>(data);
}

std::shared_ptr<const ClassifierModel> make_logistic(const LogisticFit& fit) {
  return std::make_shared<LogisticModel>(fit);
}

std::shared_ptr<const ClassifierModel> make_knn(const TrainingMatrix& data, std::size_t k, int p) {
  if (k == 0) throw InputError("KNN needs k >= 1");
  return std::make_shared<KnnModel>(data, k, p);
}

std::shared_ptr<const ClassifierModel> make_constant(double p) { return std::make_shared<ConstantModel>(p); }

}  // namespace detail

namespace {

constexpr std::string_view kNative[] = {"NB", "LR", "KNN", "DT", "Bagging"};

bool parse_bool_choice(const std::string& v, const std::string& name) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw InputError("parameter '" + name + "' must be true or false");
}

std::size_t features_for_splitter(const std::string& splitter, std::size_t d) {
  if (splitter == "auto") return d;
  if (splitter == "sqrt") return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  if (splitter == "log2")
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(static_cast<double>(std::max<std::size_t>(d, 1)))));
  throw UnsupportedError("DT.splitter '" + splitter + "' unsupported; supported: auto, sqrt, log2");
}

}  // namespace

bool is_native_classifier(std::string_view id) {
  return std::find(std::begin(kNative), std::end(kNative), id) != std::end(kNative);
}

std::optional<std::vector<std::string>> native_classifier_choices(std::string_view id, std::string_view param) {
  if (id == "NB" && param == "NBType") return std::vector<std::string>{"gauss"};
  return std::nullopt;
}

TrainedModel train(std::string_view classifier_id, const Configuration& config, std::span<const Instance> data,
                   Rng& rng) {
  if (!is_native_classifier(classifier_id))
    throw UnsupportedError("classifier '" + std::string(classifier_id) +
                           "' is not implemented; native classifiers: NB, LR, KNN, DT, Bagging");
  if (data.empty()) throw InputError("cannot train on empty data");
  const std::size_t d = data.front().features.size();

  auto standardizer = Standardizer::fit(data);
  detail::TrainingMatrix m;
  m.rows = data.size();
  m.cols = d;
  m.x.reserve(m.rows * d);
  std::size_t positives = 0;
  for (const auto& inst : data) {
    if (inst.features.size() != d) throw InputError("inconsistent feature width in training data");
    auto z = standardizer.apply(inst.features);
    m.x.insert(m.x.end(), z.begin(), z.end());
    m.y.push_back(inst.label);
    positives += static_cast<std::size_t>(inst.label);
  }

  const std::string id(classifier_id);
  // Option parsing happens before the degenerate check so bad configurations
  // are rejected regardless of the data.
  std::shared_ptr<const detail::ClassifierModel> model;
  auto single_class = positives == 0 || positives == m.rows;

  if (id == "NB") {
    if (config.contains("NBType")) {
      const auto& type = config.get_choice("NBType");
      if (type != "gauss")
        throw UnsupportedError("NB.NBType '" + type + "' unsupported; supported: gauss");
    }
    if (!single_class) model = detail::make_gaussian_nb(m);
  } else if (id == "LR") {
    auto penalty = config.get_choice("penalty");
    if (penalty != "L1" && penalty != "L2") throw InputError("LR.penalty must be L1 or L2");
    bool fit_int = parse_bool_choice(config.get_choice("fit_int"), "LR.fit_int");
    double tol = config.get_real("tol");
    if (!single_class)
      model = detail::make_logistic(
          detail::fit_logistic(m, penalty == "L1" ? detail::Penalty::l1 : detail::Penalty::l2, fit_int, tol));
  } else if (id == "KNN") {
    auto k = config.get_int("n_neigh");
    auto p = config.get_int("p");
    if (k < 1 || p < 1) throw InputError("KNN needs n_neigh >= 1 and p >= 1");
    if (!single_class) model = detail::make_knn(m, static_cast<std::size_t>(k), static_cast<int>(p));
  } else if (id == "DT") {
    detail::TreeOptions opt;
    const auto& crit = config.get_choice("criterion");
    if (crit != "gini" && crit != "entropy") throw InputError("DT.criterion must be gini or entropy");
    opt.entropy = crit == "entropy";
    opt.max_depth = static_cast<int>(config.get_int("max_e"));
    opt.min_samples_leaf = static_cast<int>(config.get_int("min_s_l"));
    opt.min_samples_split = static_cast<int>(config.get_int("min_a_p"));
    opt.max_features = features_for_splitter(config.get_choice("splitter"), d);
    if (opt.max_features >= d) opt.max_features = 0;
    if (!single_class) {
      std::vector<std::size_t> rows(m.rows);
      std::iota(rows.begin(), rows.end(), 0);
      model = detail::make_tree(m, rows, opt, rng);
    }
  } else if (id == "Bagging") {
    auto n_est = config.get_int("n_est");
    double max_s = config.get_real("max_s");
    double max_f = config.get_real("max_f");
    if (n_est < 1 || !(max_s > 0.0 && max_s <= 1.0) || !(max_f > 0.0 && max_f <= 1.0))
      throw InputError("Bagging needs n_est >= 1 and max_s, max_f in (0, 1]");
    if (!single_class) model = detail::make_bagging(m, static_cast<int>(n_est), max_s, max_f, rng);
  }

  if (single_class) {
    model = detail::make_constant(positives == 0 ? 0.0 : 1.0);
  }
  return TrainedModel(id, d, std::move(standardizer), std::move(model), single_class);
}

}  // namespace bilo
