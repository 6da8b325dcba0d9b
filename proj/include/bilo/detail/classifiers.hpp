#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bilo/learners.hpp"

namespace bilo::detail {

// Row-major standardized training matrix.
struct TrainingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
};

enum class Penalty { l1, l2 };

// Mean logistic loss plus `lambda` times the penalty (0.5*|w|^2 or |w|_1) on
// the weights; the intercept is never penalized. For L1 the gradient uses
// sign(w) (zero at w = 0). `params` is [w_0..w_{d-1}, b].
double logistic_objective(const TrainingMatrix& data, std::span<const double> params, Penalty penalty,
                          double lambda, std::vector<double>* gradient);

struct LogisticFit {
  std::vector<double> weights;
  double intercept = 0.0;
  int iterations = 0;
  bool converged = false;
};

LogisticFit fit_logistic(const TrainingMatrix& data, Penalty penalty, bool fit_intercept, double tol,
                         int max_iterations = 2000);

struct TreeOptions {
  bool entropy = false;
  int max_depth = 1 << 30;
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  // Features examined per node; 0 means all.
  std::size_t max_features = 0;
};

std::shared_ptr<const ClassifierModel> make_constant(double p);
std::shared_ptr<const ClassifierModel> make_gaussian_nb(const TrainingMatrix& data);
std::shared_ptr<const ClassifierModel> make_logistic(const LogisticFit& fit);
std::shared_ptr<const ClassifierModel> make_knn(const TrainingMatrix& data, std::size_t k, int p);
std::shared_ptr<const ClassifierModel> make_tree(const TrainingMatrix& data, std::span<const std::size_t> rows,
                                                 const TreeOptions& options, Rng& rng);
std::shared_ptr<const ClassifierModel> make_bagging(const TrainingMatrix& data, int n_estimators,
                                                    double max_samples, double max_features, Rng& rng);

double minkowski(std::span<const double> a, std::span<const double> b, int p);

}  // namespace bilo::detail
