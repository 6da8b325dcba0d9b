#include <algorithm>
#include <cmath>

#include "bilo/detail/classifiers.hpp"

namespace bilo::detail {
namespace {

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  double e = std::exp(s);
  return e / (1.0 + e);
}

// Mean logistic loss without penalty, optional gradient.
double smooth_loss(const TrainingMatrix& data, std::span<const double> params, std::vector<double>* gradient) {
  const std::size_t d = data.cols;
  const double inv_n = 1.0 / static_cast<double>(data.rows);
  if (gradient != nullptr) gradient->assign(d + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    auto xi = data.row(i);
    double s = params[d];
    for (std::size_t j = 0; j < d; ++j) s += params[j] * xi[j];
    loss += softplus(s) - data.y[i] * s;
    if (gradient != nullptr) {
      double r = sigmoid(s) - data.y[i];
      for (std::size_t j = 0; j < d; ++j) (*gradient)[j] += r * xi[j];
      (*gradient)[d] += r;
    }
  }
  if (gradient != nullptr)
    for (auto& g : *gradient) g *= inv_n;
  return loss * inv_n;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double logistic_objective(const TrainingMatrix& data, std::span<const double> params, Penalty penalty, double lambda,
                          std::vector<double>* gradient) {
  const std::size_t d = data.cols;
  double f = smooth_loss(data, params, gradient);
  for (std::size_t j = 0; j < d; ++j) {
    double w = params[j];
    if (penalty == Penalty::l2) {
      f += 0.5 * lambda * w * w;
      if (gradient != nullptr) (*gradient)[j] += lambda * w;
    } else {
      f += lambda * std::abs(w);
      if (gradient != nullptr) (*gradient)[j] += lambda * (w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0));
    }
  }
  return f;
}

LogisticFit fit_logistic(const TrainingMatrix& data, Penalty penalty, bool fit_intercept, double tol,
                         int max_iterations) {
  const std::size_t d = data.cols;
  // Unit inverse regularization strength, scaled to the mean loss.
  const double lambda = 1.0 / static_cast<double>(data.rows);
  std::vector<double> x(d + 1, 0.0), grad, trial(d + 1), trial_grad;
  double step = 1.0;
  LogisticFit fit;

  if (penalty == Penalty::l2) {
    double f = logistic_objective(data, x, penalty, lambda, &grad);
    for (int it = 0; it < max_iterations; ++it) {
      if (!fit_intercept) grad[d] = 0.0;
      if (inf_norm(grad) < tol) {
        fit.converged = true;
        break;
      }
      double g2 = 0.0;
      for (double g : grad) g2 += g * g;
      step = std::min(step * 2.0, 1e6);
      double ft = 0.0;
      while (true) {
        for (std::size_t j = 0; j <= d; ++j) trial[j] = x[j] - step * grad[j];
        ft = logistic_objective(data, trial, penalty, lambda, &trial_grad);
        if (ft <= f - 0.5 * step * g2 || step < 1e-12) break;
        step *= 0.5;
      }
      x.swap(trial);
      grad.swap(trial_grad);
      f = ft;
      fit.iterations = it + 1;
    }
  } else {
    // Proximal gradient with soft-thresholding on the weights.
    double f = smooth_loss(data, x, &grad);
    for (int it = 0; it < max_iterations; ++it) {
      if (!fit_intercept) grad[d] = 0.0;
      step = std::min(step * 2.0, 1e6);
      double ft = 0.0;
      double mapping_norm = 0.0;
      while (true) {
        for (std::size_t j = 0; j < d; ++j) {
          double v = x[j] - step * grad[j];
          double t = step * lambda;
          trial[j] = v > t ? v - t : (v < -t ? v + t : 0.0);
        }
        trial[d] = x[d] - step * grad[d];
        ft = smooth_loss(data, trial, &trial_grad);
        double lin = 0.0, quad = 0.0;
        for (std::size_t j = 0; j <= d; ++j) {
          double diff = trial[j] - x[j];
          lin += grad[j] * diff;
          quad += diff * diff;
        }
        if (ft <= f + lin + quad / (2.0 * step) || step < 1e-12) {
          mapping_norm = 0.0;
          for (std::size_t j = 0; j <= d; ++j) mapping_norm = std::max(mapping_norm, std::abs(trial[j] - x[j]) / step);
          break;
        }
        step *= 0.5;
      }
      x.swap(trial);
      grad.swap(trial_grad);
      f = ft;
      fit.iterations = it + 1;
      if (mapping_norm < tol) {
        fit.converged = true;
        break;
      }
    }
  }

  fit.weights.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
  fit.intercept = fit_intercept ? x[d] : 0.0;
  return fit;
}

}  // namespace bilo::detail
