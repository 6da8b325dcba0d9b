#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bilo/dataset.hpp"
#include "bilo/seed.hpp"
#include "bilo/space.hpp"

namespace bilo {

namespace detail {

// Fitted classifier operating on standardized features.
class ClassifierModel {
 public:
  virtual ~ClassifierModel() = default;
  virtual double predict(std::span<const double> z) const = 0;
  // Any strictly increasing function of predict; models whose probability
  // saturates in floating point return their log-odds.
  virtual double score(std::span<const double> z) const { return predict(z); }
};

}  // namespace detail

// Per-feature z-score transform fitted on training data. Constant features
// keep unit scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(std::span<const Instance> data);
  std::vector<double> apply(std::span<const double> x) const;
};

class TrainedModel {
 public:
  TrainedModel(std::string classifier_id, std::size_t width, Standardizer standardizer,
               std::shared_ptr<const detail::ClassifierModel> model, bool degenerate);

  const std::string& classifier_id() const { return classifier_id_; }
  std::size_t feature_width() const { return width_; }
  // Trained on a single class: the model emits that class's prior.
  bool degenerate() const { return degenerate_; }

  // Probability of label 1. Throws InputError on a width mismatch.
  double predict_proba(std::span<const double> features) const;
  std::vector<double> predict_proba(std::span<const Instance> data) const;
  // Ranking scores ordered like predict_proba in exact arithmetic but free of
  // its saturation at 0 and 1. Used for AUC.
  std::vector<double> ranking_scores(std::span<const Instance> data) const;

 private:
  std::string classifier_id_;
  std::size_t width_;
  Standardizer standardizer_;
  std::shared_ptr<const detail::ClassifierModel> model_;
  bool degenerate_;
};

// Fits one of NB, LR, KNN, DT, Bagging. `config` holds the classifier's own
// parameters (unprefixed names). Throws UnsupportedError for unknown ids and
// for choices outside the native subset (NB.NBType other than gauss).
TrainedModel train(std::string_view classifier_id, const Configuration& config, std::span<const Instance> data,
                   Rng& rng);

bool is_native_classifier(std::string_view id);

// Choices of a categorical parameter the native implementation accepts, or
// nullopt when every listed choice is accepted.
std::optional<std::vector<std::string>> native_classifier_choices(std::string_view id, std::string_view param);

}  // namespace bilo
