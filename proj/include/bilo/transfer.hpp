#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bilo/dataset.hpp"
#include "bilo/seed.hpp"
#include "bilo/space.hpp"

namespace bilo {

// Linear projection x -> components^T ((x - mean) / scale).
struct FeatureMap {
  std::vector<double> mean;
  std::vector<double> scale;
  std::size_t input_width = 0;
  std::size_t output_width = 0;
  std::vector<double> components;  // input_width x output_width, column-major

  std::vector<double> apply(std::span<const double> x) const;
  Instance apply(const Instance& inst) const;
};

struct AdaptedData {
  std::vector<Instance> instances;
  std::optional<FeatureMap> feature_map;
  // Parameters clamped to the data, e.g. "k clamped from 120 to 80".
  std::vector<std::string> clamped;
};

// Adapts source instances into a training set. Only the features of
// `target_train` are read, never its labels. `config` holds the learner's
// own parameters (unprefixed).
AdaptedData adapt(std::string_view transfer_id, const Configuration& config, std::span<const Instance> source,
                  std::span<const Instance> target_train, Rng& rng);

// Throws InputError for ids outside the native subset.
bool needs_target(std::string_view transfer_id);

bool is_native_transfer(std::string_view id);
std::optional<std::vector<std::string>> native_transfer_choices(std::string_view id, std::string_view param);

}  // namespace bilo
