#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bilo/dataset.hpp"

namespace bilo {

struct SynthSpec {
  std::size_t projects = 3;
  std::size_t instances = 300;
  std::size_t features = 10;
  // Standard deviation of each project's per-feature mean offset.
  double shift = 0.5;
  double defect_rate = 0.3;
  // Per-feature distance between the class means, in units of the noise.
  double separation = 2.0;
  std::uint64_t seed = 1;
  std::string prefix = "synth";
};

// Gaussian class-conditional projects. Every project gets its own mean offset;
// the defective class is displaced by `separation` along every feature. Each
// project holds exactly round(defect_rate * instances) defective rows.
std::vector<Project> generate_synthetic(const SynthSpec& spec);

// Project names: prefix + A, B, ... (prefix + index past 26 projects).
std::string synthetic_project_name(const std::string& prefix, std::size_t index);

// Writes one CSV per project; returns the written paths.
std::vector<std::filesystem::path> write_synthetic(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace bilo
