#include "bilo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bilo/error.hpp"
#include "bilo/seed.hpp"

namespace bilo {

std::string synthetic_project_name(const std::string& prefix, std::size_t index) {
  if (index < 26) return prefix + static_cast<char>('A' + index);
  return prefix + std::to_string(index);
}

std::vector<Project> generate_synthetic(const SynthSpec& spec) {
  if (spec.projects == 0 || spec.instances == 0 || spec.features == 0)
    throw ConfigError("synthetic spec needs at least one project, instance and feature");
  if (!(spec.defect_rate >= 0.0 && spec.defect_rate <= 1.0)) throw ConfigError("defect rate must be in [0, 1]");
  if (!(spec.shift >= 0.0)) throw ConfigError("shift must be non-negative");

  std::vector<Project> out;
  const auto n_defective = static_cast<std::size_t>(std::llround(spec.defect_rate * static_cast<double>(spec.instances)));
  for (std::size_t p = 0; p < spec.projects; ++p) {
    Rng rng(derive_seed(spec.seed, "synth", {p}));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> offset(spec.features);
    for (auto& o : offset) o = spec.shift * unit(rng);

    std::vector<int> labels(spec.instances, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_defective), 1);
    std::shuffle(labels.begin(), labels.end(), rng);

    Project project;
    project.name = synthetic_project_name(spec.prefix, p);
    for (std::size_t f = 0; f < spec.features; ++f) project.feature_names.push_back("f" + std::to_string(f));
    for (std::size_t i = 0; i < spec.instances; ++i) {
      Instance inst;
      inst.label = labels[i];
      inst.uid = make_uid(static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(i));
      for (std::size_t f = 0; f < spec.features; ++f)
        inst.features.push_back(offset[f] + (inst.label == 1 ? spec.separation : 0.0) + unit(rng));
      project.instances.push_back(std::move(inst));
    }
    out.push_back(std::move(project));
  }
  return out;
}

std::vector<std::filesystem::path> write_synthetic(const SynthSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& p : generate_synthetic(spec)) {
    auto path = dir / (p.name + ".csv");
    write_project_csv(p, path);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace bilo
