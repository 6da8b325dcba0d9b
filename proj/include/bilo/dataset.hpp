#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bilo {

// One labeled module. `uid` identifies the row across views of a task
// (project index in the high 32 bits, row index in the low 32 bits).
struct Instance {
  std::vector<double> features;
  int label = 0;  // 0 = clean, 1 = defective
  std::uint64_t uid = 0;
};

struct Project {
  std::string name;
  std::vector<std::string> feature_names;
  std::vector<Instance> instances;

  std::size_t feature_width() const { return feature_names.size(); }
};

inline std::uint64_t make_uid(std::uint32_t project, std::uint32_t row) {
  return (static_cast<std::uint64_t>(project) << 32) | row;
}

// CSV with a header row; every column is a numeric feature except a final
// column named `label` holding 0/1. Files with missing cells or duplicate
// rows are rejected with DataError naming the file.
Project load_project_csv(const std::filesystem::path& path, std::uint32_t project_index = 0);

// Loads every *.csv in the directory, sorted by file name. All projects must
// share the same feature width.
std::vector<Project> load_dataset_dir(const std::filesystem::path& dir);

void write_project_csv(const Project& project, const std::filesystem::path& path);

}  // namespace bilo
