#include "bilo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bilo/error.hpp"

namespace bilo {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& cell : out) {
    auto b = cell.find_first_not_of(" \t");
    auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace

Project load_project_csv(const std::filesystem::path& path, std::uint32_t project_index) {
  std::ifstream in(path);
  const std::string file = path.string();
  if (!in) throw DataError(file + ": cannot open");

  Project project;
  project.name = path.stem().string();

  std::string line;
  if (!std::getline(in, line)) throw DataError(file + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label")
    throw DataError(file + ": last column must be named 'label'");
  project.feature_names.assign(header.begin(), header.end() - 1);

  std::set<std::vector<double>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    auto where = [&] { return file + ":" + std::to_string(line_no) + ": "; };
    if (cells.size() != header.size())
      throw DataError(where() + "expected " + std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].empty()) throw DataError(where() + "missing value in column '" + header[i] + "'");
      char* end = nullptr;
      double v = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str() || *end != '\0' || !std::isfinite(v))
        throw DataError(where() + "non-numeric or missing value '" + cells[i] + "' in column '" + header[i] + "'");
      row[i] = v;
    }
    double label = row.back();
    if (label != 0.0 && label != 1.0) throw DataError(where() + "label must be 0 or 1");
    if (!seen.insert(row).second) throw DataError(where() + "duplicate row");
    Instance inst;
    inst.label = static_cast<int>(label);
    row.pop_back();
    inst.features = std::move(row);
    inst.uid = make_uid(project_index, static_cast<std::uint32_t>(project.instances.size()));
    project.instances.push_back(std::move(inst));
  }
  if (project.instances.empty()) throw DataError(file + ": no data rows");
  return project;
}

std::vector<Project> load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(dir.string() + ": no .csv project files");

  std::vector<Project> projects;
  for (std::size_t i = 0; i < files.size(); ++i) {
    projects.push_back(load_project_csv(files[i], static_cast<std::uint32_t>(i)));
    if (projects.back().feature_width() != projects.front().feature_width())
      throw DataError(files[i].string() + ": feature width " + std::to_string(projects.back().feature_width()) +
                      " differs from " + std::to_string(projects.front().feature_width()));
  }
  return projects;
}

void write_project_csv(const Project& project, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  for (const auto& name : project.feature_names) out << name << ',';
  out << "label\n";
  char buf[64];
  for (const auto& inst : project.instances) {
    for (double v : inst.features) {
      std::snprintf(buf, sizeof buf, "%.6f,", v);
      out << buf;
    }
    out << inst.label << '\n';
  }
}

}  // namespace bilo
