#include <doctest.h>

#include <fstream>

#include "bilo/dataset.hpp"
#include "bilo/error.hpp"

using namespace bilo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("bilo_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& file, const std::string& text) const {
    std::ofstream(path / file, std::ios::binary) << text;
    return path / file;
  }
};

std::string error_of(const fs::path& p) {
  try {
    load_project_csv(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("load a well-formed project") {
  TempDir d("ok");
  auto p = load_project_csv(d.write("alpha.csv", "a,b,label\n1,2,0\n3.5,-4,1\n\n"), 7);
  CHECK(p.name == "alpha");
  CHECK(p.feature_names == std::vector<std::string>{"a", "b"});
  REQUIRE(p.instances.size() == 2);
  CHECK(p.instances[1].features == std::vector<double>{3.5, -4.0});
  CHECK(p.instances[1].label == 1);
  CHECK(p.instances[1].uid == make_uid(7, 1));
}

TEST_CASE("malformed files are rejected with the file named") {
  TempDir d("bad");
  auto nolabel = d.write("nolabel.csv", "a,b,c\n1,2,0\n");
  CHECK(error_of(nolabel).find("nolabel.csv") != std::string::npos);
  CHECK(error_of(nolabel).find("label") != std::string::npos);
  CHECK(error_of(d.write("missing.csv", "a,b,label\n1,,0\n")).find("missing.csv:2") != std::string::npos);
  CHECK(error_of(d.write("nan.csv", "a,label\nx,0\n")).find("nan.csv") != std::string::npos);
  CHECK(error_of(d.write("dup.csv", "a,label\n1,0\n1,0\n")).find("duplicate") != std::string::npos);
  CHECK(error_of(d.write("lab.csv", "a,label\n1,2\n")).find("label") != std::string::npos);
  CHECK(error_of(d.write("short.csv", "a,b,label\n1,0\n")).find("short.csv:2") != std::string::npos);
  CHECK(error_of(d.write("empty.csv", "")).find("empty.csv") != std::string::npos);
  CHECK_FALSE(error_of(d.path / "absent.csv").empty());
}

TEST_CASE("dataset directories load sorted and check widths") {
  TempDir d("dir");
  d.write("b.csv", "x,y,label\n1,2,0\n2,3,1\n");
  d.write("a.csv", "x,y,label\n5,2,1\n");
  d.write("notes.txt", "ignored");
  auto ps = load_dataset_dir(d.path);
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].name == "a");
  CHECK(ps[1].instances[1].uid == make_uid(1, 1));
  d.write("c.csv", "x,label\n1,0\n");
  CHECK_THROWS_AS(load_dataset_dir(d.path), DataError);
  CHECK_THROWS_AS(load_dataset_dir(d.path / "nope"), DataError);
}

TEST_CASE("write and reload round-trips") {
  TempDir d("rt");
  Project p;
  p.name = "r";
  p.feature_names = {"f1", "f2"};
  p.instances = {{{0.125, -3.0}, 1, 0}, {{2.5, 1e-3}, 0, 0}};
  write_project_csv(p, d.path / "r.csv");
  auto q = load_project_csv(d.path / "r.csv");
  REQUIRE(q.instances.size() == 2);
  CHECK(q.instances[0].features == p.instances[0].features);
  CHECK(q.instances[1].features[1] == doctest::Approx(1e-3));
  CHECK(q.instances[0].label == 1);
}
