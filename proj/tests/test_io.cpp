#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "io.hpp"

using namespace heatlab;

namespace {

LatticeFunction sample_field(int d) {
  Point lo, hi;
  for (int i = 0; i < d; ++i) lo[i] = -2 + i, hi[i] = 3;
  LatticeFunction f(Box(d, lo, hi));
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = std::exp(-0.37 * static_cast<double>(i)) / 3.0;
  return f;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("heatlab_test_" + name)).string();
}

}  // namespace

TEST_CASE("CSV round trip is exact") {
  for (int d = 1; d <= 3; ++d) {
    const LatticeFunction f = sample_field(d);
    const std::string text = field_to_csv(f, d);
    CHECK(text.rfind(d == 1 ? "x1,value\n" : (d == 2 ? "x1,x2,value\n" : "x1,x2,x3,value\n"), 0) == 0);
    const LatticeFunction g = field_from_csv(text, d);
    CHECK(g.box == f.box);
    CHECK(g.values == f.values);
  }
}

TEST_CASE("binary round trip is exact") {
  for (int d = 1; d <= 3; ++d) {
    const LatticeFunction f = sample_field(d);
    const std::string bytes = field_to_binary(f, d, 42);
    int dim = 0;
    std::int64_t t = 0;
    const LatticeFunction g = field_from_binary(bytes, &dim, &t);
    CHECK(dim == d);
    CHECK(t == 42);
    CHECK(g.box == f.box);
    CHECK(g.values == f.values);
    CHECK(bytes.size() == 8 + 4 + 16 * static_cast<std::size_t>(d) + 8 + 8 * f.values.size());
  }
}

TEST_CASE("malformed fields are rejected") {
  const LatticeFunction f = sample_field(2);
  std::string bytes = field_to_binary(f, 2);
  CHECK_THROWS_AS(field_from_binary(bytes.substr(0, bytes.size() - 3)), Error);
  bytes[0] = 'X';
  CHECK_THROWS_AS(field_from_binary(bytes), Error);
  CHECK_THROWS_AS(field_from_csv("x1,value\n0,1\n2,1\n", 1), Error);      // gap
  CHECK_THROWS_AS(field_from_csv("x1,value\n0,1\n0,2\n1,1\n", 1), Error);  // duplicate
  CHECK_THROWS_AS(field_from_csv("x1,value\n0,abc\n", 1), Error);
  CHECK_THROWS_AS(field_from_csv("x1,x2,value\n0,1\n", 2), Error);
}

TEST_CASE("files dispatch on the extension") {
  const LatticeFunction f = sample_field(2);
  for (const char* ext : {".csv", ".bin"}) {
    const std::string path = temp_path(std::string("field") + ext);
    write_field(path, f, 2);
    const LatticeFunction g = read_field(path, 2);
    CHECK(g.values == f.values);
    if (std::string(ext) == ".bin") CHECK_THROWS_AS(read_field(path, 3), Error);
    std::filesystem::remove(path);
  }
  CHECK_THROWS_AS(read_file(temp_path("missing")), Error);
}

TEST_CASE("JSON output is stable") {
  const nlohmann::json j = {{"b", 1}, {"a", {1.5, 2}}};
  CHECK(dump_json(j) == "{\n  \"a\": [\n    1.5,\n    2\n  ],\n  \"b\": 1\n}\n");
  const std::string path = temp_path("report.json");
  write_json(path, j);
  CHECK(read_json(path) == j);
  std::filesystem::remove(path);
}
