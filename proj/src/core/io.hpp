#pragma once

#include <string>

#include <json.hpp>

#include "lattice.hpp"

namespace heatlab {

// Writes to `path.tmp.<pid>` then renames over `path`.
void write_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

nlohmann::json read_json(const std::string& path);
// Two-space indent, sorted keys, trailing newline.
std::string dump_json(const nlohmann::json& j);
void write_json(const std::string& path, const nlohmann::json& j);

// Header "x1,...,xd,value", one row per box point in row-major order,
// values printed with %.17g.
std::string field_to_csv(const LatticeFunction& f, int dim);
LatticeFunction field_from_csv(const std::string& text, int dim);

// Binary layout, little-endian:
//   "HLFIELD1" | uint32 dim | int64 lo[dim] | int64 hi[dim] | int64 time |
//   double values[prod(hi - lo + 1)] in row-major order (last axis fastest).
std::string field_to_binary(const LatticeFunction& f, int dim, std::int64_t time = 0);
LatticeFunction field_from_binary(const std::string& bytes, int* dim = nullptr, std::int64_t* time = nullptr);

// Dispatch on the extension: ".csv" or ".bin".
void write_field(const std::string& path, const LatticeFunction& f, int dim, std::int64_t time = 0);
LatticeFunction read_field(const std::string& path, int dim);

}  // namespace heatlab
