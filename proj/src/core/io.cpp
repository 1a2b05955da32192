#include "io.hpp"

#include <unistd.h>

#include <cstdio>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace heatlab {

using nlohmann::json;

void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open " + tmp + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) fail(ErrorCode::Io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot rename " + tmp + " to " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::InvalidConfig, path + ": " + ex.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_json(const std::string& path, const json& j) { write_atomic(path, dump_json(j)); }

std::string field_to_csv(const LatticeFunction& f, int dim) {
  std::string out;
  for (int i = 0; i < dim; ++i) out += "x" + std::to_string(i + 1) + ",";
  out += "value\n";
  char buf[64];
  for_each_point(f.box, [&](const Point& p) {
    for (int i = 0; i < dim; ++i) out += std::to_string(p[i]) + ",";
    std::snprintf(buf, sizeof buf, "%.17g\n", f.at(p));
    out += buf;
  });
  return out;
}

LatticeFunction field_from_csv(const std::string& text, int dim) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::InvalidConfig, "empty CSV field");
  std::vector<std::pair<Point, double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != dim + 1)
      fail(ErrorCode::InvalidConfig, "CSV line " + std::to_string(lineno) + " needs " + std::to_string(dim + 1) + " cells");
    Point p;
    try {
      for (int i = 0; i < dim; ++i) p[i] = std::stoll(cells[static_cast<std::size_t>(i)]);
      rows.emplace_back(p, std::stod(cells.back()));
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidConfig, "CSV line " + std::to_string(lineno) + " is not numeric");
    }
  }
  if (rows.empty()) fail(ErrorCode::InvalidConfig, "CSV field has no rows");
  Point lo = rows[0].first, hi = rows[0].first;
  for (const auto& [p, v] : rows)
    for (int i = 0; i < dim; ++i) lo[i] = std::min(lo[i], p[i]), hi[i] = std::max(hi[i], p[i]);
  LatticeFunction f(Box(dim, lo, hi));
  if (f.box.size() != rows.size()) fail(ErrorCode::InvalidConfig, "CSV rows do not cover a box exactly once");
  std::vector<char> seen(f.box.size(), 0);
  for (const auto& [p, v] : rows) {
    const std::size_t k = f.box.index(p);
    if (seen[k]) fail(ErrorCode::InvalidConfig, "duplicate CSV row at " + to_string(p, dim));
    seen[k] = 1;
    f.values[k] = v;
  }
  return f;
}

namespace {

constexpr char kMagic[8] = {'H', 'L', 'F', 'I', 'E', 'L', 'D', '1'};

template <typename T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) fail(ErrorCode::InvalidConfig, "binary field is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

static_assert(std::endian::native == std::endian::little, "binary fields assume a little-endian host");

}  // namespace

std::string field_to_binary(const LatticeFunction& f, int dim, std::int64_t time) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  for (int i = 0; i < dim; ++i) put<std::int64_t>(out, f.box.lo()[i]);
  for (int i = 0; i < dim; ++i) put<std::int64_t>(out, f.box.hi()[i]);
  put<std::int64_t>(out, time);
  for (double v : f.values) put<double>(out, v);
  return out;
}

LatticeFunction field_from_binary(const std::string& bytes, int* dim_out, std::int64_t* time_out) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    fail(ErrorCode::InvalidConfig, "not a binary field (bad magic)");
  std::size_t pos = sizeof kMagic;
  const auto dim = static_cast<int>(take<std::uint32_t>(bytes, pos));
  if (dim < 1 || dim > kMaxDim) fail(ErrorCode::InvalidConfig, "binary field dimension out of range");
  Point lo, hi;
  for (int i = 0; i < dim; ++i) lo[i] = take<std::int64_t>(bytes, pos);
  for (int i = 0; i < dim; ++i) hi[i] = take<std::int64_t>(bytes, pos);
  const std::int64_t time = take<std::int64_t>(bytes, pos);
  LatticeFunction f(Box(dim, lo, hi));
  if (bytes.size() - pos != f.values.size() * sizeof(double))
    fail(ErrorCode::InvalidConfig, "binary field payload size does not match its box");
  for (double& v : f.values) v = take<double>(bytes, pos);
  if (dim_out) *dim_out = dim;
  if (time_out) *time_out = time;
  return f;
}

static bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

void write_field(const std::string& path, const LatticeFunction& f, int dim, std::int64_t time) {
  if (ends_with(path, ".bin")) return write_atomic(path, field_to_binary(f, dim, time));
  write_atomic(path, field_to_csv(f, dim));
}

LatticeFunction read_field(const std::string& path, int dim) {
  const std::string bytes = read_file(path);
  if (ends_with(path, ".bin")) {
    int d = 0;
    LatticeFunction f = field_from_binary(bytes, &d);
    if (d != dim) fail(ErrorCode::InvalidConfig, path + " has dimension " + std::to_string(d));
    return f;
  }
  return field_from_csv(bytes, dim);
}

}  // namespace heatlab
