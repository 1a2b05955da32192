#include "environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "rng.hpp"

namespace heatlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// IncrementSet

IncrementSet::IncrementSet(int dim, std::vector<Point> increments)
    : dim_(dim), increments_(std::move(increments)) {
  if (dim < 1 || dim > kMaxDim) fail(ErrorCode::InvalidConfig, "dimension must be 1, 2 or 3");
  std::set<Point> seen;
  for (const Point& e : increments_) {
    for (int i = dim; i < kMaxDim; ++i)
      if (e[i] != 0) fail(ErrorCode::InvalidConfig, "increment has coordinates beyond the dimension");
    if (!seen.insert(e).second)
      fail(ErrorCode::InvalidConfig, "duplicate increment " + to_string(e, dim));
  }
  if (!seen.count(Point{})) fail(ErrorCode::InvalidConfig, "increment set must contain 0");
  for (int i = 0; i < dim; ++i) {
    if (!seen.count(unit_vector(i, 1)) || !seen.count(unit_vector(i, -1)))
      fail(ErrorCode::InvalidConfig, "increment set must contain every unit vector");
  }
  opposite_.resize(increments_.size());
  for (std::size_t i = 0; i < increments_.size(); ++i) {
    auto j = index_of(-increments_[i]);
    if (!j) fail(ErrorCode::InvalidConfig, "increment set is not symmetric at " + to_string(increments_[i], dim));
    opposite_[i] = *j;
    diameter_ = std::max(diameter_, norm(increments_[i]));
    for (int k = 0; k < dim; ++k) reach_ = std::max(reach_, std::abs(increments_[i][k]));
  }
}

IncrementSet IncrementSet::nearest_neighbour(int dim) {
  std::vector<Point> inc{Point{}};
  for (int i = 0; i < dim; ++i) {
    inc.push_back(unit_vector(i, 1));
    inc.push_back(unit_vector(i, -1));
  }
  return IncrementSet(dim, std::move(inc));
}

std::optional<std::size_t> IncrementSet::index_of(const Point& e) const {
  for (std::size_t i = 0; i < increments_.size(); ++i)
    if (increments_[i] == e) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Spec serialization

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::Constant: return "constant";
    case RuleKind::PeriodicTable: return "periodic";
    case RuleKind::RandomElliptic: return "random";
    case RuleKind::Tabulated: return "tabulated";
  }
  return "?";
}

std::string to_string(Extension ext) {
  switch (ext) {
    case Extension::Periodic: return "periodic";
    case Extension::ConstantOutside: return "constant";
    case Extension::Analytic: return "analytic";
  }
  return "?";
}

namespace {

RuleKind parse_kind(const std::string& s) {
  if (s == "constant") return RuleKind::Constant;
  if (s == "periodic" || s == "periodic_table") return RuleKind::PeriodicTable;
  if (s == "random" || s == "random_elliptic") return RuleKind::RandomElliptic;
  if (s == "tabulated") return RuleKind::Tabulated;
  fail(ErrorCode::InvalidConfig, "unknown environment kind '" + s + "'");
}

Point parse_point(const json& j, int dim, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    fail(ErrorCode::InvalidConfig, std::string(what) + " must be an array of " + std::to_string(dim) + " integers");
  Point p;
  for (int i = 0; i < dim; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number_integer())
      fail(ErrorCode::InvalidConfig, std::string(what) + " must contain integers");
    p[i] = j[static_cast<std::size_t>(i)].get<Coord>();
  }
  return p;
}

json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

std::vector<double> parse_row(const json& j, std::size_t width, const char* what) {
  if (!j.is_array() || j.size() != width)
    fail(ErrorCode::InvalidConfig, std::string(what) + " must have one probability per increment");
  std::vector<double> row;
  for (const auto& v : j) {
    if (!v.is_number()) fail(ErrorCode::InvalidConfig, std::string(what) + " must contain numbers");
    row.push_back(v.get<double>());
  }
  return row;
}

Coord floor_mod(Coord a, Coord m) {
  Coord r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

EnvironmentSpec EnvironmentSpec::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "environment spec must be a JSON object");
  EnvironmentSpec s;
  try {
    s.dim = j.at("dimension").get<int>();
    if (s.dim < 1 || s.dim > kMaxDim) fail(ErrorCode::InvalidConfig, "dimension must be 1, 2 or 3");
    if (j.contains("increments")) {
      for (const auto& e : j.at("increments")) s.increments.push_back(parse_point(e, s.dim, "increment"));
    }
    s.alpha = j.value("alpha", 0.0);
    s.kind = parse_kind(j.value("kind", std::string("constant")));
    s.params = j.value("params", json::object());
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& ex) {
    fail(ErrorCode::InvalidConfig, std::string("malformed environment spec: ") + ex.what());
  }
  return s;
}

json EnvironmentSpec::to_json() const {
  json j;
  j["dimension"] = dim;
  json inc = json::array();
  const auto list = increments.empty() ? IncrementSet::nearest_neighbour(dim).increments() : increments;
  for (const Point& e : list) inc.push_back(point_json(e, dim));
  j["increments"] = inc;
  j["alpha"] = alpha;
  j["kind"] = heatlab::to_string(kind);
  j["params"] = params;
  j["seed"] = seed;
  return j;
}

std::string EnvironmentSpec::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const std::vector<Violation>& vs, int dim) {
  json a = json::array();
  for (const auto& v : vs) {
    json o;
    o["site"] = point_json(v.site, dim);
    if (v.increment) o["increment"] = point_json(*v.increment, dim);
    o["condition"] = v.condition;
    o["value"] = v.value;
    a.push_back(o);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Environment

Environment Environment::from_spec(const EnvironmentSpec& spec) {
  Environment env;
  env.spec_ = spec;
  env.hash_ = spec.hash();
  env.gamma_ = spec.increments.empty() ? IncrementSet::nearest_neighbour(spec.dim)
                                       : IncrementSet(spec.dim, spec.increments);
  const std::size_t width = env.gamma_.size();
  const int d = spec.dim;
  const json& p = spec.params;

  auto read_period = [&](const json& pj) {
    env.period_ = parse_point(pj, d, "period");
    for (int i = 0; i < d; ++i)
      if (env.period_[i] < 1) fail(ErrorCode::InvalidConfig, "period entries must be positive");
    env.has_period_ = true;
  };

  try {
    switch (spec.kind) {
      case RuleKind::Constant:
        env.extension_ = Extension::Analytic;
        if (p.value("lazy", false)) {
          env.constant_.assign(width, 0.0);
          const double rest = 0.5 / static_cast<double>(width - 1);
          for (std::size_t i = 0; i < width; ++i)
            env.constant_[i] = (env.gamma_[i] == Point{}) ? 0.5 : rest;
        } else if (p.contains("probs")) {
          env.constant_ = parse_row(p.at("probs"), width, "probs");
        } else {
          env.constant_.assign(width, 1.0 / static_cast<double>(width));
        }
        break;
      case RuleKind::PeriodicTable: {
        env.extension_ = Extension::Periodic;
        read_period(p.at("period"));
        Box cell(d, Point{}, env.period_ - [&] {
          Point one;
          for (int i = 0; i < d; ++i) one[i] = 1;
          return one;
        }());
        const json& table = p.at("table");
        if (!table.is_array() || table.size() != cell.size())
          fail(ErrorCode::InvalidConfig, "periodic table must have one row per site of the period cell");
        for (const auto& row : table) {
          auto r = parse_row(row, width, "table row");
          env.table_.insert(env.table_.end(), r.begin(), r.end());
        }
        env.table_box_ = cell;
        break;
      }
      case RuleKind::RandomElliptic:
        env.extension_ = Extension::Analytic;
        if (p.contains("period")) read_period(p.at("period"));
        break;
      case RuleKind::Tabulated: {
        const json& bj = p.at("box");
        env.table_box_ = Box(d, parse_point(bj.at("lo"), d, "box.lo"), parse_point(bj.at("hi"), d, "box.hi"));
        if (env.table_box_.empty()) fail(ErrorCode::InvalidConfig, "tabulated box is empty");
        const json& table = p.at("table");
        if (!table.is_array() || table.size() != env.table_box_.size())
          fail(ErrorCode::InvalidConfig, "tabulated table must have one row per box site");
        for (const auto& row : table) {
          auto r = parse_row(row, width, "table row");
          env.table_.insert(env.table_.end(), r.begin(), r.end());
        }
        const std::string ext = p.value("extension", std::string("periodic"));
        if (ext == "periodic") {
          env.extension_ = Extension::Periodic;
        } else if (ext == "constant" || ext == "constant-outside") {
          env.extension_ = Extension::ConstantOutside;
          env.constant_ = parse_row(p.at("outside"), width, "outside");
        } else {
          fail(ErrorCode::InvalidConfig, "unknown extension '" + ext + "'");
        }
        break;
      }
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::InvalidConfig, std::string("malformed environment params: ") + ex.what());
  }
  return env;
}

std::size_t Environment::table_row(const Point& x) const {
  if (spec_.kind == RuleKind::PeriodicTable) {
    Point r;
    for (int i = 0; i < dim(); ++i) r[i] = floor_mod(x[i], period_[i]);
    return table_box_.index(r);
  }
  // Tabulated with periodic extension.
  Point r;
  for (int i = 0; i < dim(); ++i)
    r[i] = table_box_.lo()[i] + floor_mod(x[i] - table_box_.lo()[i], table_box_.extent(i));
  return table_box_.index(r);
}

void Environment::probabilities(const Point& x, std::span<double> out) const {
  const std::size_t width = gamma_.size();
  switch (spec_.kind) {
    case RuleKind::Constant:
      std::copy(constant_.begin(), constant_.end(), out.begin());
      return;
    case RuleKind::PeriodicTable: {
      const std::size_t r = table_row(x);
      std::copy_n(table_.begin() + static_cast<std::ptrdiff_t>(r * width), width, out.begin());
      return;
    }
    case RuleKind::Tabulated: {
      if (extension_ == Extension::ConstantOutside && !table_box_.contains(x)) {
        std::copy(constant_.begin(), constant_.end(), out.begin());
        return;
      }
      const std::size_t r = table_box_.contains(x) ? table_box_.index(x) : table_row(x);
      std::copy_n(table_.begin() + static_cast<std::ptrdiff_t>(r * width), width, out.begin());
      return;
    }
    case RuleKind::RandomElliptic: {
      Point site = x;
      if (has_period_)
        for (int i = 0; i < dim(); ++i) site[i] = floor_mod(x[i], period_[i]);
      // One positive weight per unordered pair {e, -e}; half goes to each side.
      double total = 0.0;
      for (std::size_t i = 0; i < width; ++i) {
        const std::size_t cls = std::min(i, gamma_.opposite(i));
        out[i] = counter_uniform_open(spec_.seed, site, cls);
        total += (i == gamma_.opposite(i)) ? out[i] : 0.5 * out[i];
      }
      const double mix = 1.0 - spec_.alpha * static_cast<double>(width);
      for (std::size_t i = 0; i < width; ++i) {
        const double share = (i == gamma_.opposite(i)) ? out[i] : 0.5 * out[i];
        out[i] = spec_.alpha + mix * share / total;
      }
      return;
    }
  }
}

double Environment::pi(const Point& x, std::size_t e) const {
  double buf[64];
  std::vector<double> heap;
  std::span<double> out(buf, gamma_.size());
  if (gamma_.size() > 64) {
    heap.resize(gamma_.size());
    out = heap;
  }
  probabilities(x, out);
  return out[e];
}

double Environment::pi(const Point& x, const Point& e) const {
  auto idx = gamma_.index_of(e);
  if (!idx) fail(ErrorCode::InvalidArgument, "increment " + to_string(e, dim()) + " is not in the increment set");
  return pi(x, *idx);
}

std::vector<Point> Environment::tabulated_sites() const {
  std::vector<Point> sites;
  switch (spec_.kind) {
    case RuleKind::Constant:
      sites.push_back(Point{});
      break;
    case RuleKind::PeriodicTable:
    case RuleKind::Tabulated:
      for_each_point(table_box_, [&](const Point& p) { sites.push_back(p); });
      if (extension_ == Extension::ConstantOutside) {
        Point outside = table_box_.hi();
        outside[0] += 1;
        sites.push_back(outside);
      }
      break;
    case RuleKind::RandomElliptic: {
      Box sample = has_period_ ? Box(dim(), Point{}, period_ - [&] {
        Point one;
        for (int i = 0; i < dim(); ++i) one[i] = 1;
        return one;
      }())
                               : Box::around(dim(), Point{}, dim() == 1 ? 64 : (dim() == 2 ? 8 : 3));
      for_each_point(sample, [&](const Point& p) { sites.push_back(p); });
      break;
    }
  }
  return sites;
}

std::optional<Point> Environment::period() const {
  if (has_period_) return period_;
  if (spec_.kind == RuleKind::Tabulated && extension_ == Extension::Periodic) {
    Point p;
    for (int i = 0; i < dim(); ++i) p[i] = table_box_.extent(i);
    return p;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::vector<Violation> validate(const Environment& env, const std::vector<Point>& extra) {
  std::vector<Violation> out;
  const auto& gamma = env.gamma();
  std::vector<double> row(gamma.size());
  auto check = [&](const Point& x) {
    env.probabilities(x, row);
    CompensatedSum sum;
    for (std::size_t i = 0; i < row.size(); ++i) {
      sum.add(row[i]);
      if (!(row[i] >= env.alpha()) || !(env.alpha() > 0.0))
        out.push_back({x, gamma[i], "ellipticity: pi(x,e) >= alpha > 0", row[i]});
      const std::size_t j = gamma.opposite(i);
      if (i < j && std::abs(row[i] - row[j]) > kSumTolerance)
        out.push_back({x, gamma[i], "symmetry: pi(x,e) = pi(x,-e)", row[i] - row[j]});
    }
    if (std::abs(sum.value() - 1.0) > kSumTolerance)
      out.push_back({x, std::nullopt, "normalization: sum_e pi(x,e) = 1", sum.value()});
  };
  for (const Point& x : env.tabulated_sites()) check(x);
  for (const Point& x : extra) check(x);
  return out;
}

Environment generate(const EnvironmentSpec& spec) {
  Environment env = Environment::from_spec(spec);
  if (spec.alpha * static_cast<double>(env.gamma().size()) > 1.0 + kSumTolerance)
    fail(ErrorCode::InvalidConfig, "infeasible ellipticity floor: alpha * |Gamma| > 1");
  auto violations = validate(env);
  if (!violations.empty()) {
    const auto& v = violations.front();
    fail(ErrorCode::InvalidConfig, "environment violates " + v.condition + " at site " + to_string(v.site, spec.dim) +
                                       " (" + std::to_string(violations.size()) + " violations)");
  }
  return env;
}

EnvironmentSpec tabulate(const Environment& env, const Box& box, Extension ext) {
  EnvironmentSpec s = env.spec();
  s.increments = env.gamma().increments();
  s.kind = RuleKind::Tabulated;
  json p;
  p["box"] = {{"lo", point_json(box.lo(), box.dim())}, {"hi", point_json(box.hi(), box.dim())}};
  json table = json::array();
  std::vector<double> row(env.gamma().size());
  for_each_point(box, [&](const Point& x) {
    env.probabilities(x, row);
    table.push_back(row);
  });
  p["table"] = std::move(table);
  if (ext == Extension::ConstantOutside) {
    p["extension"] = "constant";
    env.probabilities(box.hi() + unit_vector(0), row);
    p["outside"] = row;
  } else {
    p["extension"] = "periodic";
  }
  s.params = std::move(p);
  return s;
}

SiteTable::SiteTable(const Environment& env, const Box& box) : box_(box), width_(env.gamma().size()) {
  if (env.translation_invariant()) {
    stride_ = 0;
    data_.resize(width_);
    env.probabilities(Point{}, data_);
    return;
  }
  stride_ = width_;
  data_.resize(box.size() * width_);
  std::size_t i = 0;
  for_each_point(box, [&](const Point& x) {
    env.probabilities(x, std::span<double>(data_.data() + i * width_, width_));
    ++i;
  });
}

}  // namespace heatlab
