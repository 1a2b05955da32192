#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lattice.hpp"

namespace heatlab {

// Finite symmetric increment set containing 0 and every unit vector.
class IncrementSet {
public:
  IncrementSet() = default;
  // Throws InvalidConfig when the set is not symmetric, misses 0 or a unit
  // vector, or contains duplicates.
  IncrementSet(int dim, std::vector<Point> increments);

  static IncrementSet nearest_neighbour(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return increments_.size(); }
  const Point& operator[](std::size_t i) const { return increments_[i]; }
  const std::vector<Point>& increments() const { return increments_; }
  std::size_t opposite(std::size_t i) const { return opposite_[i]; }
  std::optional<std::size_t> index_of(const Point& e) const;
  // max |e| over the set.
  double diameter() const { return diameter_; }
  // max |e_i| over the set and coordinates; the sup-norm reach of one step.
  Coord reach() const { return reach_; }

private:
  int dim_ = 0;
  std::vector<Point> increments_;
  std::vector<std::size_t> opposite_;
  double diameter_ = 0.0;
  Coord reach_ = 0;
};

enum class RuleKind { Constant, PeriodicTable, RandomElliptic, Tabulated };
enum class Extension { Periodic, ConstantOutside, Analytic };

std::string to_string(RuleKind kind);
std::string to_string(Extension ext);

// Structured, serializable description of an environment.
struct EnvironmentSpec {
  int dim = 1;
  std::vector<Point> increments;  // empty means the nearest-neighbour set
  double alpha = 0.0;
  RuleKind kind = RuleKind::Constant;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;

  static EnvironmentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // Stable 64-bit FNV-1a digest of the canonical JSON, as 16 hex digits.
  std::string hash() const;
};

struct Violation {
  Point site;
  std::optional<Point> increment;
  std::string condition;
  double value = 0.0;
};

nlohmann::json to_json(const std::vector<Violation>& vs, int dim);

// Transition rule pi(x, e). Immutable after construction; all queries are
// pure functions of (x, e).
class Environment {
public:
  // Builds the rule without checking the probability constraints; validate()
  // reports them. Structural problems (bad increments, wrong table shapes)
  // throw InvalidConfig.
  static Environment from_spec(const EnvironmentSpec& spec);

  int dim() const { return gamma_.dim(); }
  const IncrementSet& gamma() const { return gamma_; }
  double alpha() const { return spec_.alpha; }
  RuleKind kind() const { return spec_.kind; }
  Extension extension() const { return extension_; }
  const EnvironmentSpec& spec() const { return spec_; }
  const std::string& hash() const { return hash_; }
  bool translation_invariant() const { return spec_.kind == RuleKind::Constant; }

  double pi(const Point& x, std::size_t e) const;
  // Throws InvalidArgument when e is not an increment.
  double pi(const Point& x, const Point& e) const;
  // Fills out[e] = pi(x, e) for every increment.
  void probabilities(const Point& x, std::span<double> out) const;

  // Sites whose rows are stored explicitly (tables), or the representative
  // set for rules defined analytically.
  std::vector<Point> tabulated_sites() const;
  // Period vector when the rule is periodic; zeros elsewhere.
  std::optional<Point> period() const;

private:
  Environment() = default;
  std::size_t table_row(const Point& x) const;

  EnvironmentSpec spec_;
  std::string hash_;
  IncrementSet gamma_;
  Extension extension_ = Extension::Analytic;
  std::vector<double> constant_;   // Constant rule, or the outside row.
  std::vector<double> table_;      // rows of |Gamma| probabilities
  Point period_{};                 // PeriodicTable / periodic RandomElliptic
  bool has_period_ = false;
  Box table_box_;                  // Tabulated
};

// Checks sum-to-one, symmetry and the ellipticity floor on every tabulated
// site, plus `extra` sites. Violations are data, never exceptions.
std::vector<Violation> validate(const Environment& env, const std::vector<Point>& extra = {});

// from_spec followed by validate; throws InvalidConfig on any violation or
// when a random elliptic rule is infeasible (alpha * |Gamma| > 1).
Environment generate(const EnvironmentSpec& spec);

// Tabulates the rule on a box as a spec of kind Tabulated.
EnvironmentSpec tabulate(const Environment& env, const Box& box, Extension ext);

// Dense per-site probabilities over a box, or a single shared row for
// translation-invariant rules (stride 0).
class SiteTable {
public:
  SiteTable(const Environment& env, const Box& box);

  const Box& box() const { return box_; }
  std::span<const double> row(std::size_t site_index) const {
    return {data_.data() + site_index * stride_, width_};
  }

private:
  Box box_;
  std::size_t width_ = 0;
  std::size_t stride_ = 0;
  std::vector<double> data_;
};

inline constexpr double kSumTolerance = 1e-12;

}  // namespace heatlab
