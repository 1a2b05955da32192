#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "environment.hpp"
#include "lattice.hpp"

namespace heatlab {

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{2} << 30;  // 2 GiB

struct KernelOptions {
  std::size_t memory_budget = kDefaultMemoryBudget;
};

// Nonnegative mass on a box at time `time`; `escaped` is the mass killed so
// far when the field comes from a killed evolution.
struct MassField {
  LatticeFunction mass;
  long time = 0;
  double escaped = 0.0;

  double total() const { return compensated_total(mass.values); }
};

// (Lf)(x) = sum_e pi(x,e) (f(x+e) - f(x)) on `region`; f must cover region
// enlarged by the increment reach.
LatticeFunction apply_L(const Environment& env, const LatticeFunction& f, const Box& region);
LatticeFunction apply_L(const Environment& env, const LatticeFunction& f);
// (L*g)(x) = sum_e pi(x-e,e) g(x-e) - g(x).
LatticeFunction apply_L_star(const Environment& env, const LatticeFunction& g, const Box& region);
LatticeFunction apply_L_star(const Environment& env, const LatticeFunction& g);

// One forward step of a measure: (step mu)(y) = sum_e pi(y-e,e) mu(y-e).
// The result lives on mu's box enlarged by the reach.
MassField step(const Environment& env, const MassField& mu);

// Forward evolution of delta_x on a preallocated box of half-width
// n_max * reach; only the reachable sub-box is touched at each step.
class KernelEvolution {
public:
  KernelEvolution(const Environment& env, const Point& x, long n_max, const KernelOptions& options = {});

  void advance();
  void advance_to(long n);
  long time() const { return time_; }
  const Point& origin() const { return origin_; }
  const LatticeFunction& field() const { return current_; }
  // Sub-box that can carry mass at the current time.
  const Box& active() const { return active_; }
  double at(const Point& y) const { return current_.value_or(y, 0.0); }
  MassField snapshot() const;

  // Bytes needed for a row of length n from a given environment.
  static std::size_t bytes_needed(const Environment& env, long n_max);

private:
  const Environment* env_;
  Point origin_;
  long n_max_;
  long time_ = 0;
  Box full_;
  Box active_;
  SiteTable sites_;
  std::vector<std::ptrdiff_t> offsets_;
  LatticeFunction current_;
  LatticeFunction next_;
};

// p_n(x, .) as a mass field. Throws ResourceLimit if the reachable box does
// not fit the memory budget.
MassField kernel_row(const Environment& env, const Point& x, long n, const KernelOptions& options = {});

// Walk restricted to a finite domain A. Closure indices enumerate A first
// (lexicographic), then its Gamma-boundary dA (lexicographic).
class ClosureChain {
public:
  static constexpr std::int32_t npos = -1;

  ClosureChain(const Environment& env, Domain domain);

  const Environment& environment() const { return *env_; }
  const Domain& domain() const { return domain_; }
  std::size_t interior_size() const { return domain_.count(); }
  std::size_t boundary_size() const { return boundary_.size(); }
  std::size_t closure_size() const { return interior_size() + boundary_size(); }
  std::size_t width() const { return width_; }
  const Point& point(std::size_t closure_index) const;
  const std::vector<Point>& boundary() const { return boundary_; }
  std::int32_t index_of(const Point& p) const;
  bool is_interior(std::int32_t idx) const { return idx >= 0 && static_cast<std::size_t>(idx) < interior_size(); }

  std::int32_t target(std::size_t i, std::size_t e) const { return targets_[i * width_ + e]; }
  double prob(std::size_t i, std::size_t e) const { return probs_[i * width_ + e]; }

  // Killed forward step on interior mass. Mass that lands on boundary point b
  // is added to exits[b - interior_size()] when `exits` is non-empty; the
  // total killed mass is returned.
  double forward(std::span<const double> in, std::span<double> out, std::span<double> exits = {}) const;
  // Caloric update: out[i] = sum_e pi(x_i,e) u[x_i + e] for interior i, with
  // u given on the whole closure.
  void backward(std::span<const double> u_closure, std::span<double> out) const;

private:
  const Environment* env_;
  Domain domain_;
  std::vector<Point> boundary_;
  Box index_box_;
  std::vector<std::int32_t> index_;
  std::size_t width_ = 0;
  std::vector<std::int32_t> targets_;
  std::vector<double> probs_;
};

// Killed kernel h_t(x, .) on the chain's domain.
MassField killed_step(const ClosureChain& chain, const MassField& mu);
MassField killed_kernel(const ClosureChain& chain, const Point& x, long t);
MassField killed_kernel(const Environment& env, const Ball& ball, const Point& x, long t);

// Converts between a closure-indexed interior vector and a field on the
// domain's box.
MassField to_field(const ClosureChain& chain, std::span<const double> interior, long time, double escaped);

}  // namespace heatlab
