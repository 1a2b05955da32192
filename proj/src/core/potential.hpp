#pragma once

#include <cstddef>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "kernel.hpp"

namespace heatlab {

struct SpaceTimePoint {
  Point x;
  long t = 0;
  friend bool operator==(const SpaceTimePoint&, const SpaceTimePoint&) = default;
  friend auto operator<=>(const SpaceTimePoint&, const SpaceTimePoint&) = default;
};

enum class GreenMethod { Auto, Direct, Series };

struct GreenOptions {
  GreenMethod method = GreenMethod::Auto;
  // Direct factorization is used up to this many states under Auto.
  std::size_t direct_limit = 100000;
  // Series route stops once the estimated remaining occupation mass drops
  // below this.
  double series_tolerance = 1e-14;
  long series_cap = 50'000'000;
};

// G^R(x, .) for the walk killed on leaving a ball; zero outside the ball.
struct GreenRow {
  Ball ball;
  Point pole;
  LatticeFunction values;  // on the ball's bounding box
  double row_sum = 0.0;
  GreenMethod method = GreenMethod::Direct;

  double at(const Point& y) const { return values.value_or(y, 0.0); }
};

// Sparse LU of (I - P_killed)^T on a ball, reusable across poles.
class GreenSolver {
public:
  GreenSolver(const Environment& env, const Ball& ball);
  ~GreenSolver();
  GreenSolver(const GreenSolver&) = delete;
  GreenSolver& operator=(const GreenSolver&) = delete;

  const Ball& ball() const { return ball_; }
  const ClosureChain& chain() const { return chain_; }
  GreenRow row(const Point& x) const;

private:
  struct Factorization;
  Ball ball_;
  ClosureChain chain_;
  std::unique_ptr<Factorization> lu_;
};

GreenRow green_row_series(const ClosureChain& chain, const Ball& ball, const Point& x, const GreenOptions& options = {});
GreenRow green_row(const Environment& env, const Ball& ball, const Point& x, const GreenOptions& options = {});

// Thread-safe LRU cache of Green rows keyed by (environment, ball, pole).
// Factorizations are kept for the most recently used balls.
class GreenCache {
public:
  explicit GreenCache(std::size_t row_capacity = 64, std::size_t solver_capacity = 2)
      : row_capacity_(row_capacity), solver_capacity_(solver_capacity) {}

  std::shared_ptr<const GreenRow> row(const Environment& env, const Ball& ball, const Point& x,
                                      const GreenOptions& options = {});
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

private:
  std::shared_ptr<GreenSolver> solver(const Environment& env, const Ball& ball);

  std::mutex mu_;
  std::size_t row_capacity_;
  std::size_t solver_capacity_;
  std::list<std::pair<std::string, std::shared_ptr<const GreenRow>>> rows_;
  std::unordered_map<std::string, decltype(rows_)::iterator> row_index_;
  std::list<std::pair<std::string, std::shared_ptr<GreenSolver>>> solvers_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Q = A x {a <= k <= b}, a < b.
struct Cylinder {
  Domain base;
  long bottom = 0;
  long top = 1;
};

using BoundaryData = std::function<double(const Point&, long)>;

// Visits u(., k) on the closure of the base for k = a..b. Boundary entries
// at k = b are not part of the problem and hold NaN.
using SliceVisitor = std::function<void(long k, std::span<const double> closure_values)>;

// u(x,k+1) = sum_e pi(x,e) u(x+e,k) in A x {a <= k < b}, u = phi on the
// parabolic boundary; forward recursion in k from the bottom slice.
void solve_caloric_streaming(const ClosureChain& chain, long bottom, long top, const BoundaryData& phi,
                             const SliceVisitor& visit);

class CaloricSolution {
public:
  CaloricSolution(std::shared_ptr<const ClosureChain> chain, long bottom, long top);

  const ClosureChain& chain() const { return *chain_; }
  long bottom() const { return bottom_; }
  long top() const { return top_; }
  // Throws for points outside the closure or on dA x {b}.
  double at(const Point& x, long k) const;
  std::span<const double> slice(long k) const;
  std::vector<double>& mutable_slice(long k) { return slices_[static_cast<std::size_t>(k - bottom_)]; }

private:
  std::shared_ptr<const ClosureChain> chain_;
  long bottom_, top_;
  std::vector<std::vector<double>> slices_;
};

CaloricSolution solve_caloric(const Environment& env, const Cylinder& cyl, const BoundaryData& phi);
CaloricSolution solve_caloric(std::shared_ptr<const ClosureChain> chain, long bottom, long top,
                              const BoundaryData& phi);

struct CaloricAtom {
  SpaceTimePoint at;
  double mass = 0.0;
};

// Exit distribution of the space-time walk (S_j, t0 - j) from Q.
struct CaloricMeasure {
  SpaceTimePoint base;
  std::vector<CaloricAtom> atoms;  // ordered by (time desc, point)

  double total() const;
  double integrate(const BoundaryData& phi) const;
  double mass_of(const std::function<bool(const SpaceTimePoint&)>& pred) const;
};

CaloricMeasure caloric_measure(const ClosureChain& chain, long bottom, long top, const SpaceTimePoint& x0);
CaloricMeasure caloric_measure(const Environment& env, const Cylinder& cyl, const SpaceTimePoint& x0);

// Right side of the representation formula for a normalized parabolic adjoint
// solution on B_r, minus the solution itself; returns the largest
// |discrepancy| over y in B_{r/2}, t = 1..t_max. `m` must be positive on the
// closure of the ball.
using AdjointField = std::function<double(const Point&)>;
using NormalizedField = std::function<double(const Point&, long)>;

double representation_check(const Environment& env, const Ball& ball, const AdjointField& m,
                            const NormalizedField& vtilde, long t_max);

}  // namespace heatlab
