#pragma once

#include <vector>

#include <json.hpp>

#include "potential.hpp"
#include "report.hpp"

namespace heatlab {

// m_l(y) = a_l [G_{l+1}(c, y) - G_l(c, y)] on B_{2^l}(c), G_l the Green
// function of B_{2^l}(c), scaled so m_l(c) = 1. Values outside the ball are 0.
struct LevelSolution {
  int level = 0;
  Ball ball;
  LatticeFunction values;
  double scale = 0.0;       // a_l
  std::size_t clamped = 0;  // differences raised to kClampFloor
};

inline constexpr double kClampFloor = 1e-13;

LevelSolution level_solution(const Environment& env, int l, const Point& center, GreenCache& cache);
LevelSolution level_solution(const Environment& env, int l, const Point& center = {});

struct AdjointOptions {
  Coord window = 16;  // half-width: the window is [-W, W]^d
  double tol = 1e-8;
  int l_max = 0;      // 0 picks a dimension default (10, 7, 3)
  Point center{};     // centre of the balls and pole
  // Use (4 m_{l+1} - m_l) / 3 in place of m_l. Still an exact adjoint
  // solution on B_{2^l}; cancels the leading R^-2 term in d >= 2.
  bool extrapolate = false;
};

struct LevelRecord {
  int level = 0;
  double scale = 0.0;
  double sup_diff = 0.0;  // against the previous level on the window, both normalized at 0; NaN for the first
  std::size_t clamped = 0;
};

struct AdjointSolution {
  std::string env_hash;
  int dim = 1;
  Box window;
  LatticeFunction values;  // on the window, M(0) = 1
  int level = 0;
  bool converged = false;
  bool extrapolated = false;
  double tol = 0.0;
  double residual = 0.0;   // sup |L*M| / sup M on the window shrunk by the reach
  std::size_t clamped = 0;
  Point center{};
  std::vector<LevelRecord> history;

  double at(const Point& x) const;
  bool covers(const Point& x) const { return window.contains(x); }
  nlohmann::json metadata() const;
};

int default_max_level(int dim);

AdjointSolution build_M(const Environment& env, const AdjointOptions& options = {});

// Rebuilds the metadata-free part of a solution from exported values.
AdjointSolution adjoint_from_field(const Environment& env, const LatticeFunction& values, const nlohmann::json& meta);

// V(x, r) = sum over |z - x| < r of M(z). Throws InvalidArgument when the
// ball leaves the window.
double volume(const AdjointSolution& M, const Point& x, double r);

// Max V(x, 2r) / V(x, r) over x in `centers` and r in `radii`.
EstimateReport doubling_report(const AdjointSolution& M, const std::vector<Point>& centers,
                               const std::vector<double>& radii);

// v(y, t) = p_t(x0, y) / M(y) for t <= t_max.
class NormalizedAdjoint {
public:
  NormalizedAdjoint(const Environment& env, const AdjointSolution& M, const Point& x0, long t_max);
  double operator()(const Point& y, long t) const;
  long t_max() const { return t_max_; }
  const MassField& kernel(long t) const { return rows_[static_cast<std::size_t>(t)]; }

private:
  const AdjointSolution* M_;
  long t_max_;
  std::vector<MassField> rows_;
};

}  // namespace heatlab
