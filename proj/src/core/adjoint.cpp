#include "adjoint.hpp"

#include <algorithm>
#include <cmath>

namespace heatlab {

using nlohmann::json;

namespace {

double radius_of_level(int l) { return std::ldexp(1.0, l); }

json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

double residual_of(const Environment& env, const LatticeFunction& M) {
  const Box inner = M.box.enlarged(-env.gamma().reach());
  if (inner.empty()) return 0.0;
  const LatticeFunction r = apply_L_star(env, M, inner);
  double worst = 0.0, top = 0.0;
  for (double v : r.values) worst = std::max(worst, std::abs(v));
  for (double v : M.values) top = std::max(top, std::abs(v));
  return top > 0.0 ? worst / top : 0.0;
}

}  // namespace

LevelSolution level_solution(const Environment& env, int l, const Point& center, GreenCache& cache) {
  if (l < 1 || l > 30) fail(ErrorCode::InvalidArgument, "level must be between 1 and 30");
  GreenOptions direct;
  direct.method = GreenMethod::Direct;
  const Ball inner{env.dim(), center, radius_of_level(l)};
  const Ball outer{env.dim(), center, radius_of_level(l + 1)};
  const auto g_in = cache.row(env, inner, center, direct);
  const auto g_out = cache.row(env, outer, center, direct);

  LevelSolution out;
  out.level = l;
  out.ball = inner;
  out.values = LatticeFunction(inner.bounding_box());
  // The pole difference is the largest scale in play.
  const double ref = g_out->at(center) - g_in->at(center);
  if (!(ref > 0.0)) fail(ErrorCode::Numeric, "Green difference at the pole is not positive");
  for_each_point(out.values.box, [&](const Point& y) {
    if (!inner.contains(y)) return;
    double d = g_out->at(y) - g_in->at(y);
    if (d < -1e-9 * ref)
      fail(ErrorCode::Numeric, "negative Green difference at " + to_string(y, env.dim()) +
                                   "; solver tolerance too loose");
    if (d <= kClampFloor) {
      d = kClampFloor;
      ++out.clamped;
    }
    out.values.at(y) = d;
  });
  out.scale = 1.0 / out.values.at(center);
  for (double& v : out.values.values) v *= out.scale;
  out.values.at(center) = 1.0;
  return out;
}

LevelSolution level_solution(const Environment& env, int l, const Point& center) {
  GreenCache cache(4, 2);
  return level_solution(env, l, center, cache);
}

double AdjointSolution::at(const Point& x) const {
  if (!window.contains(x)) fail(ErrorCode::InvalidArgument, "point outside the adjoint window: " + to_string(x, dim));
  return values.at(x);
}

json AdjointSolution::metadata() const {
  json hist = json::array();
  for (const auto& h : history)
    hist.push_back({{"level", h.level}, {"scale", h.scale}, {"sup_diff", h.sup_diff}, {"clamped", h.clamped}});
  return {{"env_hash", env_hash},
          {"dimension", dim},
          {"window", {{"lo", point_json(window.lo(), dim)}, {"hi", point_json(window.hi(), dim)}}},
          {"level", level},
          {"converged", converged},
          {"extrapolated", extrapolated},
          {"tol", tol},
          {"residual", residual},
          {"clamped", clamped},
          {"center", point_json(center, dim)},
          {"normalization", {{"point", point_json(Point{}, dim)}, {"value", 1.0}}},
          {"history", hist}};
}

// Highest level whose outer ball still factorizes quickly on one core.
int default_max_level(int dim) { return dim == 1 ? 10 : dim == 2 ? 7 : 3; }

AdjointSolution build_M(const Environment& env, const AdjointOptions& options) {
  const int d = env.dim();
  if (options.window < 0) fail(ErrorCode::InvalidArgument, "window half-width must be nonnegative");
  if (!(options.tol > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
  const int l_max = options.l_max > 0 ? options.l_max : default_max_level(d);
  const Box window = Box::around(d, Point{}, options.window);

  // Smallest level whose ball holds the window with one step to spare.
  Point corner{};
  for (int i = 0; i < d; ++i) corner[i] = options.window + std::abs(options.center[i]);
  const double far = norm(corner) + static_cast<double>(env.gamma().reach()) * std::sqrt(static_cast<double>(d));
  int l0 = 1;
  while (radius_of_level(l0) <= far) ++l0;
  const int shift = options.extrapolate ? 1 : 0;
  if (l0 + shift > l_max)
    fail(ErrorCode::ResourceLimit, "window needs level " + std::to_string(l0 + shift) +
                                       " but the maximum level is " + std::to_string(l_max));

  GreenCache cache(8, 2);
  AdjointSolution out;
  out.env_hash = env.hash();
  out.dim = d;
  out.window = window;
  out.tol = options.tol;
  out.center = options.center;
  out.extrapolated = options.extrapolate;

  // raw[k] is m_{l0+k} on the window, normalized at 0; seq(k) is the k-th
  // member of the sequence tested for convergence.
  std::vector<LatticeFunction> raw;
  auto add_raw = [&](int lev) {
    const LevelSolution s = level_solution(env, lev, options.center, cache);
    LatticeFunction f(window);
    const double at0 = s.values.at(Point{});
    for_each_point(window, [&](const Point& x) { f.at(x) = s.values.at(x) / at0; });
    raw.push_back(std::move(f));
    out.history.push_back({lev, s.scale, std::nan(""), s.clamped});
  };
  auto seq = [&](std::size_t k) {
    if (!options.extrapolate) return raw[k];
    LatticeFunction f(window);
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = (4.0 * raw[k + 1].values[i] - raw[k].values[i]) / 3.0;
    return f;
  };

  add_raw(l0);
  if (options.extrapolate) add_raw(l0 + 1);
  LatticeFunction best = seq(0);
  int best_level = l0;
  for (int lev = l0 + 1; lev + shift <= l_max; ++lev) {
    add_raw(lev + shift);
    LatticeFunction next = seq(static_cast<std::size_t>(lev - l0));
    double diff = 0.0;
    for (std::size_t i = 0; i < next.values.size(); ++i) diff = std::max(diff, std::abs(next.values[i] - best.values[i]));
    out.history.back().sup_diff = diff;
    if (diff <= options.tol) {
      out.converged = true;
      break;
    }
    best = std::move(next);
    best_level = lev;
  }

  out.level = best_level;
  out.values = std::move(best);
  out.values.at(Point{}) = 1.0;
  for (const auto& h : out.history) out.clamped += h.clamped;
  for (double v : out.values.values)
    if (!(v > 0.0)) fail(ErrorCode::Numeric, "adjoint solution is not positive on the window");
  out.residual = residual_of(env, out.values);
  return out;
}

AdjointSolution adjoint_from_field(const Environment& env, const LatticeFunction& values, const json& meta) {
  AdjointSolution out;
  out.env_hash = meta.value("env_hash", env.hash());
  if (out.env_hash != env.hash())
    fail(ErrorCode::InvalidConfig, "adjoint field was built for environment " + out.env_hash + ", not " + env.hash());
  out.dim = env.dim();
  out.window = values.box;
  out.values = values;
  out.level = meta.value("level", 0);
  out.converged = meta.value("converged", false);
  out.extrapolated = meta.value("extrapolated", false);
  out.tol = meta.value("tol", 0.0);
  out.clamped = meta.value("clamped", std::size_t{0});
  if (!out.window.contains(Point{})) fail(ErrorCode::InvalidConfig, "adjoint window must contain the origin");
  for (double v : out.values.values)
    if (!(v > 0.0)) fail(ErrorCode::InvalidConfig, "adjoint values must be positive");
  out.residual = residual_of(env, out.values);
  if (meta.contains("history"))
    for (const auto& h : meta.at("history"))
      out.history.push_back({h.value("level", 0), h.value("scale", 0.0),
                             h.contains("sup_diff") && h.at("sup_diff").is_number() ? h.at("sup_diff").get<double>()
                                                                                    : std::nan(""),
                             h.value("clamped", std::size_t{0})});
  return out;
}

double volume(const AdjointSolution& M, const Point& x, double r) {
  const Ball b{M.dim, x, r};
  const Box bb = b.bounding_box();
  if (!bb.empty() && !M.window.contains(bb))
    fail(ErrorCode::InvalidArgument, "ball of radius " + std::to_string(r) + " around " + to_string(x, M.dim) +
                                         " leaves the adjoint window");
  CompensatedSum s;
  for_each_point(bb, [&](const Point& z) {
    if (b.contains(z)) s.add(M.values.at(z));
  });
  return s.value();
}

EstimateReport doubling_report(const AdjointSolution& M, const std::vector<Point>& centers,
                               const std::vector<double>& radii) {
  EstimateReport rep;
  rep.estimate = "volume-doubling";
  rep.env_hash = M.env_hash;
  json cs = json::array();
  for (const auto& c : centers) cs.push_back(point_json(c, M.dim));
  rep.grid = {{"centers", cs}, {"radii", radii}};
  double worst = 0.0;
  for (double r : radii) {
    double worst_r = 0.0;
    for (const auto& x : centers) {
      if (!M.window.contains(Ball{M.dim, x, 2 * r}.bounding_box())) {
        rep.skip("window exceeded");
        continue;
      }
      const double ratio = volume(M, x, 2 * r) / volume(M, x, r);
      if (ratio > worst) {
        worst = ratio;
        rep.witness = {{"x", point_json(x, M.dim)}, {"r", r}, {"ratio", ratio}};
      }
      worst_r = std::max(worst_r, ratio);
    }
    rep.rows.push_back({{"r", r}, {"max_ratio", worst_r}});
  }
  rep.constants["C"] = worst;
  rep.verdicts["finite"] = std::isfinite(worst) && worst > 0.0;
  return rep;
}

NormalizedAdjoint::NormalizedAdjoint(const Environment& env, const AdjointSolution& M, const Point& x0, long t_max)
    : M_(&M), t_max_(t_max) {
  if (t_max < 0) fail(ErrorCode::InvalidArgument, "t_max must be nonnegative");
  const Box support = Box::around(env.dim(), x0, static_cast<Coord>(t_max) * env.gamma().reach());
  if (!M.window.contains(support))
    fail(ErrorCode::InvalidArgument, "adjoint window too small for the kernel support at time " + std::to_string(t_max));
  KernelEvolution evo(env, x0, t_max);
  rows_.push_back(evo.snapshot());
  for (long t = 1; t <= t_max; ++t) {
    evo.advance();
    rows_.push_back(evo.snapshot());
  }
}

double NormalizedAdjoint::operator()(const Point& y, long t) const {
  if (t < 0 || t > t_max_) fail(ErrorCode::InvalidArgument, "time outside the normalized adjoint range");
  return rows_[static_cast<std::size_t>(t)].mass.value_or(y, 0.0) / M_->at(y);
}

}  // namespace heatlab
