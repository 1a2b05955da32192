#include "verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "rng.hpp"

namespace heatlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared helpers

namespace detail {

json pj(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

Point point_param(json& g, const char* key, int dim, const Point& def) {
  if (!g.contains(key) || g[key].is_null()) g[key] = pj(def, dim);
  const json& a = g[key];
  if (!a.is_array() || static_cast<int>(a.size()) != dim)
    fail(ErrorCode::InvalidConfig, std::string("grid entry '") + key + "' must be a point of dimension " + std::to_string(dim));
  Point p;
  for (int i = 0; i < dim; ++i) p[i] = a[static_cast<std::size_t>(i)].get<Coord>();
  return p;
}

template <typename T>
T param(json& g, const char* key, const T& def) {
  if (!g.contains(key) || g[key].is_null()) g[key] = def;
  try {
    return g[key].get<T>();
  } catch (const json::exception& ex) {
    fail(ErrorCode::InvalidConfig, std::string("grid entry '") + key + "': " + ex.what());
  }
}

json complete(const Grid& grid) {
  if (grid.is_null()) return json::object();
  if (!grid.is_object()) fail(ErrorCode::InvalidConfig, "grid must be a JSON object");
  return grid;
}

struct Fit {
  double intercept = 0.0, slope = 0.0, r2 = 0.0, slope_se = 0.0;
  std::size_t count = 0;
};

Fit ols(const std::vector<double>& x, const std::vector<double>& y) {
  Fit f;
  f.count = x.size();
  if (x.size() < 2) return f;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  f.slope_se = x.size() > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  return f;
}

json fit_json(const Fit& f) {
  return {{"intercept", f.intercept}, {"slope", f.slope}, {"r2", f.r2}, {"slope_se", f.slope_se},
          {"slope_interval", {f.slope - 2 * f.slope_se, f.slope + 2 * f.slope_se}}, {"points", f.count}};
}

// Consecutive entries differ by at most `factor`.
bool scale_stable(const std::vector<double>& c, double factor = 2.0) {
  for (double v : c)
    if (!std::isfinite(v) || !(v > 0.0)) return false;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (std::max(c[i] / c[i - 1], c[i - 1] / c[i]) > factor) return false;
  return true;
}

bool all_finite(const std::vector<double>& c) {
  for (double v : c)
    if (!std::isfinite(v)) return false;
  return !c.empty();
}

double datum(std::uint64_t seed, std::uint64_t member, const Point& p, long k) {
  return counter_uniform_open(hash_combine(seed, member), p, static_cast<std::uint64_t>(k));
}

// Domain points on the sub-lattice origin + step Z^d.
std::vector<Point> pole_grid(const Domain& dom, const Point& origin, Coord step) {
  std::vector<Point> out;
  step = std::max<Coord>(step, 1);
  for (const Point& p : dom.points()) {
    bool on = true;
    for (int i = 0; i < dom.dim(); ++i) {
      Coord r = (p[i] - origin[i]) % step;
      if (r != 0) on = false;
    }
    if (on) out.push_back(p);
  }
  return out;
}

std::vector<Point> poles_for(const Domain& dom, const Point& origin, double spacing, double r, std::size_t max_all) {
  if (dom.count() <= max_all) return dom.points();
  return pole_grid(dom, origin, static_cast<Coord>(std::lround(std::max(1.0, spacing * r))));
}

std::vector<char> interior_mask(const ClosureChain& ch, const std::function<bool(const Point&)>& pred) {
  std::vector<char> m(ch.interior_size(), 0);
  for (std::size_t i = 0; i < ch.interior_size(); ++i) m[i] = pred(ch.point(i)) ? 1 : 0;
  return m;
}

long floor_sq(double r) { return static_cast<long>(std::floor(r * r + 1e-9)); }
long ceil_l(double v) { return static_cast<long>(std::ceil(v - 1e-9)); }
long floor_l(double v) { return static_cast<long>(std::floor(v + 1e-9)); }

// Integer k with lo < k < hi.
std::pair<long, long> open_range(double lo, double hi) { return {floor_l(lo) + 1, ceil_l(hi) - 1}; }

BoundaryData kernel_data(const Point& z, long bottom) {
  return [z, bottom](const Point& p, long k) { return (k == bottom && p == z) ? 1.0 : 0.0; };
}

BoundaryData random_data(std::uint64_t seed, std::uint64_t member) {
  return [seed, member](const Point& p, long k) { return datum(seed, member, p, k); };
}

BoundaryData one_data() {
  return [](const Point&, long) { return 1.0; };
}

std::string member_name(const char* kind, std::size_t i) { return std::string(kind) + "#" + std::to_string(i); }

// sup over region A and inf over region B of one caloric solution.
struct SupInf {
  double sup = 0.0;
  double inf = std::numeric_limits<double>::infinity();
  Point sup_at{}, inf_at{};
  long sup_k = 0, inf_k = 0;
};

SupInf sup_inf(const ClosureChain& ch, long bottom, long top, const BoundaryData& phi, const std::vector<char>& mask_a,
               std::pair<long, long> ka, const std::vector<char>& mask_b, std::pair<long, long> kb) {
  SupInf r;
  const std::size_t n = ch.interior_size();
  solve_caloric_streaming(ch, bottom, top, phi, [&](long k, std::span<const double> u) {
    if (k >= ka.first && k <= ka.second)
      for (std::size_t i = 0; i < n; ++i)
        if (mask_a[i] && u[i] > r.sup) r.sup = u[i], r.sup_at = ch.point(i), r.sup_k = k;
    if (k >= kb.first && k <= kb.second)
      for (std::size_t i = 0; i < n; ++i)
        if (mask_b[i] && u[i] < r.inf) r.inf = u[i], r.inf_at = ch.point(i), r.inf_k = k;
  });
  return r;
}

}  // namespace detail

using namespace detail;

// ---------------------------------------------------------------------------
// Mass escape

EstimateReport verify_mass_escape(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point x = point_param(g, "x", d, Point{});
  const auto ns = param(g, "n", std::vector<long>{64, 128, 256});
  const auto kappas = param(g, "kappa", std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0});
  const double min_r2 = param(g, "min_r2", 0.95);
  KernelOptions kopt;
  kopt.memory_budget = param(g, "budget", kDefaultMemoryBudget);

  EstimateReport rep;
  rep.estimate = "mass-escape";
  rep.env_hash = env.hash();
  Coord max_norm2 = 0;
  for (const Point& e : env.gamma().increments()) max_norm2 = std::max(max_norm2, norm2(e));

  std::vector<double> fx, fy;
  bool zero_tail = true;
  for (long n : ns) {
    if (n < 1) fail(ErrorCode::InvalidConfig, "mass-escape needs n >= 1");
    const MassField p = kernel_row(env, x, n, kopt);
    std::vector<std::pair<Coord, double>> by_dist;
    for_each_point(p.mass.box, [&](const Point& y) {
      const double m = p.mass.at(y);
      if (m != 0.0) by_dist.emplace_back(norm2(y - x), m);
    });
    auto tail = [&](double R2) {
      CompensatedSum s;
      for (const auto& [d2, m] : by_dist)
        if (static_cast<double>(d2) > R2) s.add(m);
      return s.value();
    };
    for (double kappa : kappas) {
      const double R = kappa * std::sqrt(static_cast<double>(n));
      const double T = tail(R * R);
      rep.rows.push_back({{"n", n}, {"kappa", kappa}, {"R", R}, {"T", T}});
      if (T > 1e-300) {
        fx.push_back(R * R / static_cast<double>(n));
        fy.push_back(std::log(T));
      } else {
        rep.skip("tail below 1e-300");
      }
    }
    const double R2 = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(max_norm2);
    const double T0 = tail(R2);
    rep.rows.push_back({{"n", n}, {"R", std::sqrt(R2)}, {"T", T0}, {"zero_tail_check", true}});
    if (T0 != 0.0) zero_tail = false;
  }
  const Fit f = ols(fx, fy);
  rep.grid = g;
  rep.constants = {{"C", std::exp(f.intercept)}, {"c", -f.slope}, {"fit", fit_json(f)}};
  rep.verdicts = {{"zero_tail", zero_tail}, {"c_positive", -f.slope > 0.0}, {"fit_r2", f.r2 >= min_r2}};
  return rep;
}

// ---------------------------------------------------------------------------
// Gaussian envelope

EstimateReport verify_gaussian(const Environment& env, const AdjointSolution& M, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point x = point_param(g, "x", d, Point{});
  const auto n_fit = param(g, "n_fit", std::vector<long>{64, 256});
  const double radius_factor = param(g, "radius_factor", 3.0);
  const double C0 = param(g, "C0", 1.0);
  const auto n_diag = param(g, "n_diag", std::vector<long>{16, 32, 64, 128, 256, 512, 1024});
  const double A_step = param(g, "A_step", 0.05);
  const double A_max = param(g, "A_max", 4.0);
  const long A_from = param(g, "A_from", 64L);
  const auto slope_range = param(g, "slope_range", std::vector<double>{-2.0, -0.125});
  const double min_r2 = param(g, "min_r2", 0.9);
  const long chain_n = param(g, "chain_n", 64L);
  Point def_off{};
  def_off[0] = 3 * static_cast<Coord>(std::ceil(std::sqrt(static_cast<double>(chain_n))));
  const Point chain_off = point_param(g, "chain_offset", d, def_off);
  KernelOptions kopt;
  kopt.memory_budget = param(g, "budget", kDefaultMemoryBudget);
  if (slope_range.size() != 2) fail(ErrorCode::InvalidConfig, "slope_range must have two entries");

  EstimateReport rep;
  rep.estimate = "gaussian";
  rep.env_hash = env.hash();

  auto vol_ok = [&](const Point& c, double r) { return M.window.contains(Ball{d, c, r}.bounding_box()); };

  // Chain waypoints.
  const double dist2 = static_cast<double>(norm2(chain_off));
  const long k_chain = std::max(1L, ceil_l(dist2 / static_cast<double>(chain_n)));
  std::vector<Point> a(static_cast<std::size_t>(k_chain + 1));
  std::vector<long> t(static_cast<std::size_t>(k_chain + 1));
  for (long j = 0; j <= k_chain; ++j) {
    const double f = static_cast<double>(j) / static_cast<double>(k_chain);
    Point p = x;
    for (int i = 0; i < d; ++i) p[i] = x[i] + static_cast<Coord>(std::lround(f * static_cast<double>(chain_off[i])));
    a[static_cast<std::size_t>(j)] = p;
    t[static_cast<std::size_t>(j)] = chain_n + std::lround(f * static_cast<double>(chain_n));
  }

  std::set<long> times(n_fit.begin(), n_fit.end());
  times.insert(n_diag.begin(), n_diag.end());
  times.insert(t.begin(), t.end());
  const long t_end = *times.rbegin();
  if (*times.begin() < 1) fail(ErrorCode::InvalidConfig, "gaussian times must be >= 1");

  KernelEvolution evo(env, x, t_end, kopt);
  std::map<long, json> fit_rows, diag_rows, A_rows;
  std::vector<double> w(a.size(), 0.0);
  std::vector<double> diag_values;
  bool fits_ok = true, slopes_ok = true;
  const std::set<long> fit_set(n_fit.begin(), n_fit.end()), diag_set(n_diag.begin(), n_diag.end());

  for (long n : times) {
    evo.advance_to(n);
    const double sn = std::sqrt(static_cast<double>(n));
    const Box& act = evo.active();

    // In-ball mass radius.
    if (fit_set.count(n) || diag_set.count(n)) {
      std::vector<std::pair<Coord, double>> by_dist;
      for_each_point(act, [&](const Point& y) {
        const double m = evo.at(y);
        if (m != 0.0) by_dist.emplace_back(norm2(y - x), m);
      });
      std::sort(by_dist.begin(), by_dist.end());
      CompensatedSum cum;
      double A = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < by_dist.size();) {
        std::size_t j = i;
        while (j < by_dist.size() && by_dist[j].first == by_dist[i].first) cum.add(by_dist[j++].second);
        if (cum.value() >= 0.5) {
          A = std::sqrt(static_cast<double>(by_dist[i].first)) / sn;
          break;
        }
        i = j;
      }
      const double A_grid = std::ceil(A / A_step - 1e-9) * A_step;
      A_rows[n] = {{"n", n}, {"A", A}, {"A_grid", A_grid}};
    }

    if (diag_set.count(n)) {
      if (!vol_ok(x, sn)) {
        rep.skip("window exceeded");
      } else {
        const double p = evo.at(x);
        const double D = p * volume(M, x, sn) / M.at(x);
        diag_values.push_back(D);
        diag_rows[n] = {{"n", n}, {"p_nn", p}, {"ratio", D}, {"p_sqrt_n", p * sn}};
      }
    }

    if (fit_set.count(n)) {
      const double R = std::min(radius_factor * sn, static_cast<double>(n) / C0);
      const Box box = Box::around(d, x, static_cast<Coord>(std::floor(R)));
      if (!vol_ok(x, sn)) fail(ErrorCode::InvalidArgument, "adjoint window does not cover V(x, sqrt(n))");
      const double Vx = volume(M, x, sn);
      std::vector<double> fx, fy;
      long window_skips = 0, zero_skips = 0;
      for_each_point(box, [&](const Point& y) {
        const double r2 = static_cast<double>(norm2(y - x));
        if (r2 > R * R) return;
        if (!vol_ok(y, sn)) {
          ++window_skips;
          return;
        }
        const double p = evo.at(y);
        if (p <= 0.0) {
          ++zero_skips;
          return;
        }
        const double rho = p * std::sqrt(Vx * volume(M, y, sn)) / M.at(y);
        fx.push_back(r2 / static_cast<double>(n));
        fy.push_back(std::log(rho));
      });
      if (window_skips) rep.skip("window exceeded", window_skips);
      if (zero_skips) rep.skip("zero kernel in fit region", zero_skips);
      const Fit f = ols(fx, fy);
      const bool r2_ok = f.r2 >= min_r2 && f.count >= 3;
      const bool slope_ok = f.slope >= slope_range[0] && f.slope <= slope_range[1];
      fits_ok = fits_ok && r2_ok;
      slopes_ok = slopes_ok && slope_ok;
      fit_rows[n] = {{"n", n}, {"radius", R}, {"fit", fit_json(f)}, {"r2_ok", r2_ok}, {"slope_ok", slope_ok}};
    }

    for (std::size_t j = 0; j < t.size(); ++j)
      if (t[j] == n) {
        if (!M.covers(a[j])) fail(ErrorCode::InvalidArgument, "adjoint window does not cover the chain");
        w[j] = evo.at(a[j]) / M.at(a[j]);
      }
  }

  // (4.6) witness.
  bool A_bounded = true, A_monotone = true;
  double A_prev = std::numeric_limits<double>::infinity();
  json A_json = json::array();
  for (const auto& [n, row] : A_rows) {
    A_json.push_back(row);
    if (n < A_from) continue;
    const double A = row["A"].get<double>(), Ag = row["A_grid"].get<double>();
    if (!(A <= A_max)) A_bounded = false;
    if (Ag > A_prev + A_step + 1e-12) A_monotone = false;
    A_prev = Ag;
  }
  json fits = json::array(), diags = json::array();
  for (auto& [n, r] : fit_rows) fits.push_back(r);
  for (auto& [n, r] : diag_rows) diags.push_back(r);

  // Chain.
  json chain = json::array();
  double min_step = std::numeric_limits<double>::infinity();
  bool chain_positive = true;
  for (std::size_t j = 0; j < a.size(); ++j) {
    json r = {{"j", j}, {"a", pj(a[j], d)}, {"t", t[j]}, {"v", w[j]}};
    if (!(w[j] > 0.0)) chain_positive = false;
    if (j > 0 && w[j - 1] > 0.0) {
      r["step_ratio"] = w[j] / w[j - 1];
      min_step = std::min(min_step, w[j] / w[j - 1]);
    }
    chain.push_back(r);
  }

  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  for (double v : diag_values) dmin = std::min(dmin, v), dmax = std::max(dmax, v);

  rep.grid = g;
  rep.rows = {{"fits", fits}, {"in_ball_radius", A_json}, {"on_diagonal", diags}, {"chain", chain}};
  rep.constants = {{"diag_min", dmin},
                   {"diag_max", dmax},
                   {"diag_spread", dmax / dmin},
                   {"chain_k", k_chain},
                   {"chain_min_step", min_step},
                   {"chain_lower_bound", w[0] * std::pow(min_step, static_cast<double>(k_chain))},
                   {"chain_end", w.back()}};
  rep.verdicts = {{"fit_r2", fits_ok},
                  {"fit_slope", slopes_ok},
                  {"A_bounded", A_bounded},
                  {"A_monotone", A_monotone},
                  {"diag_stable", !diag_values.empty() && dmax / dmin <= 2.0},
                  {"chain_positive", chain_positive}};
  return rep;
}

// ---------------------------------------------------------------------------
// Doubling

EstimateReport verify_doubling(const Environment& env, const AdjointSolution& M, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point x0 = point_param(g, "x0", d, Point{});
  const auto radii = param(g, "r", std::vector<double>{8, 16, 32});
  const auto offsets = param(g, "green_offsets", std::vector<double>{0, 1, 2, 4, 6, 7});
  json centers_j = g.contains("centers") ? g["centers"] : json::array({pj(x0, d)});
  g["centers"] = centers_j;
  std::vector<Point> centers;
  for (std::size_t i = 0; i < centers_j.size(); ++i) {
    json tmp = {{"c", centers_j[i]}};
    centers.push_back(point_param(tmp, "c", d, Point{}));
  }

  EstimateReport rep;
  rep.estimate = "doubling";
  rep.env_hash = env.hash();
  std::vector<double> cv, ca, cg, ch;
  for (double r : radii) {
    json row = {{"r", r}};
    // Volume of M.
    double v_max = 0.0;
    for (const Point& c : centers) {
      if (!M.window.contains(Ball{d, c, 2 * r}.bounding_box())) {
        rep.skip("window exceeded");
        continue;
      }
      v_max = std::max(v_max, volume(M, c, 2 * r) / volume(M, c, r));
    }
    row["volume"] = v_max > 0 ? json(v_max) : json(nullptr);
    cv.push_back(v_max > 0 ? v_max : std::nan(""));

    // Local adjoint solution m = G(x*, .) in B_7r(z), x* in B_6r \ B_5r.
    {
      const Ball big{d, x0, 7 * r};
      std::optional<Point> star;
      for_each_point(Ball{d, x0, 6 * r}.bounding_box(), [&](const Point& p) {
        if (!star && Ball{d, x0, 6 * r}.contains(p) && !Ball{d, x0, 5 * r}.contains(p)) star = p;
      });
      if (!star) fail(ErrorCode::InvalidArgument, "no lattice point in the annulus B_6r \\ B_5r");
      GreenSolver solver(env, big);
      const GreenRow G = solver.row(*star);
      CompensatedSum s1, s2;
      for_each_point(Ball{d, x0, 2 * r}.bounding_box(), [&](const Point& y) {
        if (Ball{d, x0, 2 * r}.contains(y)) s2.add(G.at(y));
        if (Ball{d, x0, r}.contains(y)) s1.add(G.at(y));
      });
      const double ratio = s2.value() / s1.value();
      row["adjoint"] = ratio;
      row["x_star"] = pj(*star, d);
      ca.push_back(ratio);
    }

    // Green sums in B_4R(x0), R = 2r.
    {
      const double R = 2 * r;
      const Ball big{d, x0, 4 * R};
      GreenSolver solver(env, big);
      std::vector<Point> xs;
      for (double j : offsets) {
        Point p = x0;
        p[0] += static_cast<Coord>(std::lround(j * r));
        if (big.contains(p)) xs.push_back(p);
        if (d >= 2 && j > 0) {
          Point q = x0;
          q[0] += static_cast<Coord>(std::lround(j * r / std::sqrt(2.0)));
          q[1] += static_cast<Coord>(std::lround(j * r / std::sqrt(2.0)));
          if (big.contains(q)) xs.push_back(q);
        }
      }
      double worst = 0.0;
      Point at{};
      for (const Point& x : xs) {
        const GreenRow G = solver.row(x);
        CompensatedSum s1, s2;
        for_each_point(Ball{d, x0, 2 * r}.bounding_box(), [&](const Point& y) {
          if (Ball{d, x0, 2 * r}.contains(y)) s2.add(G.at(y));
          if (Ball{d, x0, r}.contains(y)) s1.add(G.at(y));
        });
        const double ratio = s2.value() / s1.value();
        if (ratio > worst) worst = ratio, at = x;
      }
      row["green"] = worst;
      row["green_witness"] = pj(at, d);
      cg.push_back(worst);
    }

    // Heat mass: min over z in B_r, 1 <= s <= r^2 of sum_{B_2r} h_s^R(z, .).
    {
      const double R = 2 * r;
      auto chain = ClosureChain(env, Domain::ball(Ball{d, x0, 4 * R}));
      const Ball b2{d, x0, 2 * r}, b1{d, x0, r};
      const auto in_b1 = interior_mask(chain, [&](const Point& p) { return b1.contains(p); });
      double cmin = std::numeric_limits<double>::infinity();
      Point at{};
      long at_s = 0;
      const long s_max = floor_sq(r);
      solve_caloric_streaming(
          chain, 0, s_max, [&](const Point& p, long k) { return (k == 0 && b2.contains(p)) ? 1.0 : 0.0; },
          [&](long k, std::span<const double> u) {
            if (k < 1) return;
            for (std::size_t i = 0; i < chain.interior_size(); ++i)
              if (in_b1[i] && u[i] < cmin) cmin = u[i], at = chain.point(i), at_s = k;
          });
      row["heat"] = cmin;
      row["heat_witness"] = {{"z", pj(at, d)}, {"s", at_s}};
      ch.push_back(cmin);
    }
    rep.rows.push_back(row);
  }
  auto mx = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, x);
    return m;
  };
  auto mn = [](const std::vector<double>& v) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : v) m = std::min(m, x);
    return m;
  };
  rep.grid = g;
  rep.constants = {{"volume", mx(cv)}, {"adjoint", mx(ca)}, {"green", mx(cg)}, {"heat", mn(ch)}};
  rep.verdicts = {{"volume_finite", all_finite(cv)},     {"adjoint_finite", all_finite(ca)},
                  {"green_finite", all_finite(cg)},      {"heat_positive", mn(ch) > 0.0},
                  {"volume_stable", scale_stable(cv)},   {"adjoint_stable", scale_stable(ca)},
                  {"green_stable", scale_stable(cg)},    {"heat_stable", scale_stable(ch)}};
  return rep;
}

// ---------------------------------------------------------------------------
// Harnack: parabolic

EstimateReport verify_harnack_parabolic(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point y = point_param(g, "y", d, Point{});
  const auto radii = param(g, "r", std::vector<double>{8, 16, 32});
  const double spacing = param(g, "pole_spacing", 0.5);
  const auto max_all = param(g, "max_poles", std::size_t{64});
  const auto n_random = param(g, "random", 50L);
  const auto seed = param(g, "seed", std::uint64_t{1});

  EstimateReport rep;
  rep.estimate = "harnack-parabolic";
  rep.env_hash = env.hash();
  std::vector<double> cs;
  bool const_ok = true;
  for (double r : radii) {
    const Ball base{d, y, 2 * r};
    ClosureChain ch(env, Domain::ball(base));
    const long s = ceil_l(4 * r * r);
    const long bottom = 0;
    const Ball inner{d, y, r};
    const auto mask = interior_mask(ch, [&](const Point& p) { return inner.contains(p); });
    const auto ka = open_range(s - 3 * r * r, s - 2 * r * r);
    const auto kb = open_range(s - r * r, static_cast<double>(s));
    if (ka.first > ka.second || kb.first > kb.second) {
      rep.skip("empty time range");
      continue;
    }
    double C = 0.0, Ck = 0.0, Cr = 0.0;
    json witness;
    std::size_t members = 0;
    auto consider = [&](const BoundaryData& phi, const std::string& name, double& bucket) {
      const SupInf si = sup_inf(ch, bottom, s, phi, mask, ka, mask, kb);
      if (!(si.inf > 0.0)) {
        rep.skip("vanishes on inf-region");
        return;
      }
      ++members;
      const double ratio = si.sup / si.inf;
      bucket = std::max(bucket, ratio);
      if (ratio > C) {
        C = ratio;
        witness = {{"r", r}, {"member", name}, {"ratio", ratio}, {"sup_at", pj(si.sup_at, d)}, {"sup_k", si.sup_k},
                   {"inf_at", pj(si.inf_at, d)}, {"inf_k", si.inf_k}};
      }
    };
    const auto poles = poles_for(ch.domain(), y, spacing, r, max_all);
    for (std::size_t i = 0; i < poles.size(); ++i)
      consider(kernel_data(poles[i], bottom), "kernel@" + to_string(poles[i], d), Ck);
    for (long m = 0; m < n_random; ++m) consider(random_data(seed, static_cast<std::uint64_t>(m)), member_name("random", m), Cr);
    const SupInf one = sup_inf(ch, bottom, s, one_data(), mask, ka, mask, kb);
    const double one_ratio = one.sup / one.inf;
    if (!(std::abs(one_ratio - 1.0) <= 1e-12)) const_ok = false;
    cs.push_back(C);
    if (C >= rep.constants.value("C", 0.0)) rep.witness = witness;
    rep.constants["C"] = std::max(rep.constants.value("C", 0.0), C);
    rep.rows.push_back({{"r", r}, {"C", C}, {"C_kernels", Ck}, {"C_random", Cr}, {"members", members},
                        {"poles", poles.size()}, {"constant_ratio", one_ratio}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", all_finite(cs)}, {"scale_stable", scale_stable(cs)}, {"constant_ratio_one", const_ok}};
  return rep;
}

// ---------------------------------------------------------------------------
// Harnack: normalized adjoint solutions

EstimateReport verify_harnack_adjoint(const Environment& env, const AdjointSolution& M, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point y0 = point_param(g, "y0", d, Point{});
  const auto radii = param(g, "r", std::vector<double>{8, 16, 32});
  const double spacing = param(g, "pole_spacing", 0.5);
  const auto max_all = param(g, "max_poles", std::size_t{64});
  const auto n_random = param(g, "random", 50L);
  const auto seed = param(g, "seed", std::uint64_t{1});
  const bool free_kernel = param(g, "free_kernel", d == 1);
  KernelOptions kopt;
  kopt.memory_budget = param(g, "budget", kDefaultMemoryBudget);

  EstimateReport rep;
  rep.estimate = "harnack-adjoint";
  rep.env_hash = env.hash();
  std::vector<double> cs;
  bool const_ok = true;
  for (double r : radii) {
    const Ball ball{d, y0, r}, half{d, y0, r / 2};
    if (!M.window.contains(half.bounding_box()))
      fail(ErrorCode::InvalidArgument, "adjoint window does not cover B_{r/2}(y0)");
    ClosureChain ch(env, Domain::ball(ball));
    const std::size_t n = ch.interior_size();
    std::vector<std::size_t> obs;
    std::vector<double> m_obs;
    for (std::size_t i = 0; i < n; ++i)
      if (half.contains(ch.point(i))) obs.push_back(i), m_obs.push_back(M.at(ch.point(i)));
    const auto ka = open_range(r * r, 2 * r * r);
    const auto kb = open_range(3 * r * r, 4 * r * r);
    double C = 0.0, Ck = 0.0, Cr = 0.0, Cf = 0.0;
    std::size_t members = 0;

    auto finish = [&](double sup, double inf, const std::string& name, double& bucket) {
      if (!(inf > 0.0)) {
        rep.skip("vanishes on inf-region");
        return;
      }
      ++members;
      const double ratio = sup / inf;
      bucket = std::max(bucket, ratio);
      if (ratio > C) {
        C = ratio;
        if (ratio >= rep.constants.value("C", 0.0)) rep.witness = {{"r", r}, {"member", name}, {"ratio", ratio}};
      }
    };
    auto run_killed = [&](std::vector<double> w, const std::string& name, double& bucket) {
      std::vector<double> nxt(n);
      double sup = 0.0, inf = std::numeric_limits<double>::infinity();
      for (long t = 1; t <= kb.second; ++t) {
        ch.forward(w, nxt);
        std::swap(w, nxt);
        const bool a = t >= ka.first && t <= ka.second, b = t >= kb.first;
        if (!a && !b) continue;
        for (std::size_t j = 0; j < obs.size(); ++j) {
          const double v = w[obs[j]] / m_obs[j];
          if (a) sup = std::max(sup, v);
          if (b) inf = std::min(inf, v);
        }
      }
      finish(sup, inf, name, bucket);
    };

    const auto poles = poles_for(ch.domain(), y0, spacing, r, max_all);
    for (const Point& z : poles) {
      std::vector<double> w(n, 0.0);
      w[static_cast<std::size_t>(ch.index_of(z))] = 1.0;
      run_killed(std::move(w), "killed@" + to_string(z, d), Ck);
    }
    for (long m = 0; m < n_random; ++m) {
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = datum(seed, static_cast<std::uint64_t>(m), ch.point(i), 0);
      run_killed(std::move(w), member_name("random", m), Cr);
    }
    if (free_kernel) {
      for (const Point& z : poles) {
        KernelEvolution evo(env, z, kb.second, kopt);
        double sup = 0.0, inf = std::numeric_limits<double>::infinity();
        for (long t = 1; t <= kb.second; ++t) {
          evo.advance();
          const bool a = t >= ka.first && t <= ka.second, b = t >= kb.first;
          if (!a && !b) continue;
          for (std::size_t j = 0; j < obs.size(); ++j) {
            const double v = evo.at(ch.point(obs[j])) / m_obs[j];
            if (a) sup = std::max(sup, v);
            if (b) inf = std::min(inf, v);
          }
        }
        finish(sup, inf, "free@" + to_string(z, d), Cf);
      }
    }
    // v = M / M.
    double one_sup = 0.0, one_inf = std::numeric_limits<double>::infinity();
    for (double m : m_obs) one_sup = std::max(one_sup, m / m), one_inf = std::min(one_inf, m / m);
    const double one_ratio = one_sup / one_inf;
    if (!(std::abs(one_ratio - 1.0) <= 1e-12)) const_ok = false;

    cs.push_back(C);
    rep.constants["C"] = std::max(rep.constants.value("C", 0.0), C);
    rep.rows.push_back({{"r", r}, {"C", C}, {"C_killed", Ck}, {"C_random", Cr}, {"C_free", Cf}, {"members", members},
                        {"poles", poles.size()}, {"constant_ratio", one_ratio}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", all_finite(cs)}, {"scale_stable", scale_stable(cs)}, {"constant_ratio_one", const_ok}};
  return rep;
}

// ---------------------------------------------------------------------------
// Harnack: backward in time, vanishing on the lateral boundary

EstimateReport verify_harnack_backward(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point y0 = point_param(g, "y0", d, Point{});
  const auto radii = param(g, "r", std::vector<double>{8, 16, 32});
  const double spacing = param(g, "pole_spacing", 0.25);
  const auto max_all = param(g, "max_poles", std::size_t{400});
  const auto n_random = param(g, "random", 50L);
  const auto seed = param(g, "seed", std::uint64_t{1});
  const double r_min = param(g, "r_min", 4.0 * env.gamma().diameter());

  EstimateReport rep;
  rep.estimate = "harnack-backward";
  rep.env_hash = env.hash();
  std::vector<double> cs_large;
  bool finite = true, uniform = true, const_ok = true;
  for (double r : radii) {
    const Ball ball{d, y0, r};
    ClosureChain ch(env, Domain::ball(ball));
    const std::size_t n = ch.interior_size();
    const long k_lo = ceil_l(r * r), k_hi = floor_l(3 * r * r);
    const long shift = 2 * static_cast<long>(std::floor(r + 1e-9)) * static_cast<long>(std::floor(r + 1e-9));
    const long top = k_hi + shift;
    const bool small = r < r_min;

    auto ratio_of = [&](const BoundaryData& phi, double& worst, json& where) {
      std::vector<std::vector<double>> stored(static_cast<std::size_t>(k_hi - k_lo + 1));
      long zeros = 0;
      worst = 0.0;
      solve_caloric_streaming(ch, 0, top, phi, [&](long k, std::span<const double> u) {
        if (k >= k_lo && k <= k_hi) stored[static_cast<std::size_t>(k - k_lo)].assign(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(n));
        const long k0 = k - shift;
        if (k0 < k_lo || k0 > k_hi) return;
        const auto& base = stored[static_cast<std::size_t>(k0 - k_lo)];
        for (std::size_t i = 0; i < n; ++i) {
          if (!(base[i] > 0.0)) {
            ++zeros;
            continue;
          }
          const double q = u[i] / base[i];
          if (q > worst) worst = q, where = {{"x", pj(ch.point(i), d)}, {"k", k0}};
        }
        if (k0 > k_lo) std::vector<double>().swap(stored[static_cast<std::size_t>(k0 - k_lo - 1)]);
      });
      return zeros;
    };

    const bool exhaustive = n <= max_all;
    const auto poles = poles_for(ch.domain(), y0, spacing, r, max_all);
    double Ck = 0.0, Cr = 0.0;
    json wk, wr;
    long zeros = 0;
    for (const Point& z : poles) {
      double q;
      json where;
      zeros += ratio_of(kernel_data(z, 0), q, where);
      if (q > Ck) Ck = q, wk = {{"pole", pj(z, d)}, {"at", where}, {"ratio", q}};
    }
    for (long m = 0; m < n_random; ++m) {
      double q;
      json where;
      const std::uint64_t mm = static_cast<std::uint64_t>(m);
      zeros += ratio_of([&, mm](const Point& p, long k) { return k == 0 ? datum(seed, mm, p, 0) : 0.0; }, q, where);
      if (q > Cr) Cr = q, wr = {{"member", member_name("random", m)}, {"at", where}, {"ratio", q}};
    }
    if (zeros) rep.skip("zero denominator", zeros);
    double one;
    json where;
    ratio_of(one_data(), one, where);
    if (!(std::abs(one - 1.0) <= 1e-12)) const_ok = false;

    const bool row_uniform = Cr <= Ck * (1 + 1e-12);
    if (!small) {
      finite = finite && std::isfinite(Ck) && std::isfinite(Cr) && zeros == 0;
      if (exhaustive) uniform = uniform && row_uniform;
      cs_large.push_back(std::max(Ck, Cr));
      if (std::max(Ck, Cr) >= rep.constants.value("C", 0.0)) rep.witness = Ck >= Cr ? wk : wr;
      rep.constants["C"] = std::max(rep.constants.value("C", 0.0), std::max(Ck, Cr));
    }
    rep.rows.push_back({{"r", r}, {"small_r", small}, {"C_kernels", Ck}, {"C_random", Cr}, {"exhaustive_poles", exhaustive},
                        {"poles", poles.size()}, {"random_within_kernel_constant", row_uniform}, {"constant_ratio", one}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", finite && !cs_large.empty()}, {"uniform_on_family", uniform}, {"constant_ratio_one", const_ok}};
  rep.constants["scale_stable"] = scale_stable(cs_large);
  return rep;
}


// ---------------------------------------------------------------------------
// Boundary geometry

Point boundary_point(const Environment& env, double R0, const Point& y0, const Point& direction) {
  const int d = env.dim();
  if (!(R0 > 0)) fail(ErrorCode::InvalidArgument, "R0 must be positive");
  if (norm2(direction) == 0) fail(ErrorCode::InvalidArgument, "direction must be nonzero");
  ClosureChain ch(env, Domain::ball(Ball{d, y0, R0}));
  const double len = norm(direction);
  std::array<double, kMaxDim> target{};
  for (int i = 0; i < d; ++i) target[static_cast<std::size_t>(i)] = y0[i] + R0 * direction[i] / len;
  std::optional<Point> best;
  double best_d = 0;
  for (const Point& p : ch.boundary()) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += (p[i] - target[static_cast<std::size_t>(i)]) * (p[i] - target[static_cast<std::size_t>(i)]);
    if (!best || s < best_d - 1e-9 || (s <= best_d + 1e-9 && p < *best)) {
      best = p;
      best_d = s;
    }
  }
  return *best;
}

Point inner_point(const Environment& env, double R0, const Point& y0, const Point& y, double r) {
  const int d = env.dim();
  const Ball omega{d, y0, R0};
  const Point dir = y - y0;
  if (norm2(dir) == 0) fail(ErrorCode::InvalidArgument, "y must differ from y0");
  const double len = norm(dir), along = R0 - r / 2;
  std::array<double, kMaxDim> target{};
  Point c{};
  for (int i = 0; i < d; ++i) {
    target[static_cast<std::size_t>(i)] = y0[i] + along * dir[i] / len;
    c[i] = static_cast<Coord>(std::lround(target[static_cast<std::size_t>(i)]));
  }
  std::optional<Point> best;
  double best_d = 0;
  for_each_point(Box::around(d, c, 2), [&](const Point& p) {
    if (!omega.contains(p)) return;
    double s = 0;
    for (int i = 0; i < d; ++i) s += (p[i] - target[static_cast<std::size_t>(i)]) * (p[i] - target[static_cast<std::size_t>(i)]);
    if (s > 1 + 1e-9) return;
    if (!best || s < best_d - 1e-9 || (s <= best_d + 1e-9 && p < *best)) {
      best = p;
      best_d = s;
    }
  });
  if (!best)
    fail(ErrorCode::InvalidArgument, "no point of Omega within distance 1 of the inner reference point for r = " +
                                         std::to_string(r));
  return *best;
}

namespace detail {

struct BoundaryGeom {
  int d = 1;
  double R0 = 0;
  Point y0{}, y{};
  Ball omega;
  std::vector<Point> d_omega;

  bool in_omega(const Point& p) const { return omega.contains(p); }
  double dist_to_boundary(const Point& p) const {
    Coord best = std::numeric_limits<Coord>::max();
    for (const Point& b : d_omega) best = std::min(best, norm2(p - b));
    return std::sqrt(static_cast<double>(best));
  }
};

BoundaryGeom boundary_geom(const Environment& env, json& g) {
  BoundaryGeom G;
  G.d = env.dim();
  G.R0 = param(g, "R0", 32.0);
  G.y0 = point_param(g, "y0", G.d, Point{});
  G.omega = Ball{G.d, G.y0, G.R0};
  ClosureChain ch(env, Domain::ball(G.omega));
  G.d_omega = ch.boundary();
  if (g.contains("y") && !g["y"].is_null()) {
    G.y = point_param(g, "y", G.d, Point{});
    if (std::find(G.d_omega.begin(), G.d_omega.end(), G.y) == G.d_omega.end())
      fail(ErrorCode::InvalidArgument, "Y = " + to_string(G.y, G.d) + " is not on the boundary of Omega");
  } else {
    const Point dir = point_param(g, "direction", G.d, unit_vector(0));
    G.y = boundary_point(env, G.R0, G.y0, dir);
    g["y"] = pj(G.y, G.d);
  }
  return G;
}

Domain omega_part(const BoundaryGeom& G, const Ball& b) {
  return Domain(b.bounding_box(), [&](const Point& p) { return b.contains(p) && G.in_omega(p); });
}

// A stored caloric solution restricted to a region, plus probe values.
struct Member {
  std::string name;
  std::vector<double> region;
  std::vector<double> probes;
};

// Runs one solve, recording u on mask x [k_lo, k_hi] and at the probes.
Member record(const ClosureChain& ch, long bottom, long top, const BoundaryData& phi, const std::vector<char>& mask,
              long k_lo, long k_hi, const std::vector<std::pair<std::int32_t, long>>& probes, std::string name) {
  Member m;
  m.name = std::move(name);
  m.probes.assign(probes.size(), std::nan(""));
  const std::size_t n = ch.interior_size();
  solve_caloric_streaming(ch, bottom, top, phi, [&](long k, std::span<const double> u) {
    if (k >= k_lo && k <= k_hi)
      for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) m.region.push_back(u[i]);
    for (std::size_t j = 0; j < probes.size(); ++j)
      if (probes[j].second == k) m.probes[j] = u[static_cast<std::size_t>(probes[j].first)];
  });
  return m;
}

bool any_set(const std::vector<char>& m) { return std::find(m.begin(), m.end(), 1) != m.end(); }

std::int32_t interior_index(const ClosureChain& ch, const Point& p, int d) {
  const std::int32_t i = ch.index_of(p);
  if (!ch.is_interior(i)) fail(ErrorCode::InvalidArgument, "point " + to_string(p, d) + " is not inside the domain");
  return i;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Boundary Harnack

EstimateReport verify_harnack_boundary(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const BoundaryGeom G = boundary_geom(env, g);
  const int d = G.d;
  const auto radii = param(g, "r", std::vector<double>{2, 4});
  const double K = param(g, "K", 4.0);
  const double spacing = param(g, "pole_spacing", 0.5);
  const auto max_all = param(g, "max_poles", std::size_t{32});
  const auto n_random = param(g, "random", 10L);
  const auto seed = param(g, "seed", std::uint64_t{1});
  const double r_min = param(g, "r_min", 1.0);

  EstimateReport rep;
  rep.estimate = "harnack-boundary";
  rep.env_hash = env.hash();
  ClosureChain ch(env, Domain::ball(G.omega));
  std::vector<double> cs;
  bool const_ok = true;
  for (double r : radii) {
    const double Kr = K * r;
    const long s = ceil_l(9 * Kr * Kr);
    const long lift = 2 * floor_sq(std::floor(Kr + 1e-9));
    const long top = s + lift;
    const Point yk = inner_point(env, G.R0, G.y0, G.y, Kr);
    const std::int32_t iy = interior_index(ch, yk, d);
    const std::vector<std::pair<std::int32_t, long>> probes = {{iy, s + lift}, {iy, s - lift}};
    const Ball br{d, G.y, r};
    const auto mask = interior_mask(ch, [&](const Point& p) { return br.contains(p); });
    const long k_lo = ceil_l(s - r * r);
    if (!any_set(mask)) {
      rep.skip("empty Q_r(Y)");
      rep.rows.push_back({{"r", r}, {"valid", false}, {"empty", true}});
      continue;
    }

    std::vector<Member> members;
    const auto poles = poles_for(omega_part(G, Ball{d, G.y, 3 * Kr}), G.y, spacing, r, max_all);
    for (const Point& z : poles) members.push_back(record(ch, 0, top, kernel_data(z, 0), mask, k_lo, s, probes, "kernel@" + to_string(z, d)));
    for (long m = 0; m < n_random; ++m) {
      const std::uint64_t mm = static_cast<std::uint64_t>(m);
      members.push_back(record(ch, 0, top, [&, mm](const Point& p, long k) { return k == 0 && G.in_omega(p) ? datum(seed, mm, p, 0) : 0.0; },
                               mask, k_lo, s, probes, member_name("random", m)));
    }

    double C = 0.0;
    json witness;
    long skipped = 0;
    for (const Member& u : members)
      for (const Member& v : members) {
        if (!(u.probes[0] > 0.0)) {
          ++skipped;
          continue;
        }
        double q = 0.0;
        bool zero = false;
        for (std::size_t i = 0; i < u.region.size(); ++i) {
          if (!(v.region[i] > 0.0)) {
            if (u.region[i] > 0.0) zero = true;
            continue;
          }
          q = std::max(q, u.region[i] / v.region[i]);
        }
        if (zero) {
          ++skipped;
          continue;
        }
        const double c = q * v.probes[1] / u.probes[0];
        if (c > C) C = c, witness = {{"r", r}, {"u", u.name}, {"v", v.name}, {"ratio", c}};
      }
    if (skipped) rep.skip("vanishing denominator", skipped);

    const Member one = record(ch, 0, top, one_data(), mask, k_lo, s, probes, "one");
    double q1 = 0.0;
    for (double x : one.region) q1 = std::max(q1, x / x);
    const double one_ratio = q1 * one.probes[1] / one.probes[0];
    if (!(std::abs(one_ratio - 1.0) <= 1e-12)) const_ok = false;

    const bool valid = r >= r_min && Kr <= G.R0;
    if (valid) {
      cs.push_back(C);
      if (C >= rep.constants.value("C", 0.0)) rep.witness = witness;
      rep.constants["C"] = std::max(rep.constants.value("C", 0.0), C);
    }
    rep.rows.push_back({{"r", r}, {"C", C}, {"valid", valid}, {"y_Kr", pj(yk, d)}, {"s", s}, {"members", members.size()},
                        {"constant_ratio", one_ratio}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", all_finite(cs)}, {"constant_ratio_one", const_ok}};
  return rep;
}

// ---------------------------------------------------------------------------
// Carleson

EstimateReport verify_carleson(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const BoundaryGeom G = boundary_geom(env, g);
  const int d = G.d;
  const auto radii = param(g, "r", std::vector<double>{2, 4, 8});
  const double spacing = param(g, "pole_spacing", 0.5);
  const auto max_all = param(g, "max_poles", std::size_t{64});
  const auto n_random = param(g, "random", 20L);
  const auto seed = param(g, "seed", std::uint64_t{1});

  EstimateReport rep;
  rep.estimate = "carleson";
  rep.env_hash = env.hash();
  std::vector<double> cs;
  bool const_ok = true;
  for (double r : radii) {
    const long s = ceil_l(9 * r * r);
    const long top = s + 2 * floor_sq(std::floor(r + 1e-9));
    const Point yr = inner_point(env, G.R0, G.y0, G.y, r);
    const Ball br{d, G.y, r};
    const long k_lo = ceil_l(s - r * r);
    double C = 0.0;
    json witness;
    long skipped = 0;
    auto consider = [&](const Member& m) {
      if (!(m.probes[0] > 0.0)) {
        ++skipped;
        return;
      }
      double sup = 0.0;
      for (double v : m.region) sup = std::max(sup, v);
      const double c = sup / m.probes[0];
      if (c > C) C = c, witness = {{"r", r}, {"member", m.name}, {"ratio", c}};
    };

    // Kernels of the walk killed on leaving Omega.
    ClosureChain full(env, Domain::ball(G.omega));
    if (omega_part(G, br).count() == 0) {
      rep.skip("empty Q_r(Y)");
      rep.rows.push_back({{"r", r}, {"empty", true}});
      continue;
    }
    {
      const auto mask = interior_mask(full, [&](const Point& p) { return br.contains(p); });
      const std::vector<std::pair<std::int32_t, long>> probes = {{interior_index(full, yr, d), top}};
      const auto poles = poles_for(omega_part(G, Ball{d, G.y, 3 * r}), G.y, spacing, r, max_all);
      for (const Point& z : poles) consider(record(full, 0, top, kernel_data(z, 0), mask, k_lo, s, probes, "kernel@" + to_string(z, d)));
    }
    // Random data on the parabolic boundary of (Omega n B_3r(y)), zero on dOmega.
    double one_ratio;
    {
      ClosureChain loc(env, omega_part(G, Ball{d, G.y, 3 * r}));
      const auto mask = interior_mask(loc, [&](const Point& p) { return br.contains(p); });
      const std::vector<std::pair<std::int32_t, long>> probes = {{interior_index(loc, yr, d), top}};
      for (long m = 0; m < n_random; ++m) {
        const std::uint64_t mm = static_cast<std::uint64_t>(m);
        consider(record(loc, 0, top, [&, mm](const Point& p, long k) { return G.in_omega(p) ? datum(seed, mm, p, k) : 0.0; },
                        mask, k_lo, s, probes, member_name("random", m)));
      }
      const Member one = record(loc, 0, top, one_data(), mask, k_lo, s, probes, "one");
      double sup = 0.0;
      for (double v : one.region) sup = std::max(sup, v);
      one_ratio = sup / one.probes[0];
    }
    if (!(std::abs(one_ratio - 1.0) <= 1e-12)) const_ok = false;
    if (skipped) rep.skip("vanishing denominator", skipped);
    cs.push_back(C);
    if (C >= rep.constants.value("C", 0.0)) rep.witness = witness;
    rep.constants["C"] = std::max(rep.constants.value("C", 0.0), C);
    rep.rows.push_back({{"r", r}, {"C", C}, {"y_r", pj(yr, d)}, {"s", s}, {"constant_ratio", one_ratio}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", all_finite(cs)}, {"constant_ratio_one", const_ok}};
  return rep;
}

// ---------------------------------------------------------------------------
// Caloric measure lower bound

EstimateReport verify_caloric_lower(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const BoundaryGeom G = boundary_geom(env, g);
  const int d = G.d;
  const auto radii = param(g, "r", std::vector<double>{2, 4, 8});

  EstimateReport rep;
  rep.estimate = "caloric-lower";
  rep.env_hash = env.hash();
  std::vector<double> thetas;
  for (double r : radii) {
    const Ball b2{d, G.y, 2 * r}, b1{d, G.y, r};
    ClosureChain ch(env, omega_part(G, b2));
    const long s = ceil_l(4 * r * r);
    const long bottom = ceil_l(s - 4 * r * r);
    const auto mask = interior_mask(ch, [&](const Point& p) { return b1.contains(p); });
    const long k_lo = ceil_l(s - r * r);
    if (!any_set(mask)) {
      rep.skip("empty Q_r(Y)");
      rep.rows.push_back({{"r", r}, {"empty", true}});
      continue;
    }
    const Member m = record(
        ch, bottom, s, [&](const Point& p, long k) { return (!G.in_omega(p) && b2.contains(p) && k >= bottom && k <= s) ? 1.0 : 0.0; },
        mask, k_lo, s, {}, "boundary-indicator");
    double theta = std::numeric_limits<double>::infinity();
    for (double v : m.region) theta = std::min(theta, v);
    thetas.push_back(theta);
    rep.rows.push_back({{"r", r}, {"theta", theta}, {"s", s}, {"points", m.region.size()}});
  }
  double tmin = std::numeric_limits<double>::infinity();
  for (double t : thetas) tmin = std::min(tmin, t);
  rep.grid = g;
  rep.constants = {{"theta", tmin}};
  rep.verdicts = {{"theta_positive", !thetas.empty() && tmin > 0.0}};
  return rep;
}

// ---------------------------------------------------------------------------
// Decay near the boundary

EstimateReport verify_decay(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const BoundaryGeom G = boundary_geom(env, g);
  const int d = G.d;
  const auto radii = param(g, "r", std::vector<double>{2, 4, 8});
  const double spacing = param(g, "pole_spacing", 0.5);
  const auto max_all = param(g, "max_poles", std::size_t{64});
  const auto n_random = param(g, "random", 20L);
  const auto seed = param(g, "seed", std::uint64_t{1});

  EstimateReport rep;
  rep.estimate = "decay";
  rep.env_hash = env.hash();
  std::vector<double> rhos;
  for (double r : radii) {
    const Ball b3{d, G.y, 3 * r}, b2{d, G.y, 2 * r}, b1{d, G.y, r};
    ClosureChain ch(env, omega_part(G, b3));
    const long s = ceil_l(9 * r * r);
    const long bottom = ceil_l(s - 9 * r * r);
    const long k2 = ceil_l(s - 4 * r * r), k1 = ceil_l(s - r * r);
    const auto m2 = interior_mask(ch, [&](const Point& p) { return b2.contains(p); });
    const auto m1 = interior_mask(ch, [&](const Point& p) { return b1.contains(p); });
    if (!any_set(m1)) {
      rep.skip("empty Q_r(Y)");
      rep.rows.push_back({{"r", r}, {"empty", true}});
      continue;
    }
    double rho = 0.0;
    json witness;
    long skipped = 0;
    auto consider = [&](const BoundaryData& phi, const std::string& name) {
      double M1 = 0.0, M2 = 0.0;
      solve_caloric_streaming(ch, bottom, s, phi, [&](long k, std::span<const double> u) {
        for (std::size_t i = 0; i < ch.interior_size(); ++i) {
          if (k >= k2 && m2[i]) M2 = std::max(M2, u[i]);
          if (k >= k1 && m1[i]) M1 = std::max(M1, u[i]);
        }
      });
      if (!(M2 > 0.0)) {
        ++skipped;
        return;
      }
      if (M1 / M2 > rho) rho = M1 / M2, witness = {{"r", r}, {"member", name}, {"M_r", M1}, {"M_2r", M2}};
    };
    const auto poles = poles_for(ch.domain(), G.y, spacing, r, max_all);
    for (const Point& z : poles) consider(kernel_data(z, bottom), "kernel@" + to_string(z, d));
    for (long m = 0; m < n_random; ++m) {
      const std::uint64_t mm = static_cast<std::uint64_t>(m);
      consider(
          [&, mm](const Point& p, long k) {
            const bool on_delta = !G.in_omega(p) && b2.contains(p) && k >= k2 && k <= s;
            return on_delta ? 0.0 : datum(seed, mm, p, k);
          },
          member_name("random", m));
    }
    if (skipped) rep.skip("vanishes on Q_2r", skipped);
    rhos.push_back(rho);
    if (rho >= rep.constants.value("rho", 0.0)) rep.witness = witness;
    rep.constants["rho"] = std::max(rep.constants.value("rho", 0.0), rho);
    rep.rows.push_back({{"r", r}, {"rho", rho}, {"s", s}});
  }
  bool below = !rhos.empty();
  for (double v : rhos) below = below && v < 1.0;
  rep.grid = g;
  rep.verdicts = {{"rho_below_one", below}};
  return rep;
}

// ---------------------------------------------------------------------------
// Exit split: far side S against the thin shell Lambda

EstimateReport verify_exit_split(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const BoundaryGeom G = boundary_geom(env, g);
  const int d = G.d;
  const auto radii = param(g, "r", std::vector<double>{4});
  const auto Ks = param(g, "K", std::vector<double>{2, 3, 4, 5, 6, 7, 8});

  EstimateReport rep;
  rep.estimate = "exit-split";
  rep.env_hash = env.hash();
  bool all_found = !radii.empty();
  for (double r : radii) {
    std::optional<double> found;
    json kr = json::array();
    for (double K : Ks) {
      const double R = K * r;
      const Ball bR{d, G.y, R}, b1{d, G.y, r};
      std::map<Point, double> dist;
      auto dist_of = [&](const Point& p) {
        auto it = dist.find(p);
        if (it != dist.end()) return it->second;
        return dist[p] = G.dist_to_boundary(p);
      };
      ClosureChain ch(env, Domain(bR.bounding_box(), [&](const Point& p) {
                        return bR.contains(p) && G.in_omega(p) && dist_of(p) < r;
                      }));
      const long s = ceil_l(R * R);
      const long bottom = ceil_l(s - R * R);
      const auto mask = interior_mask(ch, [&](const Point& p) { return b1.contains(p); });
      const long k_lo = ceil_l(s - r * r);
      if (!any_set(mask)) {
        rep.skip("empty Q_r(Y)");
        kr.push_back({{"K", K}, {"empty", true}});
        continue;
      }
      auto far = [&](const Point& p, long k) {
        return (k > bottom && G.in_omega(p) && !ch.domain().contains(p) && dist_of(p) >= r) ? 1.0 : 0.0;
      };
      auto shell = [&](const Point& p, long k) {
        if (!G.in_omega(p)) return 0.0;
        if (k == bottom) return ch.domain().contains(p) ? 1.0 : 0.0;
        return dist_of(p) < r ? 1.0 : 0.0;
      };
      const Member PS = record(ch, bottom, s, far, mask, k_lo, s, {}, "S");
      const Member PL = record(ch, bottom, s, shell, mask, k_lo, s, {}, "Lambda");
      double margin = std::numeric_limits<double>::infinity(), ps_min = margin, pl_max = 0.0;
      for (std::size_t i = 0; i < PS.region.size(); ++i) {
        margin = std::min(margin, PS.region[i] - PL.region[i]);
        ps_min = std::min(ps_min, PS.region[i]);
        pl_max = std::max(pl_max, PL.region[i]);
      }
      const bool ok = margin >= 0.0;
      kr.push_back({{"K", K}, {"margin", margin}, {"P_S_min", ps_min}, {"P_Lambda_max", pl_max}, {"holds", ok},
                    {"within_R0_half", R <= G.R0 / 2}});
      if (ok && !found) found = K;
    }
    all_found = all_found && found.has_value();
    rep.rows.push_back({{"r", r}, {"K_min", found ? json(*found) : json(nullptr)}, {"scan", kr}});
    if (found) rep.constants["K_r" + std::to_string(static_cast<long>(std::lround(r)))] = *found;
  }
  rep.grid = g;
  rep.verdicts = {{"K_found", all_found}};
  return rep;
}

// ---------------------------------------------------------------------------
// Comparability of killed solutions

EstimateReport verify_comparability(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point y0 = point_param(g, "y0", d, Point{});
  const auto radii = param(g, "r", std::vector<double>{4, 8});
  const double spacing = param(g, "pole_spacing", 0.5);
  const auto max_all = param(g, "max_poles", std::size_t{64});

  EstimateReport rep;
  rep.estimate = "comparability";
  rep.env_hash = env.hash();
  std::vector<double> cs;
  bool const_ok = true;
  for (double r : radii) {
    const Ball ball{d, y0, r}, half{d, y0, r / 2};
    ClosureChain ch(env, Domain::ball(ball));
    const long rr = floor_sq(std::floor(r + 1e-9));
    const long k_lo = ceil_l(r * r), k_hi = floor_l(3 * r * r);
    const long top = std::max(4 * rr, k_hi);
    const auto all = interior_mask(ch, [](const Point&) { return true; });
    std::vector<std::pair<std::int32_t, long>> probes;
    std::size_t n_half = 0;
    for (std::size_t i = 0; i < ch.interior_size(); ++i)
      if (half.contains(ch.point(i))) ++n_half, probes.emplace_back(static_cast<std::int32_t>(i), rr);
    for (std::size_t i = 0; i < ch.interior_size(); ++i)
      if (half.contains(ch.point(i))) probes.emplace_back(static_cast<std::int32_t>(i), 4 * rr);

    auto combine = [&](const Member& u, const Member& v, long& skipped) {
      double a = 0.0, b = 0.0;
      for (std::size_t j = 0; j < n_half; ++j) {
        if (!(v.probes[n_half + j] > 0.0)) {
          ++skipped;
          return -1.0;
        }
        a = std::max(a, u.probes[j] / v.probes[n_half + j]);
      }
      for (std::size_t i = 0; i < u.region.size(); ++i) {
        if (!(u.region[i] > 0.0)) {
          ++skipped;
          return -1.0;
        }
        b = std::max(b, v.region[i] / u.region[i]);
      }
      return a * b;
    };

    std::vector<Member> members;
    for (const Point& z : poles_for(ch.domain(), y0, spacing, r, max_all))
      members.push_back(record(ch, 0, top, kernel_data(z, 0), all, k_lo, k_hi, probes, "kernel@" + to_string(z, d)));
    double C = 0.0;
    json witness;
    long skipped = 0;
    for (const Member& u : members)
      for (const Member& v : members) {
        const double c = combine(u, v, skipped);
        if (c > C) C = c, witness = {{"r", r}, {"u", u.name}, {"v", v.name}, {"ratio", c}};
      }
    if (skipped) rep.skip("vanishing denominator", skipped);
    const Member one = record(ch, 0, top, [](const Point& p, long) { (void)p; return 1.0; }, all, k_lo, k_hi, probes, "one");
    long dummy = 0;
    const double one_ratio = combine(one, one, dummy);
    if (!(std::abs(one_ratio - 1.0) <= 1e-12)) const_ok = false;
    cs.push_back(C);
    if (C >= rep.constants.value("C", 0.0)) rep.witness = witness;
    rep.constants["C"] = std::max(rep.constants.value("C", 0.0), C);
    rep.rows.push_back({{"r", r}, {"C", C}, {"members", members.size()}, {"constant_ratio", one_ratio}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", all_finite(cs)}, {"constant_ratio_one", const_ok}};
  return rep;
}

// ---------------------------------------------------------------------------
// Killed kernel monotone under a time shift near the boundary

EstimateReport verify_shift_monotone(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point y0 = point_param(g, "y0", d, Point{});
  const auto radii = param(g, "r", std::vector<double>{4, 8, 16});
  const double c = param(g, "c", 0.25);
  const double spacing = param(g, "pole_spacing", 0.25);
  const auto max_all = param(g, "max_poles", std::size_t{64});

  EstimateReport rep;
  rep.estimate = "shift-monotone";
  rep.env_hash = env.hash();
  std::vector<double> cs;
  for (double r : radii) {
    const Ball ball{d, y0, r}, half{d, y0, r / 2};
    ClosureChain ch(env, Domain::ball(ball));
    const long shift = floor_sq(r);
    const auto ks = open_range(0.0, 2 * r * r);
    std::vector<double> bdist(ch.interior_size());
    for (std::size_t i = 0; i < ch.interior_size(); ++i) {
      Coord best = std::numeric_limits<Coord>::max();
      for (const Point& b : ch.boundary()) best = std::min(best, norm2(ch.point(i) - b));
      bdist[i] = std::sqrt(static_cast<double>(best));
    }
    const auto near = interior_mask(ch, [&](const Point& p) { return bdist[static_cast<std::size_t>(ch.index_of(p))] <= c * r; });
    double C = 0.0;
    json witness;
    long zeros = 0;
    std::size_t n_poles = 0;
    const Domain half_dom = Domain::ball(half);
    for (const Point& y : poles_for(half_dom, y0, spacing, r, max_all)) {
      ++n_poles;
      std::vector<std::vector<double>> stored(static_cast<std::size_t>(std::max(0L, ks.second - ks.first + 1)));
      solve_caloric_streaming(ch, 0, ks.second + shift, kernel_data(y, 0), [&](long k, std::span<const double> u) {
        if (k >= ks.first && k <= ks.second) {
          auto& st = stored[static_cast<std::size_t>(k - ks.first)];
          for (std::size_t i = 0; i < ch.interior_size(); ++i)
            if (near[i]) st.push_back(u[i]);
        }
        const long k0 = k - shift;
        if (k0 < ks.first || k0 > ks.second) return;
        const auto& base = stored[static_cast<std::size_t>(k0 - ks.first)];
        std::size_t j = 0;
        for (std::size_t i = 0; i < ch.interior_size(); ++i) {
          if (!near[i]) continue;
          const double num = base[j++];
          if (!(u[i] > 0.0)) {
            if (num > 0.0) ++zeros;
            continue;
          }
          const double q = num / u[i];
          if (q > C) C = q, witness = {{"r", r}, {"y", pj(y, d)}, {"x", pj(ch.point(i), d)}, {"s", k0}, {"ratio", q}};
        }
        std::vector<double>().swap(stored[static_cast<std::size_t>(k0 - ks.first)]);
      });
    }
    if (zeros) rep.skip("shifted kernel vanishes", zeros);
    const double Cr = zeros ? std::numeric_limits<double>::infinity() : C;
    cs.push_back(Cr);
    if (Cr >= rep.constants.value("C", 0.0)) rep.witness = witness;
    rep.constants["C"] = std::max(rep.constants.value("C", 0.0), Cr);
    rep.rows.push_back({{"r", r}, {"C", Cr}, {"poles", n_poles}, {"shift", shift}});
  }
  rep.grid = g;
  rep.verdicts = {{"finite", all_finite(cs)}};
  return rep;
}

// ---------------------------------------------------------------------------
// Maximum principle

EstimateReport verify_maximum_principle(const Environment& env, const Grid& grid) {
  json g = complete(grid);
  const int d = env.dim();
  const Point c = point_param(g, "center", d, Point{});
  const double R = param(g, "R", 4.0);
  const long height = param(g, "height", 10L);
  const long count = param(g, "count", 100L);
  const auto seed = param(g, "seed", std::uint64_t{1});

  EstimateReport rep;
  rep.estimate = "maximum-principle";
  rep.env_hash = env.hash();
  ClosureChain ch(env, Domain::ball(Ball{d, c, R}));
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  bool ok = true;
  for (long m = 0; m < count; ++m) {
    const std::uint64_t mm = static_cast<std::uint64_t>(m);
    double dmax = 0.0, umin = std::numeric_limits<double>::infinity(), umax = 0.0;
    // Uniform on [0, 1) with a share of exact zeros.
    auto phi = [&](const Point& p, long k) {
      const double v = datum(seed, mm, p, k);
      const double x = v < 0.25 ? 0.0 : (v - 0.25) / 0.75;
      dmax = std::max(dmax, x);
      return x;
    };
    solve_caloric_streaming(ch, 0, height, phi, [&](long k, std::span<const double> u) {
      if (k == 0) return;
      for (std::size_t i = 0; i < ch.interior_size(); ++i) umin = std::min(umin, u[i]), umax = std::max(umax, u[i]);
    });
    lo = std::min(lo, umin);
    hi = std::max(hi, umax / std::max(dmax, 1e-300));
    if (!(umin >= 0.0) || !(umax <= dmax)) {
      ok = false;
      rep.witness = {{"member", member_name("random", static_cast<std::size_t>(m))}, {"min", umin}, {"max", umax}, {"data_max", dmax}};
    }
  }
  rep.grid = g;
  rep.constants = {{"interior_min", lo}, {"max_over_data_max", hi}};
  rep.verdicts = {{"nonnegative_and_bounded", ok}};
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatch

const std::vector<std::string>& estimate_names() {
  static const std::vector<std::string> names = {
      "mass-escape", "gaussian",  "doubling", "volume-doubling", "harnack-parabolic", "harnack-adjoint",
      "harnack-backward", "harnack-boundary", "carleson", "caloric-lower", "decay", "exit-split",
      "comparability", "shift-monotone", "maximum-principle"};
  return names;
}

bool estimate_needs_adjoint(const std::string& name) {
  return name == "gaussian" || name == "doubling" || name == "volume-doubling" || name == "harnack-adjoint";
}

EstimateReport run_estimate(const std::string& name, const Environment& env, const AdjointSolution* M, const Grid& grid) {
  if (estimate_needs_adjoint(name) && !M) fail(ErrorCode::InvalidArgument, "estimate '" + name + "' needs an adjoint solution");
  if (M && M->dim != env.dim()) fail(ErrorCode::InvalidArgument, "adjoint solution dimension does not match the environment");
  if (name == "mass-escape") return verify_mass_escape(env, grid);
  if (name == "gaussian") return verify_gaussian(env, *M, grid);
  if (name == "doubling") return verify_doubling(env, *M, grid);
  if (name == "volume-doubling") {
    json g = complete(grid);
    const auto radii = param(g, "r", std::vector<double>{4, 8, 16});
    json cj = g.contains("centers") ? g["centers"] : json::array({pj(Point{}, env.dim())});
    std::vector<Point> centers;
    for (auto& c : cj) {
      json tmp = {{"c", c}};
      centers.push_back(point_param(tmp, "c", env.dim(), Point{}));
    }
    g["centers"] = cj;
    EstimateReport rep = doubling_report(*M, centers, radii);
    rep.env_hash = env.hash();
    rep.grid = g;
    return rep;
  }
  if (name == "harnack-parabolic") return verify_harnack_parabolic(env, grid);
  if (name == "harnack-adjoint") return verify_harnack_adjoint(env, *M, grid);
  if (name == "harnack-backward") return verify_harnack_backward(env, grid);
  if (name == "harnack-boundary") return verify_harnack_boundary(env, grid);
  if (name == "carleson") return verify_carleson(env, grid);
  if (name == "caloric-lower") return verify_caloric_lower(env, grid);
  if (name == "decay") return verify_decay(env, grid);
  if (name == "exit-split") return verify_exit_split(env, grid);
  if (name == "comparability") return verify_comparability(env, grid);
  if (name == "shift-monotone") return verify_shift_monotone(env, grid);
  if (name == "maximum-principle") return verify_maximum_principle(env, grid);
  fail(ErrorCode::InvalidArgument, "unknown estimate '" + name + "'");
}

}  // namespace heatlab
