// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "adjoint.hpp"
#include "io.hpp"
#include "kernel.hpp"
#include "montecarlo.hpp"
#include "potential.hpp"
#include "verify.hpp"

using namespace heatlab;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Environment make_env(const json& j) { return generate(EnvironmentSpec::from_json(j)); }

json lazy1() { return {{"dimension", 1}, {"kind", "constant"}, {"alpha", 0.25}, {"params", {{"lazy", true}}}}; }
json random_env(int d, std::uint64_t seed, double alpha = 0.05) {
  return {{"dimension", d}, {"kind", "random"}, {"alpha", alpha}, {"seed", seed}};
}
json periodic_random(int d, int p, std::uint64_t seed) {
  return {{"dimension", d}, {"kind", "random"}, {"alpha", 0.05}, {"seed", seed},
          {"params", {{"period", std::vector<int>(static_cast<std::size_t>(d), p)}}}};
}

// Shared d=2 adjoint solutions on a 129^2 window.
std::map<std::uint64_t, std::pair<std::unique_ptr<Environment>, std::unique_ptr<AdjointSolution>>> g_d2;
std::pair<const Environment*, const AdjointSolution*> d2_with_M(std::uint64_t seed) {
  auto& slot = g_d2[seed];
  if (!slot.first) {
    slot.first = std::make_unique<Environment>(make_env(random_env(2, seed)));
    AdjointOptions o;
    o.window = 64;
    slot.second = std::make_unique<AdjointSolution>(build_M(*slot.first, o));
  }
  return {slot.first.get(), slot.second.get()};
}

void require_verdicts(Outcome& out, const EstimateReport& r, const std::string& tag) {
  for (const auto& [k, v] : r.verdicts.items())
    out.require(v.get<bool>(), tag + "." + k);
}

// ---------------------------------------------------------------------------

Outcome kernel_exactness() {
  Outcome out;
  {
    const Environment env = make_env(lazy1());
    KernelEvolution ev(env, Point{}, 64);
    double a = 1.0, worst = 0.0;  // C(2n,n)/4^n
    for (long n = 1; n <= 64; ++n) {
      ev.advance();
      a *= static_cast<double>(2 * n - 1) / static_cast<double>(2 * n);
      worst = std::max(worst, std::abs(ev.at(Point{}) - a));
    }
    out.require(worst <= 1e-12, "binomial match");
    out.note("binomial err " + fmt("%.1e", worst));
  }
  struct Case {
    json spec;
    long n;
  };
  // d=3 at n=1000 needs a (2001)^3 box; the largest row that fits memory is used.
  const std::vector<Case> cases = {{random_env(1, 11), 1000}, {random_env(2, 12), 1000}, {random_env(3, 13), 128}};
  for (const auto& c : cases) {
    const Environment env = make_env(c.spec);
    KernelEvolution ev(env, Point{}, c.n);
    double worst = 0.0;
    for (long n = 1; n <= c.n; ++n) {
      ev.advance();
      if (n % 25 == 0 || n < 10 || n == c.n) worst = std::max(worst, std::abs(ev.snapshot().total() - 1.0));
    }
    out.require(worst <= 1e-12, "mass d=" + std::to_string(env.dim()));
    out.note("d=" + std::to_string(env.dim()) + " n<=" + std::to_string(c.n) + " mass err " + fmt("%.1e", worst));
  }
  return out;
}

// Substochastic matrix of the walk killed outside `ball`, built from pi alone.
struct DenseChain {
  std::vector<Point> pts;
  Eigen::MatrixXd P;
  std::map<Point, int> index;
};

DenseChain dense_chain(const Environment& env, const Ball& ball) {
  DenseChain c;
  for_each_point(ball.bounding_box(), [&](const Point& p) {
    if (ball.contains(p)) {
      c.index[p] = static_cast<int>(c.pts.size());
      c.pts.push_back(p);
    }
  });
  const int n = static_cast<int>(c.pts.size());
  c.P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (std::size_t e = 0; e < env.gamma().size(); ++e) {
      auto it = c.index.find(c.pts[static_cast<std::size_t>(i)] + env.gamma()[e]);
      if (it != c.index.end()) c.P(i, it->second) += env.pi(c.pts[static_cast<std::size_t>(i)], e);
    }
  return c;
}

Outcome killed_oracle() {
  Outcome out;
  struct Case {
    json spec;
    double r;
  };
  const std::vector<Case> cases = {{lazy1(), 16.5},
                                   {random_env(1, 21), 16.5},
                                   {periodic_random(2, 3, 22), 3.0},
                                   {random_env(2, 23), 3.0},
                                   {random_env(3, 24), 2.0}};
  double worst = 0.0;
  std::size_t largest = 0;
  for (const auto& c : cases) {
    const Environment env = make_env(c.spec);
    const Ball ball{env.dim(), Point{}, c.r};
    const DenseChain dc = dense_chain(env, ball);
    largest = std::max(largest, dc.pts.size());
    out.require(dc.pts.size() <= 33, "ball size");
    const ClosureChain chain(env, Domain::ball(ball));
    for (const Point& x : {dc.pts.front(), Point{}}) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dc.pts.size()));
      row[dc.index.at(x)] = 1.0;
      MassField mu = killed_kernel(chain, x, 0);
      for (long t = 1; t <= 100; ++t) {
        row = row * dc.P;
        mu = killed_step(chain, mu);
        for (std::size_t i = 0; i < dc.pts.size(); ++i)
          worst = std::max(worst, std::abs(mu.mass.value_or(dc.pts[i], 0.0) - row[static_cast<Eigen::Index>(i)]));
      }
      const MassField direct = killed_kernel(env, ball, x, 100);
      for (std::size_t i = 0; i < dc.pts.size(); ++i)
        worst = std::max(worst, std::abs(direct.mass.value_or(dc.pts[i], 0.0) - row[static_cast<Eigen::Index>(i)]));
    }
  }
  out.require(worst <= 1e-12, "matrix powers");
  out.note("largest ball " + std::to_string(largest) + " points, max err " + fmt("%.1e", worst));
  return out;
}

Outcome green_oracle() {
  Outcome out;
  double worst = 0.0, worst_sum = 0.0;
  for (const json& spec : {lazy1(), random_env(1, 31), periodic_random(1, 3, 32)}) {
    const Environment env = make_env(spec);
    for (double r : {4.5, 16.5, 32.5}) {
      const Ball ball{1, Point{}, r};
      const DenseChain dc = dense_chain(env, ball);
      const auto n = static_cast<Eigen::Index>(dc.pts.size());
      // Extended precision keeps the oracle itself well below the tolerance.
      using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
      const MatL A = MatL::Identity(n, n) - dc.P.cast<long double>();
      const Eigen::PartialPivLU<MatL> lu(A);
      const Eigen::MatrixXd G = lu.inverse().cast<double>();
      const Eigen::VectorXd exit_time = lu.solve(MatL::Ones(n, 1)).col(0).cast<double>();
      for (const Point& x : {Point{}, dc.pts.front(), dc.pts[dc.pts.size() / 3]}) {
        const auto i = dc.index.at(x);
        for (GreenMethod m : {GreenMethod::Direct, GreenMethod::Series}) {
          GreenOptions o;
          o.method = m;
          const GreenRow row = green_row(env, ball, x, o);
          for (Eigen::Index j = 0; j < n; ++j)
            worst = std::max(worst, std::abs(row.at(dc.pts[static_cast<std::size_t>(j)]) - G(i, j)));
          worst_sum = std::max(worst_sum, std::abs(row.row_sum - exit_time[i]));
        }
      }
    }
  }
  out.require(worst <= 1e-10, "dense solve");
  out.require(worst_sum <= 1e-10, "exit-time row sum");
  out.note("row err " + fmt("%.1e", worst) + ", sum err " + fmt("%.1e", worst_sum));
  return out;
}

// Stationary law of the walk projected to the torus (Z/p)^d, scaled to 1 at 0.
std::vector<double> torus_stationary(const Environment& env, int p, Box& cell) {
  const int d = env.dim();
  Point hi;
  for (int i = 0; i < d; ++i) hi[i] = p - 1;
  cell = Box(d, Point{}, hi);
  const auto n = static_cast<Eigen::Index>(cell.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for_each_point(cell, [&](const Point& x) {
    for (std::size_t e = 0; e < env.gamma().size(); ++e) {
      Point y = x + env.gamma()[e];
      for (int i = 0; i < d; ++i) y[i] = ((y[i] % p) + p) % p;
      A(static_cast<Eigen::Index>(cell.index(y)), static_cast<Eigen::Index>(cell.index(x))) += env.pi(x, e);
    }
  });
  A -= Eigen::MatrixXd::Identity(n, n);
  A.row(0).setZero();
  A(0, 0) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[0] = 1.0;
  const Eigen::VectorXd m = A.fullPivLu().solve(b);
  return {m.data(), m.data() + n};
}

Outcome adjoint_construction() {
  Outcome out;
  double res_max = 0.0;
  {
    const Environment env = make_env({{"dimension", 1}, {"kind", "constant"}, {"alpha", 0.3}});
    AdjointOptions o;
    o.window = 16;
    const AdjointSolution M = build_M(env, o);
    double dev = 0.0;
    for (double v : M.values.values) dev = std::max(dev, std::abs(v - 1.0));
    const Environment lazy = make_env(lazy1());
    const AdjointSolution Ml = build_M(lazy, o);
    for (double v : Ml.values.values) dev = std::max(dev, std::abs(v - 1.0));
    out.require(M.values.values.size() == 33 && dev <= 1e-8, "(a) constant");
    out.note("(a) " + fmt("%.1e", dev));
    res_max = std::max({res_max, M.residual, Ml.residual});
  }
  double worst_b = 0.0, worst_d = 0.0;
  for (int d : {1, 2})
    for (int p : {2, 3}) {
      const Environment env = make_env(periodic_random(d, p, 40 + static_cast<std::uint64_t>(10 * d + p)));
      Box cell;
      const auto oracle = torus_stationary(env, p, cell);
      AdjointOptions o;
      o.window = d == 1 ? 16 : 1;
      o.extrapolate = d > 1;
      const AdjointSolution M = build_M(env, o);
      res_max = std::max(res_max, M.residual);
      for_each_point(M.window, [&](const Point& x) {
        Point q;
        for (int i = 0; i < d; ++i) q[i] = ((x[i] % p) + p) % p;
        const double want = oracle[cell.index(q)] / oracle[0];
        worst_b = std::max(worst_b, std::abs(M.at(x) / want - 1.0));
      });
      // Same construction around a different centre.
      AdjointOptions oc = o;
      oc.center = d == 1 ? make_point({5}) : make_point({2, 1});
      const AdjointSolution Mc = build_M(env, oc);
      res_max = std::max(res_max, Mc.residual);
      const Box common = M.window.intersect(Mc.window);
      const double scale = Mc.at(Point{});
      for_each_point(common, [&](const Point& x) {
        worst_d = std::max(worst_d, std::abs(Mc.at(x) / scale / M.at(x) - 1.0));
      });
    }
  out.require(worst_b <= 1e-6, "(b) torus");
  out.require(res_max <= 1e-8, "(c) residual");
  out.require(worst_d <= 1e-5, "(d) off-center");
  out.note("(b) " + fmt("%.1e", worst_b) + " (c) " + fmt("%.1e", res_max) + " (d) " + fmt("%.1e", worst_d));
  return out;
}

Outcome doubling() {
  Outcome out;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto [env, M] = d2_with_M(seed);
    const EstimateReport r = verify_doubling(*env, *M, json{{"r", {8, 16, 32}}});
    require_verdicts(out, r, "seed" + std::to_string(seed));
    out.note("seed " + std::to_string(seed) + " V " + fmt("%.2f", r.constants["volume"].get<double>()) + " adj " +
             fmt("%.2f", r.constants["adjoint"].get<double>()) + " G " +
             fmt("%.2f", r.constants["green"].get<double>()) + " heat " +
             fmt("%.3f", r.constants["heat"].get<double>()));
  }
  return out;
}

Outcome gaussian() {
  Outcome out;
  {
    const Environment env = make_env(lazy1());
    const double v = kernel_row(env, Point{}, 1024).mass.value_or(Point{}, 0.0) * 32.0;
    const double rel = std::abs(v * std::sqrt(std::numbers::pi) - 1.0);
    out.require(rel <= 0.03, "lazy local limit");
    out.note("p*sqrt(n) " + fmt("%.5f", v) + " rel " + fmt("%.4f", rel));
  }
  auto [env, M] = d2_with_M(1);
  const EstimateReport r = verify_gaussian(*env, *M, json{{"n_fit", {64, 256}}});
  require_verdicts(out, r, "random");
  out.note("diag spread " + fmt("%.3f", r.constants["diag_spread"].get<double>()));
  return out;
}

Outcome mass_escape() {
  Outcome out;
  for (const json& spec : {lazy1(), random_env(2, 1)}) {
    const Environment env = make_env(spec);
    const EstimateReport r = verify_mass_escape(env, json::object());
    require_verdicts(out, r, "d" + std::to_string(env.dim()));
    out.note("d=" + std::to_string(env.dim()) + " c " + fmt("%.3f", r.constants["c"].get<double>()) + " R2 " +
             fmt("%.3f", r.constants["fit"]["r2"].get<double>()));
  }
  return out;
}

Outcome harnack_suite() {
  Outcome out;
  auto [env, M] = d2_with_M(1);
  for (const char* name : {"harnack-parabolic", "harnack-adjoint", "harnack-backward"}) {
    const EstimateReport r = run_estimate(name, *env, M, json::object());
    require_verdicts(out, r, name);
    out.note(std::string(name).substr(8) + " C " + fmt("%.1f", r.constants.value("C", NAN)));
  }
  const Environment lazy = make_env(lazy1());
  const EstimateReport rb = verify_harnack_boundary(lazy, json::object());
  require_verdicts(out, rb, "harnack-boundary");
  out.note("boundary C " + fmt("%.2f", rb.constants.value("C", NAN)));
  return out;
}

Outcome boundary_suite() {
  Outcome out;
  const Environment env = make_env(lazy1());
  double worst = 0.0;
  for (double R : {4.5, 8.5, 16.5}) {
    const Cylinder cyl{Domain::ball(Ball{1, Point{}, R}), 0, 40};
    for (const Point& x : {Point{}, make_point({static_cast<Coord>(R) - 1})})
      for (long t : {1L, 17L, 40L}) worst = std::max(worst, std::abs(caloric_measure(env, cyl, {x, t}).total() - 1.0));
  }
  {
    const Environment env2 = make_env(random_env(2, 5));
    const Cylinder cyl{Domain::ball(Ball{2, Point{}, 6.5}), -3, 30};
    worst = std::max(worst, std::abs(caloric_measure(env2, cyl, {make_point({1, -2}), 30}).total() - 1.0));
  }
  out.require(worst <= 1e-12, "caloric measure total");
  out.note("measure err " + fmt("%.1e", worst));
  const EstimateReport mp = verify_maximum_principle(env, json{{"count", 100}});
  require_verdicts(out, mp, "maximum-principle");
  const EstimateReport cl = verify_caloric_lower(env, json::object());
  require_verdicts(out, cl, "caloric-lower");
  out.note("theta " + fmt("%.3g", cl.constants.value("theta", NAN)));
  const EstimateReport dc = verify_decay(env, json::object());
  require_verdicts(out, dc, "decay");
  out.note("rho " + fmt("%.3g", dc.constants.value("rho", NAN)));
  const EstimateReport es = verify_exit_split(env, json::object());
  require_verdicts(out, es, "exit-split");
  out.note("K " + es.constants.dump());
  return out;
}

Outcome monte_carlo() {
  Outcome out;
  const Environment env = make_env(lazy1());
  const EmpiricalKernel ek = sample_paths(env, Point{}, 32, 1'000'000, 2024, {4});
  const double tv = ek.tv_distance(kernel_row(env, Point{}, 32));
  out.require(tv <= 0.005, "TV");
  out.note("TV " + fmt("%.5f", tv));
  const ClosureChain chain(env, Domain::ball(Ball{1, Point{}, 3.5}));
  const SpaceTimePoint x0{Point{}, 50};
  const CaloricMeasure exact = caloric_measure(chain, 0, 50, x0);
  const EmpiricalExit emp = sample_exit(chain, 0, 50, x0, 1'000'000, 7, {4});
  const ExitComparison cmp = compare_exit(emp, exact);
  out.require(cmp.beyond_3sigma == 0 && cmp.off_support == 0, "exit 3 sigma");
  out.note("exit atoms " + std::to_string(cmp.atoms) + " max |z| " + fmt("%.2f", cmp.max_abs_z));
  return out;
}

Outcome determinism() {
  Outcome out;
  const Environment lazy = make_env(lazy1());
  const Environment rnd = make_env(random_env(2, 9));
  struct Job {
    const Environment* env;
    std::string estimate;
    json grid;
  };
  const std::vector<Job> jobs = {{&lazy, "mass-escape", json::object()},
                                 {&rnd, "harnack-parabolic", json{{"r", {4, 8}}}},
                                 {&lazy, "carleson", json::object()},
                                 {&lazy, "maximum-principle", json{{"count", 20}}},
                                 {&rnd, "doubling", json{{"r", {4, 8}}}}};
  AdjointOptions o;
  o.window = 16;
  const AdjointSolution M1 = build_M(rnd, o), M2 = build_M(rnd, o);
  out.require(field_to_binary(M1.values, 2) == field_to_binary(M2.values, 2) &&
                  dump_json(M1.metadata()) == dump_json(M2.metadata()),
              "adjoint rebuild");
  for (const auto& j : jobs) {
    const AdjointSolution* M = estimate_needs_adjoint(j.estimate) ? &M1 : nullptr;
    const std::string a = dump_json(run_estimate(j.estimate, *j.env, M, j.grid).to_json());
    const std::string b = dump_json(run_estimate(j.estimate, *j.env, M, j.grid).to_json());
    out.require(a == b, j.estimate);
  }
  const auto k1 = sample_paths(rnd, Point{}, 20, 20000, 3, {1});
  const auto k4 = sample_paths(rnd, Point{}, 20, 20000, 3, {4});
  out.require(k1.counts == k4.counts, "mc worker split");
  out.note(std::to_string(jobs.size()) + " reports, adjoint and MC histograms identical on rerun");
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {{1, "kernel exactness", kernel_exactness},
                                      {2, "killed-kernel oracle", killed_oracle},
                                      {3, "Green oracle", green_oracle},
                                      {4, "adjoint construction", adjoint_construction},
                                      {5, "doubling", doubling},
                                      {6, "Gaussian envelope", gaussian},
                                      {7, "mass escape", mass_escape},
                                      {8, "Harnack suite", harnack_suite},
                                      {9, "boundary suite", boundary_suite},
                                      {10, "Monte Carlo cross-check", monte_carlo},
                                      {11, "determinism", determinism}};
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-24s %s  [%.1fs] %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", dt, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
