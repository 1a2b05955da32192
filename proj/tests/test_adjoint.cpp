#include <doctest.h>

#include "adjoint.hpp"
#include "kernel.hpp"
#include "support.hpp"

using namespace heatlab;
using namespace heatlab::testing;

namespace {

// Stationary weights of the walk folded onto the torus (Z/p)^d, 1 at 0.
double torus_weight(const Environment& env, int p, const Point& x) {
  const int d = env.dim();
  Point hi;
  for (int i = 0; i < d; ++i) hi[i] = p - 1;
  const Box cell(d, Point{}, hi);
  const auto n = static_cast<Eigen::Index>(cell.size());
  auto fold = [&](Point y) {
    for (int i = 0; i < d; ++i) y[i] = ((y[i] % p) + p) % p;
    return static_cast<Eigen::Index>(cell.index(y));
  };
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for_each_point(cell, [&](const Point& z) {
    for (std::size_t e = 0; e < env.gamma().size(); ++e) A(fold(z + env.gamma()[e]), fold(z)) += env.pi(z, e);
  });
  A -= Eigen::MatrixXd::Identity(n, n);
  A.row(0).setZero();
  A(0, 0) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[0] = 1.0;
  return A.fullPivLu().solve(b)[fold(x)];
}

}  // namespace

TEST_CASE("translation-invariant rule gives M = 1") {
  AdjointOptions o;
  o.window = 16;
  for (const json& spec : {lazy1(), json{{"dimension", 1}, {"kind", "constant"}, {"alpha", 0.3}}}) {
    const AdjointSolution M = build_M(make_env(spec), o);
    CHECK(M.values.values.size() == 33);
    for (double v : M.values.values) CHECK(std::abs(v - 1.0) <= 1e-8);
    CHECK(M.converged);
  }
}

TEST_CASE("periodic d=1 rule matches the torus oracle") {
  for (int p : {2, 3, 5}) {
    const Environment env = make_env(periodic_random(1, p, 17));
    AdjointOptions o;
    o.window = 20;
    const AdjointSolution M = build_M(env, o);
    CHECK(M.converged);
    CHECK(M.residual <= 1e-8);
    for_each_point(M.window, [&](const Point& x) { CHECK(std::abs(M.at(x) / torus_weight(env, p, x) - 1.0) <= 1e-6); });
  }
}

TEST_CASE("periodic d=2 rule matches the torus oracle after extrapolation") {
  const Environment env = make_env(periodic_random(2, 2, 5));
  AdjointOptions o;
  o.window = 1;
  o.extrapolate = true;
  o.l_max = 6;
  const AdjointSolution M = build_M(env, o);
  CHECK(M.extrapolated);
  for_each_point(M.window, [&](const Point& x) { CHECK(std::abs(M.at(x) / torus_weight(env, 2, x) - 1.0) <= 1e-6); });
}

TEST_CASE("level solutions are exact adjoint solutions inside their ball") {
  const Environment env = make_env(random_env(2, 12));
  const LevelSolution ls = level_solution(env, 4, Point{});
  CHECK(ls.values.at(Point{}) == doctest::Approx(1.0));
  const Box inner = Box::around(2, Point{}, 10);
  LatticeFunction m(inner.enlarged(1));
  for_each_point(m.box, [&](const Point& p) { m.at(p) = ls.values.value_or(p, 0.0); });
  const LatticeFunction r = apply_L_star(env, m, inner);
  for_each_point(inner, [&](const Point& p) {
    if (ls.ball.contains(p)) CHECK(std::abs(r.at(p)) <= 1e-12);
  });
  for (double v : ls.values.values) CHECK(v >= 0.0);
}

TEST_CASE("M is unique up to scaling: off-centre construction agrees") {
  const Environment env = make_env(random_env(1, 21));
  AdjointOptions a, b;
  a.window = b.window = 12;
  b.center = make_point({4});
  const AdjointSolution Ma = build_M(env, a);
  const AdjointSolution Mb = build_M(env, b);
  const double s = Mb.at(Point{});
  for_each_point(Ma.window.intersect(Mb.window), [&](const Point& x) {
    CHECK(std::abs(Mb.at(x) / s / Ma.at(x) - 1.0) <= 1e-5);
  });
}

TEST_CASE("export and reload") {
  const Environment env = make_env(random_env(1, 2));
  AdjointOptions o;
  o.window = 8;
  const AdjointSolution M = build_M(env, o);
  const AdjointSolution back = adjoint_from_field(env, M.values, M.metadata());
  CHECK(back.values.values == M.values.values);
  CHECK(back.env_hash == M.env_hash);
  CHECK(back.level == M.level);
  CHECK_THROWS_AS(adjoint_from_field(make_env(random_env(1, 3)), M.values, M.metadata()), Error);
}

TEST_CASE("volume and doubling") {
  const Environment env = make_env(lazy1());
  AdjointOptions o;
  o.window = 16;
  const AdjointSolution M = build_M(env, o);
  // M = 1, so V(0, r) counts lattice points with |z| < r.
  CHECK(volume(M, Point{}, 4.0) == doctest::Approx(7.0));
  CHECK(volume(M, Point{}, 4.5) == doctest::Approx(9.0));
  CHECK_THROWS_AS(volume(M, Point{}, 40.0), Error);
  const EstimateReport r = doubling_report(M, {Point{}, make_point({2})}, {2.0, 4.0});
  CHECK(r.constants["C"].get<double>() == doctest::Approx(7.0 / 3.0));
}

TEST_CASE("normalized adjoint divides the kernel by M") {
  const Environment env = make_env(periodic_random(1, 3, 4));
  AdjointOptions o;
  o.window = 16;
  const AdjointSolution M = build_M(env, o);
  const NormalizedAdjoint v(env, M, Point{}, 6);
  const MassField p6 = kernel_row(env, Point{}, 6);
  for (Coord y = -6; y <= 6; ++y) {
    const Point py = make_point({y});
    CHECK(v(py, 6) == doctest::Approx(p6.mass.value_or(py, 0.0) / M.at(py)).epsilon(1e-14));
  }
}
