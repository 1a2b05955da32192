#include <doctest.h>

#include "kernel.hpp"
#include "support.hpp"

using namespace heatlab;
using namespace heatlab::testing;

TEST_CASE("lazy walk two-step values") {
  const Environment env = make_env(lazy1());
  const MassField p2 = kernel_row(env, Point{}, 2);
  CHECK(p2.mass.value_or(make_point({0}), -1) == doctest::Approx(3.0 / 8).epsilon(1e-15));
  CHECK(p2.mass.value_or(make_point({1}), -1) == doctest::Approx(1.0 / 4).epsilon(1e-15));
  CHECK(p2.mass.value_or(make_point({-2}), -1) == doctest::Approx(1.0 / 16).epsilon(1e-15));
  CHECK(p2.mass.value_or(make_point({3}), 0) == 0.0);
}

TEST_CASE("lazy walk diagonal matches C(2n,n)/4^n") {
  const Environment env = make_env(lazy1());
  KernelEvolution ev(env, Point{}, 64);
  double a = 1.0;
  for (long n = 1; n <= 64; ++n) {
    ev.advance();
    a *= static_cast<double>(2 * n - 1) / static_cast<double>(2 * n);
    CHECK(std::abs(ev.at(Point{}) - a) <= 1e-12);
  }
}

TEST_CASE("kernel matches powers of a dense matrix") {
  for (int d = 1; d <= 3; ++d) {
    const Environment env = make_env(random_env(d, 100 + static_cast<std::uint64_t>(d)));
    const long n = d == 3 ? 4 : 8;
    // no mass can leave a box of half-width n + 1 in n steps
    std::vector<Point> pts;
    for_each_point(Box::around(d, Point{}, n + 1), [&](const Point& p) { pts.push_back(p); });
    const DenseChain dc(env, pts);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(pts.size()));
    const Point x = unit_vector(0);
    row[dc.index.at(x)] = 1.0;
    for (long k = 0; k < n; ++k) row = row * dc.P;
    const MassField pn = kernel_row(env, x, n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      CHECK(std::abs(pn.mass.value_or(pts[i], 0.0) - row[static_cast<Eigen::Index>(i)]) <= 1e-15);
    CHECK(std::abs(pn.total() - 1.0) <= 1e-13);
  }
}

TEST_CASE("duality: sum_y p_n(x,y) f(y) equals the caloric evolution of f") {
  // (P^n f)(x) by brute-force backward iteration on a 9-point box.
  const Environment env = make_env(random_env(1, 7));
  const long n = 3;
  const Box box = Box::around(1, Point{}, 4);
  std::vector<double> f(box.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(1.0 + static_cast<double>(i));
  auto f_at = [&](const Point& p) { return box.contains(p) ? f[box.index(p)] : 0.0; };
  std::function<double(const Point&, long)> back = [&](const Point& x, long k) -> double {
    if (k == 0) return f_at(x);
    double s = 0.0;
    for (std::size_t e = 0; e < env.gamma().size(); ++e) s += env.pi(x, e) * back(x + env.gamma()[e], k - 1);
    return s;
  };
  for (Coord x0 = -1; x0 <= 1; ++x0) {
    const MassField pn = kernel_row(env, make_point({x0}), n);
    double fwd = 0.0;
    for_each_point(pn.mass.box, [&](const Point& y) { fwd += pn.mass.at(y) * f_at(y); });
    CHECK(std::abs(fwd - back(make_point({x0}), n)) <= 1e-15);
  }
}

TEST_CASE("generator on simple functions") {
  const Environment env = make_env(lazy1());
  LatticeFunction f(Box::around(1, Point{}, 6));
  for_each_point(f.box, [&](const Point& p) { f.at(p) = static_cast<double>(p[0] * p[0]); });
  const LatticeFunction Lf = apply_L(env, f);
  for_each_point(Lf.box, [&](const Point& p) { CHECK(Lf.at(p) == doctest::Approx(0.5)); });

  // L 1 = 0 and L* 1 = 0 for a symmetric rule in any dimension.
  const Environment r2 = make_env(random_env(2, 4));
  LatticeFunction one(Box::around(2, Point{}, 5), 1.0);
  for (double v : apply_L(r2, one).values) CHECK(std::abs(v) <= 1e-15);
  // L* of a point mass is (pi(x-e,e)) - delta.
  LatticeFunction delta(Box::around(2, Point{}, 3), 0.0);
  delta.at(Point{}) = 1.0;
  const LatticeFunction Ls = apply_L_star(r2, delta, Box::around(2, Point{}, 2));
  CHECK(Ls.at(Point{}) == doctest::Approx(r2.pi(Point{}, Point{}) - 1.0));
  CHECK(Ls.at(make_point({1, 0})) == doctest::Approx(r2.pi(Point{}, make_point({1, 0}))));
  CHECK(Ls.at(make_point({1, 1})) == 0.0);
}

TEST_CASE("support and mass conservation") {
  const Environment env = make_env(random_env(2, 8));
  KernelEvolution ev(env, Point{}, 200);
  for (long n = 1; n <= 200; ++n) {
    ev.advance();
    if (n % 50 == 0) {
      CHECK(std::abs(ev.snapshot().total() - 1.0) <= 1e-12);
      CHECK(ev.active().hi()[0] == n);
    }
  }
  CHECK(ev.at(make_point({201, 0})) == 0.0);
  CHECK(ev.at(make_point({150, 50})) > 0.0);
  CHECK(ev.at(make_point({150, 51})) == 0.0);
}

TEST_CASE("memory budget is enforced") {
  const Environment env = make_env(random_env(3, 1));
  CHECK(KernelEvolution::bytes_needed(env, 1000) > kDefaultMemoryBudget);
  try {
    kernel_row(env, Point{}, 1000);
    FAIL("expected ResourceLimit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ResourceLimit);
  }
  KernelOptions tiny;
  tiny.memory_budget = 1 << 16;
  CHECK_THROWS_AS(kernel_row(make_env(lazy1()), Point{}, 5000, tiny), Error);
}

TEST_CASE("killed kernel matches dense substochastic powers") {
  for (const json& spec : {lazy1(), random_env(2, 3), random_env(3, 3)}) {
    const Environment env = make_env(spec);
    const double r = env.dim() == 1 ? 16.5 : (env.dim() == 2 ? 3.0 : 2.0);
    const Ball ball{env.dim(), Point{}, r};
    const auto pts = ball_points(ball);
    REQUIRE(pts.size() <= 33);
    const DenseChain dc(env, pts);
    const ClosureChain chain(env, Domain::ball(ball));
    CHECK(chain.interior_size() == pts.size());
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(pts.size()));
    const Point x = pts.back();
    row[dc.index.at(x)] = 1.0;
    MassField mu = killed_kernel(chain, x, 0);
    double killed = 0.0;
    for (long t = 1; t <= 100; ++t) {
      row = row * dc.P;
      mu = killed_step(chain, mu);
      for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(std::abs(mu.mass.value_or(pts[i], 0.0) - row[static_cast<Eigen::Index>(i)]) <= 1e-12);
      killed = mu.escaped;
    }
    CHECK(std::abs(killed + mu.total() - 1.0) <= 1e-12);
  }
}

TEST_CASE("closure ordering") {
  const Environment env = make_env(lazy1());
  const ClosureChain chain(env, Domain::ball(Ball{1, Point{}, 2.5}));
  CHECK(chain.interior_size() == 5);
  CHECK(chain.boundary_size() == 2);
  CHECK(chain.point(0) == make_point({-2}));
  CHECK(chain.point(5) == make_point({-3}));
  CHECK(chain.point(6) == make_point({3}));
  CHECK(chain.index_of(make_point({4})) == ClosureChain::npos);
  CHECK(chain.is_interior(chain.index_of(make_point({1}))));
  CHECK_FALSE(chain.is_interior(chain.index_of(make_point({3}))));
}
