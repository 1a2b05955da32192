#include <doctest.h>

#include "support.hpp"

using namespace heatlab;
using namespace heatlab::testing;

TEST_CASE("nearest-neighbour increments") {
  for (int d = 1; d <= 3; ++d) {
    const auto g = IncrementSet::nearest_neighbour(d);
    CHECK(g.size() == static_cast<std::size_t>(2 * d + 1));
    CHECK(g.index_of(Point{}).has_value());
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[g.opposite(i)] == -g[i]);
    CHECK(g.diameter() == doctest::Approx(1.0));
    CHECK(g.reach() == 1);
  }
}

TEST_CASE("malformed increment sets are rejected") {
  auto code = [](std::vector<Point> inc) {
    try {
      IncrementSet(2, std::move(inc));
    } catch (const Error& e) {
      return static_cast<int>(e.code());
    }
    return 0;
  };
  const int cfg = static_cast<int>(ErrorCode::InvalidConfig);
  // asymmetric
  CHECK(code({{}, make_point({1, 0}), make_point({-1, 0}), make_point({0, 1}), make_point({0, -1}), make_point({1, 1})}) == cfg);
  // no zero
  CHECK(code({make_point({1, 0}), make_point({-1, 0}), make_point({0, 1}), make_point({0, -1})}) == cfg);
  // missing a unit vector
  CHECK(code({{}, make_point({1, 0}), make_point({-1, 0})}) == cfg);
  // duplicate
  CHECK(code({{}, {}, make_point({1, 0}), make_point({-1, 0}), make_point({0, 1}), make_point({0, -1})}) == cfg);
  CHECK(code({{}, make_point({1, 0}), make_point({-1, 0}), make_point({0, 1}), make_point({0, -1}), make_point({1, 1}),
              make_point({-1, -1})}) == 0);
}

TEST_CASE("lazy constant rule") {
  const Environment env = make_env(lazy1());
  CHECK(env.translation_invariant());
  CHECK(env.pi(make_point({7}), Point{}) == 0.5);
  CHECK(env.pi(make_point({-3}), make_point({1})) == 0.25);
  CHECK(env.pi(make_point({-3}), make_point({-1})) == 0.25);
  CHECK_THROWS_AS(env.pi(Point{}, make_point({2})), Error);
}

TEST_CASE("random elliptic rule obeys the constraints everywhere") {
  for (int d = 1; d <= 3; ++d) {
    const Environment env = make_env(random_env(d, 5));
    std::vector<double> row(env.gamma().size());
    for_each_point(Box::around(d, Point{}, d == 3 ? 4 : 10), [&](const Point& x) {
      env.probabilities(x, row);
      double s = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        s += row[i];
        CHECK(row[i] >= 0.05);
        CHECK(row[i] == row[env.gamma().opposite(i)]);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    });
    // pure function of (seed, x)
    const Environment again = make_env(random_env(d, 5));
    const Point x = make_point({3, -2, 1});
    Point xd;
    for (int i = 0; i < d; ++i) xd[i] = x[i];
    CHECK(env.pi(xd, 1) == again.pi(xd, 1));
    CHECK(env.hash() == again.hash());
    CHECK(env.hash() != make_env(random_env(d, 6)).hash());
  }
}

TEST_CASE("periodic random rule repeats with its period") {
  const Environment env = make_env(periodic_random(2, 3, 9));
  for (std::size_t e = 0; e < env.gamma().size(); ++e) {
    CHECK(env.pi(make_point({1, 2}), e) == env.pi(make_point({4, -1}), e));
    CHECK(env.pi(make_point({0, 0}), e) == env.pi(make_point({-3, 6}), e));
  }
}

TEST_CASE("validation reports violations as data") {
  auto spec = EnvironmentSpec::from_json(
      {{"dimension", 1}, {"alpha", 0.1}, {"kind", "periodic"}, {"params", {{"period", {2}}, {"table", {{0.5, 0.2, 0.3}, {0.5, 0.25, 0.25}}}}}});
  const Environment env = Environment::from_spec(spec);
  // rows list pi(x, 0), pi(x, +1), pi(x, -1)
  const auto v = validate(env);
  REQUIRE(v.size() == 1);
  CHECK(v[0].site == Point{});
  CHECK(v[0].condition.find("symmetry") == 0);
  CHECK_THROWS_AS(generate(spec), Error);

  spec.params["table"] = json{{0.3, 0.3, 0.3}, {0.5, 0.25, 0.25}};
  const auto v2 = validate(Environment::from_spec(spec));
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].condition.find("normalization") == 0);

  spec.params["table"] = json{{0.9, 0.05, 0.05}, {0.5, 0.25, 0.25}};
  const auto v3 = validate(Environment::from_spec(spec));
  CHECK(v3.size() == 2);  // both sides under the floor
  CHECK(v3[0].condition.find("ellipticity") == 0);
}

TEST_CASE("infeasible ellipticity floor") {
  CHECK_THROWS_AS(make_env(random_env(2, 1, 0.25)), Error);
  CHECK_NOTHROW(make_env(random_env(2, 1, 0.2)));
}

TEST_CASE("tabulation reproduces the rule") {
  const Environment env = make_env(random_env(2, 3));
  const Box box = Box::around(2, make_point({1, 1}), 3);
  const Environment per = Environment::from_spec(tabulate(env, box, Extension::Periodic));
  const Environment con = Environment::from_spec(tabulate(env, box, Extension::ConstantOutside));
  CHECK(validate(per).empty());
  CHECK(validate(con).empty());
  for_each_point(box, [&](const Point& x) {
    for (std::size_t e = 0; e < env.gamma().size(); ++e) {
      CHECK(per.pi(x, e) == env.pi(x, e));
      CHECK(con.pi(x, e) == env.pi(x, e));
    }
  });
  // periodic extension wraps by the box extent
  CHECK(per.pi(make_point({5, 0}), 2) == env.pi(make_point({-2, 0}), 2));
  // constant extension uses the row just outside the box
  CHECK(con.pi(make_point({40, -40}), 1) == env.pi(box.hi() + unit_vector(0), 1));
  // round trip through JSON
  const auto back = EnvironmentSpec::from_json(per.spec().to_json());
  CHECK(back.hash() == per.hash());
}

TEST_CASE("spec parsing errors are configuration errors") {
  auto code_of = [](const json& j) {
    try {
      make_env(j);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Numeric;
  };
  CHECK(code_of({{"dimension", 4}}) == ErrorCode::InvalidConfig);
  CHECK(code_of({{"dimension", 1}, {"kind", "fractal"}}) == ErrorCode::InvalidConfig);
  CHECK(code_of({{"dimension", 1}, {"kind", "periodic"}, {"params", {{"period", {2}}}}}) == ErrorCode::InvalidConfig);
  CHECK(code_of({{"dimension", 1}, {"kind", "constant"}, {"params", {{"probs", {0.5, 0.5}}}}}) == ErrorCode::InvalidConfig);
}
