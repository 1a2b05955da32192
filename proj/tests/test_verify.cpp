#include <doctest.h>

#include "io.hpp"
#include "support.hpp"
#include "verify.hpp"

using namespace heatlab;
using namespace heatlab::testing;

namespace {

const AdjointSolution& lazy_M() {
  static const Environment env = make_env(lazy1());
  static const AdjointSolution M = [] {
    AdjointOptions o;
    o.window = 64;
    return build_M(env, o);
  }();
  return M;
}

}  // namespace

TEST_CASE("every estimate runs and passes on the lazy walk") {
  const Environment env = make_env(lazy1());
  const std::map<std::string, json> grids = {
      {"mass-escape", {{"n", {16, 32}}}},
      {"gaussian", {{"n_fit", {16, 64}}, {"n_diag", {16, 32, 64, 128}}, {"A_from", 16}}},
      {"doubling", {{"r", {4, 8}}}},
      {"volume-doubling", {{"r", {4, 8}}}},
      {"harnack-parabolic", {{"r", {4, 8}}, {"random", 5}}},
      {"harnack-adjoint", {{"r", {4, 8}}, {"random", 5}}},
      {"harnack-backward", {{"r", {8, 16}}, {"random", 5}}},
      {"harnack-boundary", {{"random", 3}}},
      {"carleson", {{"r", {2, 4}}, {"random", 5}}},
      {"caloric-lower", {{"r", {2, 4}}}},
      {"decay", {{"r", {2, 4}}, {"random", 5}}},
      {"exit-split", json::object()},
      {"comparability", {{"r", {4}}}},
      {"shift-monotone", {{"r", {4, 8}}}},
      {"maximum-principle", {{"count", 10}}},
  };
  for (const auto& name : estimate_names()) {
    CAPTURE(name);
    REQUIRE(grids.count(name) == 1);
    const AdjointSolution* M = estimate_needs_adjoint(name) ? &lazy_M() : nullptr;
    const EstimateReport r = run_estimate(name, env, M, grids.at(name));
    CHECK(r.estimate == name);
    CHECK(r.env_hash == env.hash());
    CHECK_FALSE(r.verdicts.empty());
    CHECK(r.passed());
    if (!r.passed()) MESSAGE(r.verdicts.dump());
    // the completed grid regenerates the same report
    const EstimateReport again = run_estimate(name, env, M, r.grid);
    CHECK(dump_json(again.to_json()) == dump_json(r.to_json()));
  }
}

TEST_CASE("dispatch errors") {
  const Environment env = make_env(lazy1());
  CHECK_THROWS_AS(run_estimate("no-such-estimate", env, nullptr, json::object()), Error);
  try {
    run_estimate("gaussian", env, nullptr, json::object());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("mass escape fit on the lazy walk") {
  const Environment env = make_env(lazy1());
  const EstimateReport r = verify_mass_escape(env, json::object());
  CHECK(r.verdicts["zero_tail"].get<bool>());
  CHECK(r.constants["c"].get<double>() > 0.0);
  CHECK(r.constants["fit"]["r2"].get<double>() >= 0.95);
  CHECK(r.grid.contains("kappa"));
}

TEST_CASE("boundary geometry helpers") {
  const Environment env = make_env(random_env(2, 1));
  const Point y = boundary_point(env, 8.0, Point{}, unit_vector(0));
  CHECK(norm(y) >= 8.0);
  // some increment leads back inside the ball
  bool touches = false;
  for (const Point& e : env.gamma().increments()) touches = touches || norm(y + e) < 8.0;
  CHECK(touches);
  const Point in = inner_point(env, 8.0, Point{}, y, 4.0);
  CHECK(norm(in) < 8.0);
  CHECK(std::abs(norm(in) - 6.0) <= 1.0);
}

TEST_CASE("maximum principle on random problems") {
  const Environment env = make_env(random_env(2, 4));
  const EstimateReport r = verify_maximum_principle(env, json{{"count", 20}, {"R", 3.5}});
  CHECK(r.passed());
}
