#pragma once
// Shared fixtures for the unit tests.
#include <Eigen/Dense>

#include <map>
#include <vector>

#include "environment.hpp"

namespace heatlab::testing {

using nlohmann::json;

inline Environment make_env(const json& j) { return generate(EnvironmentSpec::from_json(j)); }

inline json lazy1() {
  return {{"dimension", 1}, {"kind", "constant"}, {"alpha", 0.25}, {"params", {{"lazy", true}}}};
}
inline json random_env(int d, std::uint64_t seed, double alpha = 0.05) {
  return {{"dimension", d}, {"kind", "random"}, {"alpha", alpha}, {"seed", seed}};
}
inline json periodic_random(int d, int p, std::uint64_t seed) {
  return {{"dimension", d}, {"kind", "random"}, {"alpha", 0.05}, {"seed", seed},
          {"params", {{"period", std::vector<int>(static_cast<std::size_t>(d), p)}}}};
}

// Walk killed outside a finite set, as a dense substochastic matrix.
struct DenseChain {
  std::vector<Point> pts;
  std::map<Point, Eigen::Index> index;
  Eigen::MatrixXd P;

  DenseChain(const Environment& env, const std::vector<Point>& points) : pts(points) {
    for (std::size_t i = 0; i < pts.size(); ++i) index[pts[i]] = static_cast<Eigen::Index>(i);
    const auto n = static_cast<Eigen::Index>(pts.size());
    P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (std::size_t e = 0; e < env.gamma().size(); ++e) {
        auto it = index.find(pts[static_cast<std::size_t>(i)] + env.gamma()[e]);
        if (it != index.end()) P(i, it->second) += env.pi(pts[static_cast<std::size_t>(i)], e);
      }
  }
};

inline std::vector<Point> ball_points(const Ball& b) {
  std::vector<Point> pts;
  for_each_point(b.bounding_box(), [&](const Point& p) {
    if (b.contains(p)) pts.push_back(p);
  });
  return pts;
}

}  // namespace heatlab::testing
