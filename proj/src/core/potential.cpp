#include "potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace heatlab {

// ---------------------------------------------------------------------------
// Green functions

struct GreenSolver::Factorization {
  Eigen::SparseMatrix<double> a;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

GreenSolver::GreenSolver(const Environment& env, const Ball& ball)
    : ball_(ball), chain_(env, Domain::ball(ball)), lu_(std::make_unique<Factorization>()) {
  const std::size_t n = chain_.interior_size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * (chain_.width() + 1));
  // (I - P)^T restricted to the interior.
  for (std::size_t i = 0; i < n; ++i) {
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    for (std::size_t e = 0; e < chain_.width(); ++e) {
      const auto t = chain_.target(i, e);
      if (chain_.is_interior(t)) trip.emplace_back(t, static_cast<int>(i), -chain_.prob(i, e));
    }
  }
  lu_->a.resize(static_cast<int>(n), static_cast<int>(n));
  lu_->a.setFromTriplets(trip.begin(), trip.end());
  lu_->a.makeCompressed();
  lu_->lu.analyzePattern(lu_->a);
  lu_->lu.factorize(lu_->a);
  if (lu_->lu.info() != Eigen::Success)
    fail(ErrorCode::Numeric, "sparse LU factorization of the killed Green operator failed: " + lu_->lu.lastErrorMessage());
}

GreenSolver::~GreenSolver() = default;

GreenRow GreenSolver::row(const Point& x) const {
  const auto idx = chain_.index_of(x);
  if (!chain_.is_interior(idx)) fail(ErrorCode::InvalidArgument, "Green pole lies outside the ball");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(chain_.interior_size()));
  b[idx] = 1.0;
  Eigen::VectorXd g = lu_->lu.solve(b);
  if (lu_->lu.info() != Eigen::Success) fail(ErrorCode::Numeric, "sparse LU solve failed");
  // Refinement with the residual of g - P^T g taken from the transition
  // probabilities in extended precision. The assembled diagonal 1 - pi(x,0)
  // is rounded, and exit times amplify that by roughly tau^2.
  const std::size_t n = chain_.interior_size();
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<long double> acc(n);
    for (std::size_t i = 0; i < n; ++i) acc[i] = g[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t e = 0; e < chain_.width(); ++e) {
        const auto t = chain_.target(i, e);
        if (chain_.is_interior(t))
          acc[static_cast<std::size_t>(t)] -= static_cast<long double>(chain_.prob(i, e)) * g[static_cast<Eigen::Index>(i)];
      }
    Eigen::VectorXd r(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) r[i] = static_cast<double>(b[i] - acc[static_cast<std::size_t>(i)]);
    g += lu_->lu.solve(r);
  }
  GreenRow out;
  out.ball = ball_;
  out.pole = x;
  out.method = GreenMethod::Direct;
  out.values = LatticeFunction(chain_.domain().box());
  CompensatedSum s;
  for (std::size_t i = 0; i < chain_.interior_size(); ++i) {
    const double v = g[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(v)) fail(ErrorCode::Numeric, "non-finite Green value");
    out.values.at(chain_.point(i)) = v;
    s.add(v);
  }
  out.row_sum = s.value();
  return out;
}

GreenRow green_row_series(const ClosureChain& chain, const Ball& ball, const Point& x, const GreenOptions& options) {
  const auto idx = chain.index_of(x);
  if (!chain.is_interior(idx)) fail(ErrorCode::InvalidArgument, "Green pole lies outside the ball");
  const std::size_t n = chain.interior_size();
  std::vector<double> cur(n, 0.0), nxt(n);
  cur[static_cast<std::size_t>(idx)] = 1.0;
  std::vector<CompensatedSum> sums(n);
  double alive = 1.0, prev = 1.0;
  long t = 0;
  while (true) {
    for (std::size_t i = 0; i < n; ++i)
      if (cur[i] != 0.0) sums[i].add(cur[i]);
    // Geometric estimate of the dropped tail sum_{s>t} alive_s.
    const double rate = t > 0 ? alive / prev : 0.0;
    if (alive == 0.0 || (t > 0 && rate < 1.0 && alive * rate / (1.0 - rate) <= options.series_tolerance)) break;
    prev = alive;
    if (++t > options.series_cap)
      fail(ErrorCode::NonConvergence, "Green series did not reach tolerance within " +
                                          std::to_string(options.series_cap) + " steps");
    chain.forward(cur, nxt);
    std::swap(cur, nxt);
    alive = compensated_total(cur);
  }
  GreenRow out;
  out.ball = ball;
  out.pole = x;
  out.method = GreenMethod::Series;
  out.values = LatticeFunction(chain.domain().box());
  CompensatedSum s;
  for (std::size_t i = 0; i < n; ++i) {
    out.values.at(chain.point(i)) = sums[i].value();
    s.add(sums[i].value());
  }
  out.row_sum = s.value();
  return out;
}

namespace {

bool use_direct(const GreenOptions& options, std::size_t states) {
  switch (options.method) {
    case GreenMethod::Direct: return true;
    case GreenMethod::Series: return false;
    case GreenMethod::Auto: break;
  }
  return states <= options.direct_limit;
}

}  // namespace

GreenRow green_row(const Environment& env, const Ball& ball, const Point& x, const GreenOptions& options) {
  if (!ball.contains(x)) fail(ErrorCode::InvalidArgument, "Green pole lies outside the ball");
  const Domain dom = Domain::ball(ball);
  if (use_direct(options, dom.count())) {
    GreenSolver solver(env, ball);
    return solver.row(x);
  }
  ClosureChain chain(env, dom);
  return green_row_series(chain, ball, x, options);
}

std::shared_ptr<GreenSolver> GreenCache::solver(const Environment& env, const Ball& ball) {
  const std::string key = env.hash() + "|" + ball.key();
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto it = solvers_.begin(); it != solvers_.end(); ++it) {
      if (it->first == key) {
        solvers_.splice(solvers_.begin(), solvers_, it);
        return solvers_.front().second;
      }
    }
  }
  auto made = std::make_shared<GreenSolver>(env, ball);
  std::lock_guard<std::mutex> lock(mu_);
  solvers_.emplace_front(key, made);
  while (solvers_.size() > std::max<std::size_t>(solver_capacity_, 1)) solvers_.pop_back();
  return made;
}

std::shared_ptr<const GreenRow> GreenCache::row(const Environment& env, const Ball& ball, const Point& x,
                                                const GreenOptions& options) {
  const std::string key = env.hash() + "|" + ball.key() + "|" + to_string(x, env.dim());
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = row_index_.find(key);
    if (it != row_index_.end()) {
      ++hits_;
      rows_.splice(rows_.begin(), rows_, it->second);
      return it->second->second;
    }
    ++misses_;
  }
  if (!ball.contains(x)) fail(ErrorCode::InvalidArgument, "Green pole lies outside the ball");
  std::shared_ptr<const GreenRow> made;
  const Domain dom = Domain::ball(ball);
  if (use_direct(options, dom.count())) {
    made = std::make_shared<const GreenRow>(solver(env, ball)->row(x));
  } else {
    ClosureChain chain(env, dom);
    made = std::make_shared<const GreenRow>(green_row_series(chain, ball, x, options));
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (row_index_.count(key)) return made;
  rows_.emplace_front(key, made);
  row_index_[key] = rows_.begin();
  while (rows_.size() > std::max<std::size_t>(row_capacity_, 1)) {
    row_index_.erase(rows_.back().first);
    rows_.pop_back();
  }
  return made;
}

// ---------------------------------------------------------------------------
// Caloric functions

void solve_caloric_streaming(const ClosureChain& chain, long bottom, long top, const BoundaryData& phi,
                             const SliceVisitor& visit) {
  if (bottom >= top) fail(ErrorCode::InvalidArgument, "cylinder needs bottom < top");
  const std::size_t n = chain.interior_size();
  const std::size_t m = chain.closure_size();
  std::vector<double> cur(m), nxt(m);
  for (std::size_t i = 0; i < m; ++i) cur[i] = phi(chain.point(i), bottom);
  visit(bottom, cur);
  for (long k = bottom; k < top; ++k) {
    chain.backward(cur, std::span<double>(nxt.data(), n));
    for (std::size_t i = n; i < m; ++i)
      nxt[i] = (k + 1 < top) ? phi(chain.point(i), k + 1) : std::numeric_limits<double>::quiet_NaN();
    std::swap(cur, nxt);
    visit(k + 1, cur);
  }
}

CaloricSolution::CaloricSolution(std::shared_ptr<const ClosureChain> chain, long bottom, long top)
    : chain_(std::move(chain)), bottom_(bottom), top_(top) {
  if (bottom >= top) fail(ErrorCode::InvalidArgument, "cylinder needs bottom < top");
  slices_.assign(static_cast<std::size_t>(top - bottom + 1), std::vector<double>(chain_->closure_size(), 0.0));
}

double CaloricSolution::at(const Point& x, long k) const {
  if (k < bottom_ || k > top_) fail(ErrorCode::InvalidArgument, "time outside the cylinder");
  const auto idx = chain_->index_of(x);
  if (idx == ClosureChain::npos) fail(ErrorCode::InvalidArgument, "point outside the closure of the base");
  if (k == top_ && !chain_->is_interior(idx))
    fail(ErrorCode::InvalidArgument, "lateral boundary at the top time is not part of the problem");
  return slices_[static_cast<std::size_t>(k - bottom_)][static_cast<std::size_t>(idx)];
}

std::span<const double> CaloricSolution::slice(long k) const {
  if (k < bottom_ || k > top_) fail(ErrorCode::InvalidArgument, "time outside the cylinder");
  return slices_[static_cast<std::size_t>(k - bottom_)];
}

CaloricSolution solve_caloric(std::shared_ptr<const ClosureChain> chain, long bottom, long top,
                              const BoundaryData& phi) {
  CaloricSolution sol(chain, bottom, top);
  solve_caloric_streaming(*chain, bottom, top, phi, [&](long k, std::span<const double> v) {
    auto& dst = sol.mutable_slice(k);
    std::copy(v.begin(), v.end(), dst.begin());
  });
  return sol;
}

CaloricSolution solve_caloric(const Environment& env, const Cylinder& cyl, const BoundaryData& phi) {
  auto chain = std::make_shared<const ClosureChain>(env, cyl.base);
  return solve_caloric(chain, cyl.bottom, cyl.top, phi);
}

double CaloricMeasure::total() const {
  CompensatedSum s;
  for (const auto& a : atoms) s.add(a.mass);
  return s.value();
}

double CaloricMeasure::integrate(const BoundaryData& phi) const {
  CompensatedSum s;
  for (const auto& a : atoms) s.add(a.mass * phi(a.at.x, a.at.t));
  return s.value();
}

double CaloricMeasure::mass_of(const std::function<bool(const SpaceTimePoint&)>& pred) const {
  CompensatedSum s;
  for (const auto& a : atoms)
    if (pred(a.at)) s.add(a.mass);
  return s.value();
}

CaloricMeasure caloric_measure(const ClosureChain& chain, long bottom, long top, const SpaceTimePoint& x0) {
  if (bottom >= top) fail(ErrorCode::InvalidArgument, "cylinder needs bottom < top");
  const auto idx = chain.index_of(x0.x);
  if (!chain.is_interior(idx)) fail(ErrorCode::InvalidArgument, "caloric measure base point must lie in the domain");
  if (x0.t <= bottom || x0.t > top)
    fail(ErrorCode::InvalidArgument, "caloric measure base time must satisfy bottom < t <= top");
  const std::size_t n = chain.interior_size();
  std::vector<double> cur(n, 0.0), nxt(n), exits(chain.boundary_size());
  cur[static_cast<std::size_t>(idx)] = 1.0;
  CaloricMeasure out;
  out.base = x0;
  for (long j = 1; j <= x0.t - bottom; ++j) {
    const long t = x0.t - j;
    std::fill(exits.begin(), exits.end(), 0.0);
    chain.forward(cur, nxt, exits);
    std::swap(cur, nxt);
    std::vector<CaloricAtom> level;
    for (std::size_t b = 0; b < exits.size(); ++b)
      if (exits[b] > 0.0) level.push_back({{chain.boundary()[b], t}, exits[b]});
    if (t == bottom)
      for (std::size_t i = 0; i < n; ++i)
        if (cur[i] > 0.0) level.push_back({{chain.point(i), t}, cur[i]});
    std::sort(level.begin(), level.end(), [](const CaloricAtom& a, const CaloricAtom& b) { return a.at.x < b.at.x; });
    out.atoms.insert(out.atoms.end(), level.begin(), level.end());
  }
  return out;
}

CaloricMeasure caloric_measure(const Environment& env, const Cylinder& cyl, const SpaceTimePoint& x0) {
  ClosureChain chain(env, cyl.base);
  return caloric_measure(chain, cyl.bottom, cyl.top, x0);
}

// ---------------------------------------------------------------------------
// Representation formula

double representation_check(const Environment& env, const Ball& ball, const AdjointField& m,
                            const NormalizedField& vtilde, long t_max) {
  if (t_max < 1) fail(ErrorCode::InvalidArgument, "representation check needs t_max >= 1");
  ClosureChain chain(env, Domain::ball(ball));
  const std::size_t n = chain.interior_size();
  const auto& gamma = env.gamma();

  std::vector<double> mv(chain.closure_size());
  for (std::size_t i = 0; i < chain.closure_size(); ++i) {
    mv[i] = m(chain.point(i));
    if (!(mv[i] > 0.0)) fail(ErrorCode::InvalidArgument, "adjoint weight must be positive on the closed ball");
  }

  // Observation window B_{r/2}.
  std::vector<std::size_t> window;
  for (std::size_t i = 0; i < n; ++i)
    if (2.0 * distance(chain.point(i), ball.center) < ball.radius) window.push_back(i);
  if (window.empty()) return 0.0;

  // Inner shell: interior points x+e reached from boundary points x.
  struct Entry {
    std::size_t boundary;  // closure index of x
    std::size_t e;
    std::size_t shell;     // index into shell list
  };
  std::map<std::size_t, std::size_t> shell_of;
  std::vector<std::size_t> shell;
  std::vector<Entry> entries;
  for (std::size_t b = n; b < chain.closure_size(); ++b) {
    const Point& x = chain.point(b);
    for (std::size_t e = 0; e < gamma.size(); ++e) {
      const auto z = chain.index_of(x + gamma[e]);
      if (!chain.is_interior(z)) continue;
      auto [it, fresh] = shell_of.emplace(static_cast<std::size_t>(z), shell.size());
      if (fresh) shell.push_back(static_cast<std::size_t>(z));
      entries.push_back({b, e, it->second});
    }
  }

  // q_k(z, y) for z in the shell, y in the window, k = 0..t_max-1.
  const std::size_t W = window.size();
  std::vector<double> q(shell.size() * static_cast<std::size_t>(t_max) * W);
  auto qat = [&](std::size_t s, long k, std::size_t w) -> double& {
    return q[(s * static_cast<std::size_t>(t_max) + static_cast<std::size_t>(k)) * W + w];
  };
  {
    std::vector<double> cur(n), nxt(n);
    for (std::size_t s = 0; s < shell.size(); ++s) {
      std::fill(cur.begin(), cur.end(), 0.0);
      cur[shell[s]] = 1.0;
      for (long k = 0; k < t_max; ++k) {
        for (std::size_t w = 0; w < W; ++w) qat(s, k, w) = cur[window[w]];
        if (k + 1 < t_max) {
          chain.forward(cur, nxt);
          std::swap(cur, nxt);
        }
      }
    }
  }

  // Lateral weights m(x) v(x,s) pi(x,e) for s = 0..t_max-1.
  std::vector<double> weight(entries.size() * static_cast<std::size_t>(t_max));
  for (std::size_t a = 0; a < entries.size(); ++a) {
    const Point& x = chain.point(entries[a].boundary);
    const double px = env.pi(x, entries[a].e);
    for (long s = 0; s < t_max; ++s)
      weight[a * static_cast<std::size_t>(t_max) + static_cast<std::size_t>(s)] =
          mv[entries[a].boundary] * vtilde(x, s) * px;
  }

  std::vector<double> init(n), nxt(n);
  for (std::size_t i = 0; i < n; ++i) init[i] = mv[i] * vtilde(chain.point(i), 0);

  double worst = 0.0;
  for (long t = 1; t <= t_max; ++t) {
    chain.forward(init, nxt);
    std::swap(init, nxt);
    for (std::size_t w = 0; w < W; ++w) {
      CompensatedSum rhs;
      rhs.add(init[window[w]]);
      for (std::size_t a = 0; a < entries.size(); ++a)
        for (long s = 0; s < t; ++s)
          rhs.add(weight[a * static_cast<std::size_t>(t_max) + static_cast<std::size_t>(s)] *
                  qat(entries[a].shell, t - s - 1, w));
      const Point& y = chain.point(window[w]);
      const double diff = std::abs(rhs.value() / mv[window[w]] - vtilde(y, t));
      worst = std::max(worst, diff);
    }
  }
  return worst;
}

}  // namespace heatlab
