#include "montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace heatlab {

AliasTable::AliasTable(std::span<const double> p) {
  const std::size_t n = p.size();
  if (n == 0) fail(ErrorCode::InvalidArgument, "alias table needs at least one outcome");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) fail(ErrorCode::InvalidArgument, "alias table weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "alias table weights sum to zero");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = p[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back(), l = large.back();
    small.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::uint32_t i : large) prob_[i] = 1.0, alias_[i] = i;
  for (std::uint32_t i : small) prob_[i] = 1.0, alias_[i] = i;
}

std::size_t AliasTable::sample(CounterStream& rng) const {
  const unsigned __int128 wide = static_cast<unsigned __int128>(rng.next_bits()) * prob_.size();
  const std::size_t col = static_cast<std::size_t>(wide >> 64);
  return rng.uniform() < prob_[col] ? col : alias_[col];
}

IncrementSampler::IncrementSampler(const Environment& env)
    : env_(&env), period_(env.period()), scratch_(env.gamma().size()) {
  if (env.translation_invariant()) {
    env.probabilities(Point{}, scratch_);
    shared_ = AliasTable(scratch_);
    built_ = 1;
  }
}

const AliasTable& IncrementSampler::table(const Point& x) {
  if (env_->translation_invariant()) return shared_;
  Point key = x;
  if (period_)
    for (int i = 0; i < env_->dim(); ++i) key[i] = ((x[i] % (*period_)[i]) + (*period_)[i]) % (*period_)[i];
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  env_->probabilities(key, scratch_);
  ++built_;
  return cache_.emplace(key, AliasTable(scratch_)).first->second;
}

std::size_t IncrementSampler::sample(const Point& x, CounterStream& rng) { return table(x).sample(rng); }

namespace {

// Runs body(first, last, worker) on contiguous index ranges.
template <typename Body>
void parallel_ranges(std::uint64_t N, unsigned jobs, Body&& body) {
  jobs = std::max(1u, jobs);
  if (jobs == 1 || N < 2) {
    body(0, N, 0u);
    return;
  }
  std::vector<std::thread> threads;
  const std::uint64_t chunk = (N + jobs - 1) / jobs;
  for (unsigned w = 0; w < jobs; ++w) {
    const std::uint64_t a = std::min<std::uint64_t>(N, w * chunk), b = std::min<std::uint64_t>(N, a + chunk);
    threads.emplace_back([&, a, b, w] { body(a, b, w); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace

double EmpiricalKernel::frequency(const Point& y) const {
  auto it = counts.find(y);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(paths);
}

double EmpiricalKernel::tv_distance(const MassField& exact) const {
  CompensatedSum s;
  for_each_point(exact.mass.box, [&](const Point& y) {
    const double p = exact.mass.at(y);
    if (p != 0.0 || counts.count(y)) s.add(std::abs(frequency(y) - p));
  });
  for (const auto& [y, c] : counts)
    if (!exact.mass.box.contains(y)) s.add(static_cast<double>(c) / static_cast<double>(paths));
  return s.value() / 2.0;
}

std::array<double, kMaxDim> EmpiricalKernel::mean_displacement() const {
  std::array<double, kMaxDim> m{};
  for (const auto& [y, c] : counts)
    for (int i = 0; i < kMaxDim; ++i)
      m[static_cast<std::size_t>(i)] += static_cast<double>(y[i] - origin[i]) * static_cast<double>(c);
  for (double& v : m) v /= static_cast<double>(std::max<std::uint64_t>(paths, 1));
  return m;
}

EmpiricalKernel sample_paths(const Environment& env, const Point& x0, long n, std::uint64_t N, std::uint64_t seed,
                             const SampleOptions& options) {
  if (N < 1) fail(ErrorCode::InvalidArgument, "need at least one path");
  if (n < 0) fail(ErrorCode::InvalidArgument, "step count must be nonnegative");
  const unsigned jobs = std::max(1u, options.jobs);
  std::vector<std::map<Point, std::uint64_t>> partial(jobs);
  const auto& gamma = env.gamma();
  parallel_ranges(N, jobs, [&](std::uint64_t a, std::uint64_t b, unsigned w) {
    IncrementSampler sampler(env);
    std::unordered_map<Point, std::uint64_t, PointHash> local;
    for (std::uint64_t i = a; i < b; ++i) {
      CounterStream rng(seed, kKernelStream, i);
      Point x = x0;
      for (long k = 0; k < n; ++k) x = x + gamma[sampler.sample(x, rng)];
      ++local[x];
    }
    for (const auto& [p, c] : local) partial[w][p] += c;
  });
  EmpiricalKernel out;
  out.origin = x0;
  out.steps = n;
  out.paths = N;
  for (const auto& m : partial)
    for (const auto& [p, c] : m) out.counts[p] += c;
  return out;
}

double EmpiricalExit::frequency(const SpaceTimePoint& p) const {
  auto it = counts.find(p);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(paths);
}

EmpiricalExit sample_exit(const ClosureChain& chain, long bottom, long top, const SpaceTimePoint& x0, std::uint64_t N,
                          std::uint64_t seed, const SampleOptions& options) {
  if (N < 1) fail(ErrorCode::InvalidArgument, "need at least one path");
  if (bottom >= top) fail(ErrorCode::InvalidArgument, "cylinder needs bottom < top");
  if (!chain.domain().contains(x0.x) || x0.t <= bottom || x0.t > top)
    fail(ErrorCode::InvalidArgument, "exit sampling needs a start point strictly inside the cylinder");
  const Environment& env = chain.environment();
  const auto& gamma = env.gamma();
  const unsigned jobs = std::max(1u, options.jobs);
  std::vector<std::map<SpaceTimePoint, std::uint64_t>> partial(jobs);
  parallel_ranges(N, jobs, [&](std::uint64_t a, std::uint64_t b, unsigned w) {
    IncrementSampler sampler(env);
    auto& local = partial[w];
    for (std::uint64_t i = a; i < b; ++i) {
      CounterStream rng(seed, kExitStream, i);
      Point x = x0.x;
      long t = x0.t;
      for (;;) {
        x = x + gamma[sampler.sample(x, rng)];
        --t;
        if (!chain.domain().contains(x) || t == bottom) break;
      }
      ++local[{x, t}];
    }
  });
  EmpiricalExit out;
  out.base = x0;
  out.paths = N;
  for (const auto& m : partial)
    for (const auto& [p, c] : m) out.counts[p] += c;
  return out;
}

EmpiricalExit sample_exit(const Environment& env, const Cylinder& cyl, const SpaceTimePoint& x0, std::uint64_t N,
                          std::uint64_t seed, const SampleOptions& options) {
  ClosureChain chain(env, cyl.base);
  return sample_exit(chain, cyl.bottom, cyl.top, x0, N, seed, options);
}

ExitComparison compare_exit(const EmpiricalExit& empirical, const CaloricMeasure& exact) {
  ExitComparison out;
  const double N = static_cast<double>(empirical.paths);
  std::map<SpaceTimePoint, double> p;
  for (const auto& a : exact.atoms) p[a.at] += a.mass;
  for (const auto& [at, mass] : p) {
    ++out.atoms;
    if (!(mass > 0.0 && mass < 1.0)) continue;
    const double z = (empirical.frequency(at) - mass) / std::sqrt(mass * (1.0 - mass) / N);
    if (std::abs(z) > 3.0) ++out.beyond_3sigma;
    if (std::abs(z) > out.max_abs_z) out.max_abs_z = std::abs(z), out.worst = at;
  }
  for (const auto& [at, c] : empirical.counts)
    if (!p.count(at)) out.off_support += c;
  return out;
}

}  // namespace heatlab
