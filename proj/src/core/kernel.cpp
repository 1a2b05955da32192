#include "kernel.hpp"

#include <algorithm>
#include <set>

namespace heatlab {

namespace {

// Calls fn(start_index_in_full, length, row_start_point) for every row of
// `sub` along the last axis; `sub` must lie inside `full`.
template <typename Fn>
void for_each_row(const Box& full, const Box& sub, Fn&& fn) {
  if (sub.empty()) return;
  const int last = sub.dim() - 1;
  Point hi = sub.hi();
  hi[last] = sub.lo()[last];
  const Box starts(sub.dim(), sub.lo(), hi);
  const Coord len = sub.extent(last);
  for_each_point(starts, [&](const Point& p) { fn(full.index(p), len, p); });
}

Box shrink(const Box& b, Coord by) { return b.enlarged(-by); }

}  // namespace

// ---------------------------------------------------------------------------
// Operators

LatticeFunction apply_L(const Environment& env, const LatticeFunction& f, const Box& region) {
  const auto& gamma = env.gamma();
  if (!f.box.contains(region.enlarged(gamma.reach())))
    fail(ErrorCode::InvalidArgument, "apply_L: function is not defined on the region enlarged by the increment reach");
  LatticeFunction out(region);
  std::vector<double> row(gamma.size());
  for_each_point(region, [&](const Point& x) {
    env.probabilities(x, row);
    const double fx = f.at(x);
    CompensatedSum s;
    for (std::size_t e = 0; e < gamma.size(); ++e) s.add(row[e] * (f.at(x + gamma[e]) - fx));
    out.at(x) = s.value();
  });
  return out;
}

LatticeFunction apply_L(const Environment& env, const LatticeFunction& f) {
  return apply_L(env, f, shrink(f.box, env.gamma().reach()));
}

LatticeFunction apply_L_star(const Environment& env, const LatticeFunction& g, const Box& region) {
  const auto& gamma = env.gamma();
  if (!g.box.contains(region.enlarged(gamma.reach())))
    fail(ErrorCode::InvalidArgument, "apply_L_star: function is not defined on the region enlarged by the increment reach");
  LatticeFunction out(region);
  for_each_point(region, [&](const Point& x) {
    CompensatedSum s;
    for (std::size_t e = 0; e < gamma.size(); ++e) {
      const Point src = x - gamma[e];
      s.add(env.pi(src, e) * g.at(src));
    }
    s.add(-g.at(x));
    out.at(x) = s.value();
  });
  return out;
}

LatticeFunction apply_L_star(const Environment& env, const LatticeFunction& g) {
  return apply_L_star(env, g, shrink(g.box, env.gamma().reach()));
}

// ---------------------------------------------------------------------------
// Free evolution

MassField step(const Environment& env, const MassField& mu) {
  const auto& gamma = env.gamma();
  MassField out;
  out.mass = LatticeFunction(mu.mass.box.enlarged(gamma.reach()));
  out.time = mu.time + 1;
  out.escaped = mu.escaped;
  std::vector<double> row(gamma.size());
  for_each_point(mu.mass.box, [&](const Point& x) {
    const double m = mu.mass.at(x);
    if (m == 0.0) return;
    env.probabilities(x, row);
    for (std::size_t e = 0; e < gamma.size(); ++e) out.mass.at(x + gamma[e]) += row[e] * m;
  });
  return out;
}

std::size_t KernelEvolution::bytes_needed(const Environment& env, long n_max) {
  const Coord half = static_cast<Coord>(n_max) * env.gamma().reach();
  long double sites = 1.0L;
  for (int i = 0; i < env.dim(); ++i) sites *= static_cast<long double>(2 * half + 1);
  long double per_site = 2.0L * sizeof(double);
  if (!env.translation_invariant()) per_site += static_cast<long double>(env.gamma().size() * sizeof(double));
  const long double bytes = sites * per_site;
  if (bytes > static_cast<long double>(SIZE_MAX / 2)) return SIZE_MAX / 2;
  return static_cast<std::size_t>(bytes);
}

namespace {

Box checked_full_box(const Environment& env, const Point& x, long n_max, const KernelOptions& options) {
  if (n_max < 0) fail(ErrorCode::InvalidArgument, "kernel time must be nonnegative");
  const std::size_t need = KernelEvolution::bytes_needed(env, n_max);
  if (need > options.memory_budget)
    fail(ErrorCode::ResourceLimit, "kernel row needs " + std::to_string(need) + " bytes, budget is " +
                                       std::to_string(options.memory_budget));
  return Box::around(env.dim(), x, static_cast<Coord>(n_max) * env.gamma().reach());
}

}  // namespace

KernelEvolution::KernelEvolution(const Environment& env, const Point& x, long n_max, const KernelOptions& options)
    : env_(&env),
      origin_(x),
      n_max_(n_max),
      full_(checked_full_box(env, x, n_max, options)),
      active_(Box::around(env.dim(), x, 0)),
      sites_(env, full_),
      current_(full_),
      next_(full_) {
  const auto& gamma = env.gamma();
  std::vector<std::ptrdiff_t> stride(static_cast<std::size_t>(env.dim()), 1);
  for (int i = env.dim() - 2; i >= 0; --i)
    stride[static_cast<std::size_t>(i)] = stride[static_cast<std::size_t>(i + 1)] * full_.extent(i + 1);
  for (const Point& e : gamma.increments()) {
    std::ptrdiff_t off = 0;
    for (int i = 0; i < env.dim(); ++i) off += e[i] * stride[static_cast<std::size_t>(i)];
    offsets_.push_back(off);
  }
  current_.at(x) = 1.0;
}

void KernelEvolution::advance() {
  if (time_ >= n_max_) fail(ErrorCode::InvalidArgument, "kernel evolution advanced past its preallocated time");
  const Box next_active = active_.enlarged(env_->gamma().reach());
  for_each_row(full_, next_active, [&](std::size_t start, Coord len, const Point&) {
    std::fill_n(next_.values.begin() + static_cast<std::ptrdiff_t>(start), len, 0.0);
  });
  const std::size_t width = offsets_.size();
  double* dst = next_.values.data();
  const double* src = current_.values.data();
  for_each_row(full_, active_, [&](std::size_t start, Coord len, const Point&) {
    for (Coord k = 0; k < len; ++k) {
      const std::size_t idx = start + static_cast<std::size_t>(k);
      const double m = src[idx];
      if (m == 0.0) continue;
      const auto row = sites_.row(idx);
      for (std::size_t e = 0; e < width; ++e) dst[static_cast<std::ptrdiff_t>(idx) + offsets_[e]] += row[e] * m;
    }
  });
  std::swap(current_, next_);
  active_ = next_active;
  ++time_;
}

void KernelEvolution::advance_to(long n) {
  while (time_ < n) advance();
}

MassField KernelEvolution::snapshot() const {
  MassField out;
  out.mass = LatticeFunction(active_);
  for_each_row(full_, active_, [&](std::size_t start, Coord len, const Point& p) {
    std::copy_n(current_.values.begin() + static_cast<std::ptrdiff_t>(start), len,
                out.mass.values.begin() + static_cast<std::ptrdiff_t>(active_.index(p)));
  });
  out.time = time_;
  return out;
}

MassField kernel_row(const Environment& env, const Point& x, long n, const KernelOptions& options) {
  KernelEvolution evo(env, x, n, options);
  evo.advance_to(n);
  return evo.snapshot();
}

// ---------------------------------------------------------------------------
// Killed chain

ClosureChain::ClosureChain(const Environment& env, Domain domain)
    : env_(&env), domain_(std::move(domain)), width_(env.gamma().size()) {
  if (domain_.count() == 0) fail(ErrorCode::InvalidArgument, "killed chain needs a nonempty domain");
  const auto& gamma = env.gamma();
  std::set<Point> bnd;
  for (const Point& p : domain_.points())
    for (const Point& e : gamma.increments())
      if (!domain_.contains(p + e)) bnd.insert(p + e);
  boundary_.assign(bnd.begin(), bnd.end());

  index_box_ = domain_.box().enlarged(gamma.reach());
  index_.assign(index_box_.size(), npos);
  const auto n = domain_.count();
  for (std::size_t i = 0; i < n; ++i) index_[index_box_.index(domain_.points()[i])] = static_cast<std::int32_t>(i);
  for (std::size_t b = 0; b < boundary_.size(); ++b)
    index_[index_box_.index(boundary_[b])] = static_cast<std::int32_t>(n + b);

  targets_.resize(n * width_);
  probs_.resize(n * width_);
  std::vector<double> row(width_);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = domain_.points()[i];
    env.probabilities(p, row);
    for (std::size_t e = 0; e < width_; ++e) {
      targets_[i * width_ + e] = index_of(p + gamma[e]);
      probs_[i * width_ + e] = row[e];
    }
  }
}

const Point& ClosureChain::point(std::size_t idx) const {
  return idx < interior_size() ? domain_.points()[idx] : boundary_[idx - interior_size()];
}

std::int32_t ClosureChain::index_of(const Point& p) const {
  if (!index_box_.contains(p)) return npos;
  return index_[index_box_.index(p)];
}

double ClosureChain::forward(std::span<const double> in, std::span<double> out, std::span<double> exits) const {
  const std::size_t n = interior_size();
  std::fill(out.begin(), out.end(), 0.0);
  CompensatedSum killed;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = in[i];
    if (m == 0.0) continue;
    for (std::size_t e = 0; e < width_; ++e) {
      const auto t = static_cast<std::size_t>(targets_[i * width_ + e]);
      const double moved = probs_[i * width_ + e] * m;
      if (t < n) {
        out[t] += moved;
      } else {
        killed.add(moved);
        if (!exits.empty()) exits[t - n] += moved;
      }
    }
  }
  return killed.value();
}

void ClosureChain::backward(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = interior_size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t e = 0; e < width_; ++e)
      s += probs_[i * width_ + e] * u[static_cast<std::size_t>(targets_[i * width_ + e])];
    out[i] = s;
  }
}

MassField to_field(const ClosureChain& chain, std::span<const double> interior, long time, double escaped) {
  MassField f;
  f.mass = LatticeFunction(chain.domain().box());
  for (std::size_t i = 0; i < chain.interior_size(); ++i) f.mass.at(chain.point(i)) = interior[i];
  f.time = time;
  f.escaped = escaped;
  return f;
}

MassField killed_step(const ClosureChain& chain, const MassField& mu) {
  std::vector<double> in(chain.interior_size(), 0.0), out(chain.interior_size());
  for_each_point(mu.mass.box, [&](const Point& p) {
    const double m = mu.mass.at(p);
    if (m == 0.0) return;
    const auto idx = chain.index_of(p);
    if (!chain.is_interior(idx)) fail(ErrorCode::InvalidArgument, "killed_step: mass outside the domain");
    in[static_cast<std::size_t>(idx)] = m;
  });
  const double killed = chain.forward(in, out);
  return to_field(chain, out, mu.time + 1, mu.escaped + killed);
}

MassField killed_kernel(const ClosureChain& chain, const Point& x, long t) {
  if (t < 0) fail(ErrorCode::InvalidArgument, "killed kernel time must be nonnegative");
  const auto idx = chain.index_of(x);
  if (!chain.is_interior(idx)) fail(ErrorCode::InvalidArgument, "killed kernel start point lies outside the domain");
  std::vector<double> cur(chain.interior_size(), 0.0), nxt(chain.interior_size());
  cur[static_cast<std::size_t>(idx)] = 1.0;
  CompensatedSum escaped;
  for (long s = 0; s < t; ++s) {
    escaped.add(chain.forward(cur, nxt));
    std::swap(cur, nxt);
  }
  return to_field(chain, cur, t, escaped.value());
}

MassField killed_kernel(const Environment& env, const Ball& ball, const Point& x, long t) {
  ClosureChain chain(env, Domain::ball(ball));
  return killed_kernel(chain, x, t);
}

}  // namespace heatlab
