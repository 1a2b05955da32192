#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "potential.hpp"
#include "rng.hpp"

namespace heatlab {

// Vose alias table over a finite distribution.
class AliasTable {
public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> p);

  std::size_t size() const { return prob_.size(); }
  std::size_t sample(CounterStream& rng) const;

private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

// Increment sampler with tables built on first use: one shared table for
// translation-invariant rules, one per period class for periodic rules, one
// per visited site otherwise. Not thread-safe; use one per worker.
class IncrementSampler {
public:
  explicit IncrementSampler(const Environment& env);

  std::size_t sample(const Point& x, CounterStream& rng);
  std::size_t tables_built() const { return built_; }

private:
  const AliasTable& table(const Point& x);

  const Environment* env_;
  std::optional<Point> period_;
  AliasTable shared_;
  std::unordered_map<Point, AliasTable, PointHash> cache_;
  std::vector<double> scratch_;
  std::size_t built_ = 0;
};

struct SampleOptions {
  unsigned jobs = 1;
};

// Histogram of S_n over N paths started at x0.
struct EmpiricalKernel {
  Point origin{};
  long steps = 0;
  std::uint64_t paths = 0;
  std::map<Point, std::uint64_t> counts;

  double frequency(const Point& y) const;
  // sum |freq - p| / 2 over the union of supports.
  double tv_distance(const MassField& exact) const;
  std::array<double, kMaxDim> mean_displacement() const;
};

// Path i draws from CounterStream(seed, kKernelStream, i), so the result
// does not depend on how paths are split across workers.
inline constexpr std::uint64_t kKernelStream = 1;
inline constexpr std::uint64_t kExitStream = 2;

EmpiricalKernel sample_paths(const Environment& env, const Point& x0, long n, std::uint64_t N, std::uint64_t seed,
                             const SampleOptions& options = {});

// Empirical exit distribution of (S_j, t0 - j) from A x {bottom..top}.
struct EmpiricalExit {
  SpaceTimePoint base;
  std::uint64_t paths = 0;
  std::map<SpaceTimePoint, std::uint64_t> counts;

  double frequency(const SpaceTimePoint& p) const;
};

EmpiricalExit sample_exit(const ClosureChain& chain, long bottom, long top, const SpaceTimePoint& x0, std::uint64_t N,
                          std::uint64_t seed, const SampleOptions& options = {});
EmpiricalExit sample_exit(const Environment& env, const Cylinder& cyl, const SpaceTimePoint& x0, std::uint64_t N,
                          std::uint64_t seed, const SampleOptions& options = {});

// Per-atom comparison with the exact caloric measure.
struct ExitComparison {
  double max_abs_z = 0.0;           // over atoms with 0 < p < 1
  SpaceTimePoint worst{};
  std::size_t atoms = 0;
  std::size_t beyond_3sigma = 0;
  std::uint64_t off_support = 0;    // samples on points of zero exact mass
};

ExitComparison compare_exit(const EmpiricalExit& empirical, const CaloricMeasure& exact);

}  // namespace heatlab
