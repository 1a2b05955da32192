#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"

namespace heatlab {

inline constexpr int kMaxDim = 3;
using Coord = std::int64_t;

// A point of Z^d. Coordinates beyond the active dimension are kept at zero,
// so norms and sums never need to know d.
struct Point {
  std::array<Coord, kMaxDim> c{};

  Coord& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  Coord operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  friend Point operator+(const Point& a, const Point& b) {
    Point r;
    for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
    return r;
  }
  friend Point operator-(const Point& a, const Point& b) {
    Point r;
    for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
    return r;
  }
  friend Point operator-(const Point& a) {
    Point r;
    for (int i = 0; i < kMaxDim; ++i) r[i] = -a[i];
    return r;
  }
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

inline Point make_point(std::initializer_list<Coord> xs) {
  Point p;
  int i = 0;
  for (Coord x : xs) {
    if (i >= kMaxDim) fail(ErrorCode::InvalidArgument, "point has more than 3 coordinates");
    p[i++] = x;
  }
  return p;
}

inline Point unit_vector(int axis, Coord sign = 1) {
  Point p;
  p[axis] = sign;
  return p;
}

inline Coord norm2(const Point& p) {
  Coord s = 0;
  for (int i = 0; i < kMaxDim; ++i) s += p[i] * p[i];
  return s;
}

inline double norm(const Point& p) { return std::sqrt(static_cast<double>(norm2(p))); }

inline double distance(const Point& a, const Point& b) { return norm(a - b); }

std::string to_string(const Point& p, int dim);

struct PointHash {
  std::size_t operator()(const Point& p) const noexcept;
};

// Axis-aligned box with inclusive corners. Enumeration is lexicographic with
// the last active coordinate varying fastest.
class Box {
public:
  Box() = default;
  Box(int dim, Point lo, Point hi);

  static Box around(int dim, const Point& center, Coord half_width);

  int dim() const { return dim_; }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  Coord extent(int axis) const { return hi_[axis] - lo_[axis] + 1; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool contains(const Point& p) const {
    for (int i = 0; i < dim_; ++i)
      if (p[i] < lo_[i] || p[i] > hi_[i]) return false;
    return true;
  }
  bool contains(const Box& other) const;

  std::size_t index(const Point& p) const {
    std::size_t idx = 0;
    for (int i = 0; i < dim_; ++i)
      idx = idx * static_cast<std::size_t>(extent(i)) + static_cast<std::size_t>(p[i] - lo_[i]);
    return idx;
  }
  Point point(std::size_t idx) const;

  Box enlarged(Coord by) const;
  Box intersect(const Box& other) const;
  Box hull(const Box& other) const;

  friend bool operator==(const Box&, const Box&) = default;

private:
  int dim_ = 0;
  Point lo_{};
  Point hi_{};
  std::size_t size_ = 0;
};

template <typename Fn>
void for_each_point(const Box& box, Fn&& fn) {
  if (box.empty()) return;
  Point p = box.lo();
  const int d = box.dim();
  for (std::size_t n = 0; n < box.size(); ++n) {
    fn(p);
    for (int i = d - 1; i >= 0; --i) {
      if (p[i] < box.hi()[i]) {
        ++p[i];
        break;
      }
      p[i] = box.lo()[i];
    }
  }
}

// B_r(x) = { y : |y - x| < r }, strict Euclidean inequality.
struct Ball {
  int dim = 1;
  Point center{};
  double radius = 0.0;

  bool contains(const Point& p) const {
    return static_cast<double>(norm2(p - center)) < radius * radius;
  }
  Box bounding_box() const;
  std::string key() const;
};

// Values of a real function on every point of a box.
struct LatticeFunction {
  Box box;
  std::vector<double> values;

  LatticeFunction() = default;
  explicit LatticeFunction(const Box& b, double fill = 0.0) : box(b), values(b.size(), fill) {}

  double& at(const Point& p) { return values[box.index(p)]; }
  double at(const Point& p) const { return values[box.index(p)]; }
  double value_or(const Point& p, double fallback) const {
    return box.contains(p) ? values[box.index(p)] : fallback;
  }
};

// Finite set of lattice points, stored as a membership mask over a box.
class Domain {
public:
  Domain() = default;
  Domain(const Box& box, const std::function<bool(const Point&)>& member);

  static Domain ball(const Ball& b);

  const Box& box() const { return box_; }
  int dim() const { return box_.dim(); }
  bool contains(const Point& p) const { return box_.contains(p) && mask_[box_.index(p)] != 0; }
  std::size_t count() const { return points_.size(); }
  const std::vector<Point>& points() const { return points_; }

private:
  Box box_;
  std::vector<std::uint8_t> mask_;
  std::vector<Point> points_;
};

// Neumaier-compensated sum.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double compensated_total(const std::vector<double>& xs);

}  // namespace heatlab
