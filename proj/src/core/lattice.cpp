#include "lattice.hpp"

#include <algorithm>
#include <sstream>

namespace heatlab {

std::string to_string(const Point& p, int dim) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) {
    if (i) os << ',';
    os << p[i];
  }
  os << ')';
  return os.str();
}

std::size_t PointHash::operator()(const Point& p) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int i = 0; i < kMaxDim; ++i) {
    h ^= static_cast<std::uint64_t>(p[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

Box::Box(int dim, Point lo, Point hi) : dim_(dim), lo_(lo), hi_(hi) {
  if (dim < 1 || dim > kMaxDim) fail(ErrorCode::InvalidArgument, "box dimension must be 1, 2 or 3");
  for (int i = dim; i < kMaxDim; ++i) lo_[i] = hi_[i] = 0;
  size_ = 1;
  for (int i = 0; i < dim; ++i) {
    if (hi_[i] < lo_[i]) {
      size_ = 0;
      return;
    }
    size_ *= static_cast<std::size_t>(hi_[i] - lo_[i] + 1);
  }
}

Box Box::around(int dim, const Point& center, Coord half_width) {
  Point lo = center, hi = center;
  for (int i = 0; i < dim; ++i) {
    lo[i] -= half_width;
    hi[i] += half_width;
  }
  return Box(dim, lo, hi);
}

bool Box::contains(const Box& other) const {
  if (other.empty()) return true;
  return contains(other.lo()) && contains(other.hi());
}

Point Box::point(std::size_t idx) const {
  Point p;
  for (int i = dim_ - 1; i >= 0; --i) {
    const auto ext = static_cast<std::size_t>(extent(i));
    p[i] = lo_[i] + static_cast<Coord>(idx % ext);
    idx /= ext;
  }
  return p;
}

Box Box::enlarged(Coord by) const {
  Point lo = lo_, hi = hi_;
  for (int i = 0; i < dim_; ++i) {
    lo[i] -= by;
    hi[i] += by;
  }
  return Box(dim_, lo, hi);
}

Box Box::intersect(const Box& other) const {
  Point lo, hi;
  for (int i = 0; i < dim_; ++i) {
    lo[i] = std::max(lo_[i], other.lo_[i]);
    hi[i] = std::min(hi_[i], other.hi_[i]);
  }
  return Box(dim_, lo, hi);
}

Box Box::hull(const Box& other) const {
  if (empty()) return other;
  if (other.empty()) return *this;
  Point lo, hi;
  for (int i = 0; i < dim_; ++i) {
    lo[i] = std::min(lo_[i], other.lo_[i]);
    hi[i] = std::max(hi_[i], other.hi_[i]);
  }
  return Box(dim_, lo, hi);
}

Box Ball::bounding_box() const {
  // Largest integer k with k < radius bounds every coordinate offset.
  Coord k = static_cast<Coord>(std::ceil(radius)) - 1;
  if (k < 0) return Box(dim, center, center - unit_vector(0));
  return Box::around(dim, center, k);
}

std::string Ball::key() const {
  std::ostringstream os;
  os.precision(17);
  os << dim << ':' << to_string(center, dim) << ':' << radius;
  return os.str();
}

Domain::Domain(const Box& box, const std::function<bool(const Point&)>& member)
    : box_(box), mask_(box.size(), 0) {
  for_each_point(box_, [&](const Point& p) {
    if (member(p)) {
      mask_[box_.index(p)] = 1;
      points_.push_back(p);
    }
  });
}

Domain Domain::ball(const Ball& b) {
  return Domain(b.bounding_box(), [&](const Point& p) { return b.contains(p); });
}

double compensated_total(const std::vector<double>& xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

}  // namespace heatlab
