#include "contpop/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "contpop/errors.hpp"

namespace contpop {

double Box::volume(int dim) const {
  double v = 1.0;
  for (int i = 0; i < dim; ++i) v *= upper[i] - lower[i];
  return v;
}

bool Box::contains(const Point& x, int dim) const {
  for (int i = 0; i < dim; ++i) {
    if (x[i] < lower[i] || x[i] >= upper[i]) return false;
  }
  return true;
}

Window::Window(int dim, std::vector<double> sides, Boundary boundary, double buffer_width)
    : dim_(dim), sides_(std::move(sides)), boundary_(boundary), buffer_(buffer_width) {
  if (dim_ < 1 || dim_ > 3) throw DomainError("window dimension must be 1, 2 or 3");
  if (sides_.size() != static_cast<std::size_t>(dim_)) {
    throw DomainError("window needs one side length per axis");
  }
  for (double s : sides_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("window sides must be positive");
  }
  if (boundary_ == Boundary::periodic) {
    buffer_ = 0.0;
  } else if (!(buffer_ >= 0.0)) {
    throw DomainError("buffer width must be nonnegative");
  }
}

double Window::min_side() const { return *std::min_element(sides_.begin(), sides_.end()); }

double Window::volume() const {
  double v = 1.0;
  for (double s : sides_) v *= s;
  return v;
}

Box Window::core() const {
  Box b;
  for (int i = 0; i < dim_; ++i) b.upper[i] = sides_[i];
  return b;
}

Box Window::domain() const {
  Box b;
  for (int i = 0; i < dim_; ++i) {
    b.lower[i] = -buffer_;
    b.upper[i] = sides_[i] + buffer_;
  }
  return b;
}

Point Window::displacement(const Point& a, const Point& b) const {
  Point d{};
  for (int i = 0; i < dim_; ++i) {
    double v = b[i] - a[i];
    if (boundary_ == Boundary::periodic) {
      const double L = sides_[i];
      v -= L * std::nearbyint(v / L);
    }
    d[i] = v;
  }
  return d;
}

double Window::distance(const Point& a, const Point& b) const {
  return norm(displacement(a, b), dim_);
}

double norm(const Point& v, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace contpop
