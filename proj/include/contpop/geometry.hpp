#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace contpop {

/// Position in up to three dimensions; unused trailing components stay 0.
using Point = std::array<double, 3>;

enum class Boundary { periodic, absorbing_buffer };

/// Axis-aligned box [lower, upper) in absolute coordinates.
struct Box {
  Point lower{};
  Point upper{};

  double volume(int dim) const;
  bool contains(const Point& x, int dim) const;
};

/// Observation window with its boundary convention.
///
/// Under periodic boundaries particles live in [0, side) per axis and
/// distances use the minimum image. With an absorbing buffer, particles live
/// in [-w, side + w) and distances are Euclidean; statistics are collected
/// only in the core [0, side).
class Window {
 public:
  Window(int dim, std::vector<double> sides, Boundary boundary = Boundary::periodic,
         double buffer_width = 0.0);

  int dim() const { return dim_; }
  double side(int axis) const { return sides_[static_cast<std::size_t>(axis)]; }
  const std::vector<double>& sides() const { return sides_; }
  double min_side() const;
  Boundary boundary() const { return boundary_; }
  bool periodic() const { return boundary_ == Boundary::periodic; }
  double buffer_width() const { return buffer_; }

  /// Volume of the core window.
  double volume() const;
  Box core() const;
  /// Region particles may occupy (core plus buffer).
  Box domain() const;
  double domain_volume() const { return domain().volume(dim_); }

  bool in_domain(const Point& x) const { return domain().contains(x, dim_); }
  bool in_core(const Point& x) const { return core().contains(x, dim_); }

  /// Vector from a to b under the boundary convention.
  Point displacement(const Point& a, const Point& b) const;
  double distance(const Point& a, const Point& b) const;

 private:
  int dim_;
  std::vector<double> sides_;
  Boundary boundary_;
  double buffer_;
};

double norm(const Point& v, int dim);

}  // namespace contpop
