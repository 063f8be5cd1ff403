#pragma once

#include <string>
#include <vector>

#include "contpop/geometry.hpp"
#include "contpop/rng.hpp"

namespace contpop {

/// Nonnegative bounded scalar field on the particle domain: immigration
/// rate b (1/(time*volume)), mortality m (1/time) or an initial density.
///
/// Representations: constant; box preset (a constant inside an axis-aligned
/// box, zero outside); piecewise-constant grid over the domain, stored
/// row-major with the last axis fastest.
class ScalarField {
 public:
  enum class Kind { constant, box, grid };

  ScalarField() = default;

  static ScalarField constant(double value);
  static ScalarField box(double value, const Box& support);
  static ScalarField grid(const Box& extent, std::vector<int> counts, std::vector<double> values);

  Kind kind() const { return kind_; }
  double value(const Point& x) const;
  double operator()(const Point& x) const { return value(x); }

  /// Supremum ||f||.
  double sup() const { return sup_; }
  /// Infimum over the given region (exact for all representations).
  double inf_over(const Box& region, int dim) const;
  bool is_constant() const { return kind_ == Kind::constant; }
  /// Constant value; only meaningful when is_constant().
  double constant_value() const { return value_; }

  /// Integral over the region.
  double integral(const Box& region, int dim) const;

  /// Draws a point in `region` with density proportional to the field.
  /// Requires integral(region) > 0.
  Point sample(Philox& rng, const Box& region, int dim) const;

  const Box& support() const { return support_; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<double>& values() const { return values_; }
  std::string kind_name() const;

 private:
  std::size_t cell_of(const Point& x) const;

  Kind kind_ = Kind::constant;
  double value_ = 0.0;
  Box support_{};
  std::vector<int> counts_;
  std::vector<double> values_;
  double sup_ = 0.0;
};

Point uniform_in_box(Philox& rng, const Box& box, int dim);

}  // namespace contpop
