#pragma once

#include <string>
#include <vector>

#include "contpop/geometry.hpp"

namespace contpop {

enum class KernelKind { gaussian, exponential, top_hat, tabulated };

/// Radially symmetric competition kernel a(x) = profile(|x|), truncated at r_cut.
///
/// Presets:
///   gaussian     A exp(-r^2 / (2 s^2))
///   exponential  A exp(-r / s)
///   top_hat      A for r <= s
///   tabulated    linear interpolation of a radial table with uniform spacing
///
/// For the smooth presets the default cutoff leaves a tail mass below 1e-8
/// of the untruncated integral. Amplitude 0 gives the competition-free model.
class CompetitionKernel {
 public:
  /// Zero kernel (no competition).
  CompetitionKernel();

  static CompetitionKernel gaussian(int dim, double amplitude, double range, double r_cut = -1.0);
  static CompetitionKernel exponential(int dim, double amplitude, double range,
                                       double r_cut = -1.0);
  static CompetitionKernel top_hat(int dim, double amplitude, double radius);
  static CompetitionKernel tabulated(int dim, double spacing, std::vector<double> values);

  KernelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double amplitude() const { return amplitude_; }
  double range() const { return range_; }
  double r_cut() const { return r_cut_; }
  const std::vector<double>& table() const { return table_; }
  double table_spacing() const { return spacing_; }

  /// True when a vanishes identically.
  bool is_zero() const { return zero_; }
  /// Top-hat kernels are discontinuous; callers may want to warn.
  bool continuous() const { return kind_ != KernelKind::top_hat; }

  double at_distance(double r) const;
  double operator()(const Point& displacement) const {
    return at_distance(norm(displacement, dim_));
  }

  /// Integral of the truncated kernel over R^d.
  double integral() const { return integral_; }
  /// Supremum of the kernel.
  double sup() const { return sup_; }
  double at_origin() const { return at_distance(0.0); }

  std::string kind_name() const;

 private:
  void finish();

  KernelKind kind_ = KernelKind::gaussian;
  int dim_ = 1;
  double amplitude_ = 0.0;
  double range_ = 1.0;
  double r_cut_ = 0.0;
  double spacing_ = 0.0;
  std::vector<double> table_;
  bool zero_ = true;
  double integral_ = 0.0;
  double sup_ = 0.0;
};

/// Surface area of the unit sphere in R^d.
double unit_sphere_area(int dim);
/// Volume of the ball of radius r in R^d.
double ball_volume(int dim, double r);

}  // namespace contpop
