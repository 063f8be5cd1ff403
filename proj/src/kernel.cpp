#include "contpop/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "contpop/errors.hpp"

namespace contpop {
namespace {

constexpr double kTailMass = 1e-8;

void check_dim(int dim) {
  if (dim < 1 || dim > 3) throw DomainError("kernel dimension must be 1, 2 or 3");
}

void check_params(double amplitude, double range) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw DomainError("kernel amplitude must be finite and >= 0");
  }
  if (!(range > 0.0) || !std::isfinite(range)) throw DomainError("kernel range must be > 0");
}

}  // namespace

double unit_sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw DomainError("dimension must be 1, 2 or 3");
  }
}

double ball_volume(int dim, double r) {
  return unit_sphere_area(dim) * std::pow(r, dim) / dim;
}

CompetitionKernel::CompetitionKernel() = default;

CompetitionKernel CompetitionKernel::gaussian(int dim, double amplitude, double range,
                                              double r_cut) {
  check_dim(dim);
  check_params(amplitude, range);
  CompetitionKernel k;
  k.kind_ = KernelKind::gaussian;
  k.dim_ = dim;
  k.amplitude_ = amplitude;
  k.range_ = range;
  // |X| for X ~ N(0, s^2 I_d) has P(|X| > r) = Q(d/2, r^2 / (2 s^2)).
  k.r_cut_ = r_cut > 0.0
                 ? r_cut
                 : range * std::sqrt(2.0 * boost::math::gamma_q_inv(0.5 * dim, kTailMass));
  k.finish();
  return k;
}

CompetitionKernel CompetitionKernel::exponential(int dim, double amplitude, double range,
                                                 double r_cut) {
  check_dim(dim);
  check_params(amplitude, range);
  CompetitionKernel k;
  k.kind_ = KernelKind::exponential;
  k.dim_ = dim;
  k.amplitude_ = amplitude;
  k.range_ = range;
  // Radial mass density r^{d-1} e^{-r/s} is a Gamma(d, s) shape.
  k.r_cut_ = r_cut > 0.0 ? r_cut
                         : range * boost::math::gamma_q_inv(static_cast<double>(dim), kTailMass);
  k.finish();
  return k;
}

CompetitionKernel CompetitionKernel::top_hat(int dim, double amplitude, double radius) {
  check_dim(dim);
  check_params(amplitude, radius);
  CompetitionKernel k;
  k.kind_ = KernelKind::top_hat;
  k.dim_ = dim;
  k.amplitude_ = amplitude;
  k.range_ = radius;
  k.r_cut_ = radius;
  k.finish();
  return k;
}

CompetitionKernel CompetitionKernel::tabulated(int dim, double spacing, std::vector<double> values) {
  check_dim(dim);
  if (!(spacing > 0.0)) throw DomainError("tabulated kernel spacing must be > 0");
  if (values.size() < 2) throw DomainError("tabulated kernel needs at least two values");
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("kernel values must be >= 0");
  }
  CompetitionKernel k;
  k.kind_ = KernelKind::tabulated;
  k.dim_ = dim;
  k.spacing_ = spacing;
  k.table_ = std::move(values);
  k.amplitude_ = k.table_.front();
  k.range_ = spacing * static_cast<double>(k.table_.size() - 1);
  k.r_cut_ = k.range_;
  k.finish();
  return k;
}

double CompetitionKernel::at_distance(double r) const {
  if (zero_ || r > r_cut_) return 0.0;
  switch (kind_) {
    case KernelKind::gaussian:
      return amplitude_ * std::exp(-0.5 * (r * r) / (range_ * range_));
    case KernelKind::exponential:
      return amplitude_ * std::exp(-r / range_);
    case KernelKind::top_hat:
      return amplitude_;
    case KernelKind::tabulated: {
      const double u = r / spacing_;
      const auto i = std::min(static_cast<std::size_t>(u), table_.size() - 2);
      const double f = u - static_cast<double>(i);
      return (1.0 - f) * table_[i] + f * table_[i + 1];
    }
  }
  return 0.0;
}

void CompetitionKernel::finish() {
  const bool all_zero = kind_ == KernelKind::tabulated
                            ? std::all_of(table_.begin(), table_.end(),
                                          [](double v) { return v == 0.0; })
                            : amplitude_ == 0.0;
  zero_ = all_zero;
  if (zero_) {
    r_cut_ = 0.0;
    integral_ = 0.0;
    sup_ = 0.0;
    return;
  }
  const double area = unit_sphere_area(dim_);
  switch (kind_) {
    case KernelKind::top_hat:
      integral_ = amplitude_ * ball_volume(dim_, range_);
      sup_ = amplitude_;
      break;
    case KernelKind::tabulated: {
      // Trapezoid rule on the table's own grid.
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < table_.size(); ++i) {
        const double r0 = spacing_ * static_cast<double>(i);
        const double r1 = r0 + spacing_;
        s += 0.5 * spacing_ *
             (table_[i] * std::pow(r0, dim_ - 1) + table_[i + 1] * std::pow(r1, dim_ - 1));
      }
      integral_ = area * s;
      sup_ = *std::max_element(table_.begin(), table_.end());
      break;
    }
    default: {
      const int d = dim_;
      auto radial = [this, d](double r) { return at_distance(r) * std::pow(r, d - 1); };
      double err = 0.0;
      const double s = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          radial, 0.0, r_cut_, 15, 1e-12, &err);
      integral_ = area * s;
      sup_ = amplitude_;
      break;
    }
  }
}

std::string CompetitionKernel::kind_name() const {
  switch (kind_) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::exponential: return "exponential";
    case KernelKind::top_hat: return "top-hat";
    case KernelKind::tabulated: return "tabulated";
  }
  return "unknown";
}

}  // namespace contpop
