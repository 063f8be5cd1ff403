#include "contpop/surgailis.hpp"

#include <cmath>

#include "contpop/combinatorics.hpp"
#include "contpop/errors.hpp"

namespace contpop {

CorrelationEvaluator poisson_correlation(ScalarField rho0) {
  return [rho0 = std::move(rho0)](std::span<const Point> eta) {
    return product_functional(eta, [&](const Point& x) { return rho0.value(x); });
  };
}

double surgailis_phi(double b, double m, double t) {
  if (m < kZeroMortality) return b * t;
  // expm1 keeps full relative accuracy as m t -> 0.
  return -std::expm1(-m * t) * b / m;
}

SurgailisFlow::SurgailisFlow(RateField rates, double t) : rates_(std::move(rates)), t_(t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("flow time must be finite and >= 0");
}

double SurgailisFlow::psi(const Point& x) const { return std::exp(-rates_.m.value(x) * t_); }

double SurgailisFlow::phi(const Point& x) const {
  return surgailis_phi(rates_.b.value(x), rates_.m.value(x), t_);
}

double propagate_correlation(std::span<const Point> eta, const CorrelationEvaluator& k0,
                             const SurgailisFlow& flow) {
  double total = 0.0;
  for_each_split(eta, [&](std::span<const Point> xi, std::span<const Point> rest) {
    const double immigrants = product_functional(xi, [&](const Point& x) { return flow.phi(x); });
    if (immigrants == 0.0) return;
    const double survivors = product_functional(rest, [&](const Point& x) { return flow.psi(x); });
    total += immigrants * survivors * k0(rest);
  });
  return total;
}

double domination_bound(std::span<const Point> eta, const CorrelationEvaluator& k0,
                        const SurgailisFlow& flow) {
  return propagate_correlation(eta, k0, flow);
}

std::vector<double> poisson_density_flow(const ScalarField& rho0, const SurgailisFlow& flow,
                                         std::span<const Point> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    const double r0 = rho0.value(x);
    if (!(r0 >= 0.0)) throw DomainError("initial density must be >= 0");
    out.push_back(flow.psi(x) * r0 + flow.phi(x));
  }
  return out;
}

std::vector<Point> cell_centers(const Box& region, int dim, int points_per_axis) {
  if (points_per_axis < 1) throw DomainError("quadrature needs at least one point per axis");
  std::vector<Point> pts;
  std::array<int, 3> idx{};
  while (true) {
    Point p{};
    for (int i = 0; i < dim; ++i) {
      const double h = (region.upper[i] - region.lower[i]) / points_per_axis;
      p[i] = region.lower[i] + h * (idx[i] + 0.5);
    }
    pts.push_back(p);
    int axis = dim - 1;
    while (axis >= 0 && ++idx[axis] >= points_per_axis) {
      idx[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return pts;
}

namespace {

// Midpoint-rule integral of f over the region.
template <class F>
double integrate_box(const Box& region, int dim, int n, F&& f) {
  const auto pts = cell_centers(region, dim, n);
  double s = 0.0;
  for (const auto& p : pts) s += f(p);
  return s * region.volume(dim) / static_cast<double>(pts.size());
}

}  // namespace

double expected_count(const Box& region, int dim, const SurgailisFlow& flow,
                      const ScalarField& rho0, int points_per_axis) {
  return integrate_box(region, dim, points_per_axis,
                       [&](const Point& x) { return flow.psi(x) * rho0.value(x) + flow.phi(x); });
}

double expected_count(const Box& region, int dim, const SurgailisFlow& flow, double mu0_mean,
                      int points_per_axis) {
  const auto& m = flow.rates().m;
  const double m_lo = m.inf_over(region, dim);
  double m_hi = m_lo;
  if (!m.is_constant()) {
    for (const auto& p : cell_centers(region, dim, points_per_axis)) {
      m_hi = std::max(m_hi, m.value(p));
    }
  }
  if (m_hi != m_lo) {
    throw DomainError("expected_count from a mean count needs m constant on the region");
  }
  const double survive = std::exp(-m_lo * flow.time());
  double immigrated = 0.0;
  if (m_lo == 0.0) {
    immigrated = flow.time() * flow.rates().b.integral(region, dim);
  } else {
    immigrated = integrate_box(region, dim, points_per_axis,
                               [&](const Point& x) { return flow.phi(x); });
  }
  return survive * mu0_mean + immigrated;
}

BogoliubovEvaluator poisson_bogoliubov(ScalarField rho0, int dim, int points_per_axis) {
  return [rho0 = std::move(rho0), dim, points_per_axis](const TestField& theta) {
    return std::exp(integrate_box(theta.support, dim, points_per_axis, [&](const Point& x) {
      return theta.values(x) * rho0.value(x);
    }));
  };
}

double bogoliubov_functional(const TestField& theta, int dim, const SurgailisFlow& flow,
                             const BogoliubovEvaluator& b0, int points_per_axis) {
  for (const auto& p : cell_centers(theta.support, dim, points_per_axis)) {
    const double v = theta.values(p);
    if (!(v > -1.0 && v <= 0.0)) throw DomainError("test field must take values in (-1, 0]");
  }
  const double drift = integrate_box(theta.support, dim, points_per_axis,
                                     [&](const Point& x) { return theta.values(x) * flow.phi(x); });
  TestField damped{theta.support,
                   [&theta, &flow](const Point& x) { return theta.values(x) * flow.psi(x); }};
  return std::exp(drift) * b0(damped);
}

}  // namespace contpop
