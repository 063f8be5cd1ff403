#pragma once

#include <functional>
#include <span>
#include <vector>

#include "contpop/field.hpp"
#include "contpop/geometry.hpp"
#include "contpop/model.hpp"

namespace contpop {

/// Correlation function of the initial state, evaluated on a point list
/// (symmetric in its arguments, k(empty) = 1).
using CorrelationEvaluator = std::function<double(std::span<const Point>)>;

/// k0(eta) = prod rho0(x): the correlation function of a Poisson state.
CorrelationEvaluator poisson_correlation(ScalarField rho0);

/// Exact flow of the competition-free model at time t:
///   psi_t(x) = exp(-m(x) t)
///   phi_t(x) = (1 - exp(-m(x) t)) b(x) / m(x), or b(x) t where m(x) = 0.
class SurgailisFlow {
 public:
  SurgailisFlow(RateField rates, double t);

  double time() const { return t_; }
  const RateField& rates() const { return rates_; }

  double psi(const Point& x) const;
  double phi(const Point& x) const;

 private:
  RateField rates_;
  double t_;
};

/// Mortality below which phi uses the m = 0 branch b t.
inline constexpr double kZeroMortality = 1e-12;

/// phi_t for scalar rates (the same formula SurgailisFlow::phi applies pointwise).
double surgailis_phi(double b, double m, double t);

/// k_t(eta) = sum over xi subset eta of e(xi; phi_t) e(eta \ xi; psi_t) k0(eta \ xi).
double propagate_correlation(std::span<const Point> eta, const CorrelationEvaluator& k0,
                             const SurgailisFlow& flow);

/// v_t(eta): the competition-free propagator used as an upper bound for
/// correlation functions of the model with competition.
double domination_bound(std::span<const Point> eta, const CorrelationEvaluator& k0,
                        const SurgailisFlow& flow);

/// rho_t = psi_t rho0 + phi_t at each requested point.
std::vector<double> poisson_density_flow(const ScalarField& rho0, const SurgailisFlow& flow,
                                         std::span<const Point> points);

/// Cell centers of a uniform grid with n points per axis over `region`.
std::vector<Point> cell_centers(const Box& region, int dim, int points_per_axis);

/// mu_t(N_region) = integral of k_t^(1) over the region (midpoint rule).
double expected_count(const Box& region, int dim, const SurgailisFlow& flow,
                      const ScalarField& rho0, int points_per_axis = 1024);

/// Same, from the initial mean count alone. Requires m constant on the
/// region (psi_t uniform); with m = 0 this is mu0 + t * integral of b.
double expected_count(const Box& region, int dim, const SurgailisFlow& flow, double mu0_mean,
                      int points_per_axis = 1024);

/// Test field theta with values in (-1, 0], supported in `support`.
struct TestField {
  Box support;
  std::function<double(const Point&)> values;
};

/// Bogoliubov functional of the initial state, B0(theta).
using BogoliubovEvaluator = std::function<double(const TestField&)>;

/// B0 of the Poisson state with density rho0: exp(integral of theta rho0).
BogoliubovEvaluator poisson_bogoliubov(ScalarField rho0, int dim, int points_per_axis = 1024);

/// B_t(theta) = exp(integral of theta phi_t) * B0(theta psi_t).
/// Throws DomainError when theta leaves (-1, 0] on the quadrature grid.
double bogoliubov_functional(const TestField& theta, int dim, const SurgailisFlow& flow,
                             const BogoliubovEvaluator& b0, int points_per_axis = 1024);

}  // namespace contpop
