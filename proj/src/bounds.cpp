#include "contpop/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "contpop/errors.hpp"

namespace contpop {

namespace {
constexpr double kE = std::numbers::e;
}

RateNorms RateNorms::of(const ModelParams& params) {
  return {params.a_integral(), params.a_sup(), params.b_sup(), params.m_sup()};
}

ThetaNormReport theta_norm(std::span<const std::vector<double>> correlations, double theta) {
  if (correlations.empty()) throw DomainError("theta_norm needs at least order 1");
  ThetaNormReport r;
  r.theta = theta;
  for (std::size_t i = 0; i < correlations.size(); ++i) {
    double sup = 0.0;
    for (double v : correlations[i]) sup = std::max(sup, std::abs(v));
    const double n = static_cast<double>(i + 1);
    const double weighted = sup == 0.0 ? 0.0 : sup * std::exp(-theta * n);
    r.per_order.push_back(weighted);
    r.norm = std::max(r.norm, weighted);
  }
  return r;
}

OperatorNormBound operator_norm_bound(double theta, double theta_prime, const RateNorms& norms) {
  if (!(theta_prime > theta)) throw DomainError("operator_norm_bound needs theta' > theta");
  const double d = theta_prime - theta;
  OperatorNormBound out;
  out.diagonal = 4.0 * norms.a_sup / (kE * kE * d * d) + norms.m_sup / (kE * d);
  out.off_diagonal =
      (norms.b_sup * std::exp(-theta) + norms.a_integral * std::exp(theta_prime)) / (kE * d);
  out.total = out.diagonal + out.off_diagonal;
  return out;
}

double existence_time(double theta, double theta_prime, const RateNorms& norms) {
  if (!(theta_prime > theta)) throw DomainError("existence_time needs theta' > theta");
  return (theta_prime - theta) /
         (norms.b_sup * std::exp(-theta) + norms.a_integral * std::exp(theta_prime));
}

double tau(double theta, const RateNorms& norms) {
  return 1.0 / (norms.b_sup * std::exp(-theta) + kE * norms.a_integral * std::exp(theta));
}

double surgailis_theta_growth(double theta0, double t, const RateNorms& norms) {
  if (!(t >= 0.0)) throw DomainError("time must be >= 0");
  return theta0 + std::log1p(t * norms.b_sup * std::exp(-theta0));
}

std::optional<double> surgailis_uniform_theta(double theta0, double m_star, const RateNorms& norms) {
  if (!(m_star > 0.0)) return std::nullopt;
  if (norms.b_sup == 0.0) return theta0;
  return std::max(theta0, std::log(norms.b_sup / m_star));
}

namespace {

void check_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa < 0.5)) throw DomainError("kappa must lie in (0, 1/2)");
}

// Advances the recursion by one step given (T_{n-1}, theta_{n-1}).
ScheduleEntry next_entry(const ScheduleEntry& prev, double kappa, const RateNorms& norms) {
  ScheduleEntry e;
  e.n = prev.n + 1;
  e.step = kappa * tau(prev.theta, norms);
  e.theta = prev.theta + std::log1p(prev.step * norms.b_sup * std::exp(-prev.theta));
  e.cumulative = prev.cumulative + e.step;
  if (norms.b_sup > 0.0) {
    const double rebuilt = (std::exp(e.theta) - std::exp(prev.theta)) / norms.b_sup;
    e.identity_residual = std::abs(prev.step - rebuilt);
  }
  return e;
}

}  // namespace

Schedule continuation_schedule(double theta0, double kappa, const RateNorms& norms,
                               std::size_t steps) {
  check_kappa(kappa);
  if (steps > kMaxScheduleSteps) throw DomainError("schedule length capped at 10^6");
  Schedule s;
  s.kappa = kappa;
  s.theta0 = theta0;
  s.seed_step = kappa * tau(theta0, norms);
  ScheduleEntry prev{0, s.seed_step, theta0, 0.0, 0.0};
  s.entries.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const ScheduleEntry e = next_entry(prev, kappa, norms);
    s.max_identity_residual = std::max(s.max_identity_residual, e.identity_residual);
    s.entries.push_back(e);
    prev = e;
  }
  return s;
}

std::optional<Schedule> schedule_until(double theta0, double kappa, const RateNorms& norms,
                                       double horizon, std::size_t cap) {
  check_kappa(kappa);
  Schedule s;
  s.kappa = kappa;
  s.theta0 = theta0;
  s.seed_step = kappa * tau(theta0, norms);
  ScheduleEntry prev{0, s.seed_step, theta0, 0.0, 0.0};
  for (std::size_t i = 0; i < std::min(cap, kMaxScheduleSteps); ++i) {
    const ScheduleEntry e = next_entry(prev, kappa, norms);
    s.max_identity_residual = std::max(s.max_identity_residual, e.identity_residual);
    s.entries.push_back(e);
    if (e.cumulative > horizon) return s;
    prev = e;
  }
  return std::nullopt;
}

ComparisonBound comparison_ode_bound(double u0, double a, double b, double t) {
  if (!(a > 0.0)) throw DomainError("comparison ODE needs a > 0");
  if (!(b >= 0.0) || !(u0 >= 0.0)) throw DomainError("comparison ODE needs b >= 0 and u0 >= 0");
  const double level = b / a;
  ComparisonBound out;
  out.value = level + (u0 - level) * std::exp(-a * t);
  out.uniform = std::max(u0, level);
  return out;
}

double relaxation_time(double u0, double a, double b, double eps) {
  if (!(a > 0.0)) throw DomainError("comparison ODE needs a > 0");
  if (!(eps > 0.0)) throw DomainError("eps must be > 0");
  const double excess = u0 - b / a;
  if (excess <= eps) return 0.0;
  return std::log(excess / eps) / a;
}

MomentBoundSystem moment_bound_system(std::span<const double> q0, double b_cell, double a_cell,
                                      std::span<const double> t_grid, double cell_volume,
                                      double theta) {
  if (!(a_cell > 0.0)) throw DomainError("moment bound system needs a_cell > 0");
  if (!(b_cell >= 0.0)) throw DomainError("moment bound system needs b_cell >= 0");
  for (double v : q0) {
    if (!(v >= 0.0)) throw DomainError("initial factorial moments must be >= 0");
  }
  const std::size_t L = q0.size();
  // q_l(t) = sum_{j=0}^{l} c[l][j] exp(-j a t); q_0 = 1.
  std::vector<std::vector<double>> c(L + 1);
  c[0] = {1.0};
  for (std::size_t l = 1; l <= L; ++l) {
    c[l].assign(l + 1, 0.0);
    double at_zero = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      // Particular solution of q' + l a q = b c[l-1][j] e^{-j a t}.
      c[l][j] = b_cell * c[l - 1][j] / (static_cast<double>(l - j) * a_cell);
      at_zero += c[l][j];
    }
    c[l][l] = q0[l - 1] - at_zero;
  }
  MomentBoundSystem out;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.trajectories.assign(L, std::vector<double>(t_grid.size(), 0.0));
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    for (std::size_t l = 1; l <= L; ++l) {
      double v = 0.0;
      for (std::size_t j = 0; j <= l; ++j) {
        v += c[l][j] * std::exp(-static_cast<double>(j) * a_cell * t);
      }
      out.trajectories[l - 1][k] = v;
    }
  }
  out.kappa_cell = std::max(cell_volume * std::exp(theta), b_cell / a_cell);
  double fact = 1.0;
  for (std::size_t l = 1; l <= L; ++l) {
    fact *= static_cast<double>(l);
    out.closed_bounds.push_back(std::pow(out.kappa_cell, static_cast<double>(l)) / fact);
  }
  return out;
}

std::optional<DensityBound> stationary_density_bound(const ModelParams& params,
                                                     const ScalarField& k0, double eps) {
  const double a0 = params.kernel().at_origin();
  if (!(a0 > 0.0)) return std::nullopt;
  const ScalarField b = params.b();
  DensityBound out;
  out.pointwise = [b, k0, a0](const Point& x) { return std::max(k0.value(x), b.value(x) / a0); };
  out.global = std::max(k0.sup(), b.sup() / a0);
  out.asymptotic = [b, a0, eps](const Point& x) { return b.value(x) / a0 + eps; };
  return out;
}

}  // namespace contpop
