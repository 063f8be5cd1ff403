#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "contpop/bounds.hpp"
#include "contpop/errors.hpp"

using namespace contpop;

namespace {

constexpr double e = std::numbers::e;

RateNorms norms(double a_int, double a_sup, double b, double m) {
  RateNorms n;
  n.a_integral = a_int;
  n.a_sup = a_sup;
  n.b_sup = b;
  n.m_sup = m;
  return n;
}

// Classical RK4 for the triangular comparison system, used as an independent reference.
std::vector<double> rk4_moments(std::vector<double> q, double b, double a, double t, int steps) {
  const std::size_t L = q.size();
  auto rhs = [&](const std::vector<double>& s) {
    std::vector<double> d(L);
    for (std::size_t l = 0; l < L; ++l) {
      const double prev = l == 0 ? 1.0 : s[l - 1];
      d[l] = b * prev - static_cast<double>(l + 1) * a * s[l];
    }
    return d;
  };
  const double h = t / steps;
  for (int k = 0; k < steps; ++k) {
    auto k1 = rhs(q);
    std::vector<double> tmp(L);
    for (std::size_t l = 0; l < L; ++l) tmp[l] = q[l] + 0.5 * h * k1[l];
    auto k2 = rhs(tmp);
    for (std::size_t l = 0; l < L; ++l) tmp[l] = q[l] + 0.5 * h * k2[l];
    auto k3 = rhs(tmp);
    for (std::size_t l = 0; l < L; ++l) tmp[l] = q[l] + h * k3[l];
    auto k4 = rhs(tmp);
    for (std::size_t l = 0; l < L; ++l) q[l] += h / 6.0 * (k1[l] + 2 * k2[l] + 2 * k3[l] + k4[l]);
  }
  return q;
}

}  // namespace

TEST_CASE("rate norms of a model") {
  const ModelParams p(Window(1, {10.0}), CompetitionKernel::top_hat(1, 3.0, 1.0),
                      {ScalarField::box(10.0, Box{{0, 0, 0}, {0.1, 0, 0}}), ScalarField::constant(0.5)});
  const auto n = RateNorms::of(p);
  CHECK(n.a_integral == doctest::Approx(6.0));
  CHECK(n.a_sup == doctest::Approx(3.0));
  CHECK(n.b_sup == doctest::Approx(10.0));
  CHECK(n.m_sup == doctest::Approx(0.5));
}

TEST_CASE("theta norm") {
  const double kappa = 1.7;
  std::vector<std::vector<double>> k;
  for (int n = 1; n <= 8; ++n) k.push_back(std::vector<double>(5, std::pow(kappa, n)));
  const auto at_log = theta_norm(k, std::log(kappa));
  CHECK(at_log.norm == doctest::Approx(1.0));
  REQUIRE(at_log.per_order.size() == 8);
  for (double v : at_log.per_order) CHECK(v == doctest::Approx(1.0));
  const auto below = theta_norm(k, 0.0);
  CHECK(below.norm == doctest::Approx(std::pow(kappa, 8)));

  double previous = INFINITY;
  for (double theta = -1.0; theta <= 5.0; theta += 0.25) {
    const double v = theta_norm(k, theta).norm;
    CHECK(v <= previous);
    previous = v;
  }
  CHECK(theta_norm(k, 60.0).norm < 1e-20);

  std::vector<std::vector<double>> zeros{{0.0, 0.0}, {0.0}};
  CHECK(theta_norm(zeros, 0.3).norm == 0.0);
  std::vector<std::vector<double>> signed_values{{-4.0, 1.0}};
  CHECK(theta_norm(signed_values, 0.0).norm == doctest::Approx(4.0));
  CHECK_THROWS(theta_norm(std::span<const std::vector<double>>{}, 0.0));
}

TEST_CASE("operator norm bound") {
  const auto unit = norms(1, 1, 1, 1);
  const auto r = operator_norm_bound(0.0, 1.0, unit);
  CHECK(r.total == doctest::Approx(4.0 / (e * e) + (2.0 + e) / e).epsilon(1e-14));
  CHECK(r.diagonal + r.off_diagonal == doctest::Approx(r.total).epsilon(1e-14));

  const auto surg = norms(0, 0, 2.5, 0);
  for (double gap : {0.1, 1.0, 3.0}) {
    CHECK(operator_norm_bound(0.4, 0.4 + gap, surg).total ==
          doctest::Approx(2.5 * std::exp(-0.4) / (e * gap)).epsilon(1e-14));
  }
  CHECK(operator_norm_bound(0.0, 50.0, unit).total > operator_norm_bound(0.0, 10.0, unit).total);
  CHECK(operator_norm_bound(0.0, 200.0, unit).total > 1e80);
  CHECK_THROWS_AS(operator_norm_bound(1.0, 1.0, unit), DomainError);
  CHECK_THROWS_AS(operator_norm_bound(1.0, 0.5, unit), DomainError);
}

TEST_CASE("existence time and tau") {
  const auto unit = norms(1, 1, 1, 0);
  CHECK(existence_time(0.0, 1.0, unit) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-14));
  const auto surg = norms(0, 0, 3.0, 0);
  CHECK(existence_time(0.5, 2.0, surg) == doctest::Approx(1.5 * std::exp(0.5) / 3.0).epsilon(1e-14));
  for (double theta : {-2.0, 0.0, 0.7, 3.0}) {
    CHECK(existence_time(theta, theta + 1.0, unit) - tau(theta, unit) == doctest::Approx(0.0).epsilon(1e-15));
    const double direct = 1.0 / (std::exp(-theta) + e * std::exp(theta));
    CHECK(tau(theta, unit) == doctest::Approx(direct).epsilon(1e-14));
  }
  CHECK(existence_time(0.0, 1.0, norms(2, 1, 1, 0)) < existence_time(0.0, 1.0, unit));
  CHECK(existence_time(0.0, 1.0, norms(1, 1, 2, 0)) < existence_time(0.0, 1.0, unit));
  CHECK_THROWS_AS(existence_time(1.0, 1.0, unit), DomainError);
}

TEST_CASE("theta growth") {
  const auto n = norms(1, 1, 2.0, 0);
  CHECK(surgailis_theta_growth(0.3, 0.0, n) == 0.3);
  CHECK(surgailis_theta_growth(0.3, 17.0, norms(1, 1, 0, 0)) == 0.3);
  CHECK(surgailis_theta_growth(0.3, 1.5, n) == doctest::Approx(0.3 + std::log(1 + 1.5 * 2 * std::exp(-0.3))));
  CHECK(*surgailis_uniform_theta(0.0, 0.5, n) == doctest::Approx(std::log(4.0)));
  CHECK(*surgailis_uniform_theta(3.0, 0.5, n) == 3.0);
  CHECK_FALSE(surgailis_uniform_theta(0.0, 0.0, n).has_value());
}

TEST_CASE("continuation schedule") {
  const auto unit = norms(1, 1, 1, 0);
  const auto s = continuation_schedule(0.0, 0.4, unit, 500);
  REQUIRE(s.entries.size() == 500);
  CHECK(s.seed_step == doctest::Approx(0.4 * tau(0.0, unit)));
  CHECK(s.max_identity_residual <= 1e-12);
  double theta = s.theta0, sum = 0.0;
  for (const auto& entry : s.entries) {
    CHECK(entry.step > 0.0);
    CHECK(entry.theta > theta);
    sum += entry.step;
    CHECK(entry.cumulative == doctest::Approx(sum).epsilon(1e-12));
    const double theta_bar = entry.theta;
    CHECK(entry.step >= 0.4 / (e * std::exp(theta_bar) + std::exp(-s.theta0)) * (1 - 1e-12));
    theta = entry.theta;
  }

  const auto frozen = continuation_schedule(0.2, 0.3, norms(1, 1, 0, 0), 40);
  for (const auto& entry : frozen.entries) {
    CHECK(entry.theta == 0.2);
    CHECK(entry.step == doctest::Approx(frozen.entries.front().step));
  }
  CHECK(frozen.total() == doctest::Approx(40 * frozen.entries.front().step));

  const auto horizon = schedule_until(0.0, 0.4, unit, 10.0);
  REQUIRE(horizon.has_value());
  CHECK(horizon->total() > 10.0);
  CHECK(horizon->entries.size() <= kMaxScheduleSteps);
  CHECK(horizon->entries[horizon->entries.size() - 2].cumulative <= 10.0);
  CHECK(horizon->max_identity_residual <= 1e-12);
  CHECK_FALSE(schedule_until(0.0, 0.4, unit, 10.0, 5).has_value());

  CHECK_THROWS_AS(continuation_schedule(0.0, 0.0, unit, 5), DomainError);
  CHECK_THROWS_AS(continuation_schedule(0.0, 0.5, unit, 5), DomainError);
  CHECK_THROWS_AS(continuation_schedule(0.0, 0.4, unit, kMaxScheduleSteps + 1), DomainError);
}

TEST_CASE("comparison ODE") {
  CHECK(comparison_ode_bound(5, 2, 2, 0).value == 5.0);
  CHECK(comparison_ode_bound(5, 2, 2, 200).value == doctest::Approx(1.0));
  for (double t = 0; t < 10; t += 0.1) {
    const auto c = comparison_ode_bound(5, 2, 2, t);
    CHECK(c.value <= 5.0);
    CHECK(c.uniform == 5.0);
    CHECK(c.value == doctest::Approx(5 * std::exp(-2 * t) + (1 - std::exp(-2 * t))));
  }
  for (double t = 0; t < 10; t += 0.5) CHECK(comparison_ode_bound(0.2, 1.5, 3, t).value <= 2.0);
  const double te = relaxation_time(5, 2, 2, 1e-3);
  CHECK(comparison_ode_bound(5, 2, 2, te).value == doctest::Approx(1.0 + 1e-3).epsilon(1e-12));
  CHECK(relaxation_time(0.5, 2, 2, 1e-3) == 0.0);
  CHECK_THROWS_AS(comparison_ode_bound(1, 0, 1, 1), DomainError);
  CHECK_THROWS_AS(comparison_ode_bound(1, -1, 1, 1), DomainError);
}

TEST_CASE("moment bound system") {
  const std::vector<double> grid{0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0};
  {
    const std::vector<double> q0{0.4};
    const auto r = moment_bound_system(q0, 3.0, 2.0, grid, 1.0, 0.0);
    for (double v : r.trajectories[0]) CHECK(v <= std::max(0.4, 1.5) + 1e-12);
    CHECK(r.trajectories[0].back() == doctest::Approx(1.5).epsilon(1e-9));
  }
  {
    const double V = 0.8, theta = 0.3, kv = V * std::exp(theta);
    std::vector<double> q0;
    double f = 1.0;
    for (int l = 1; l <= 6; ++l) q0.push_back(std::pow(kv, l) / (f *= l));
    for (double b_cell : {0.1, 1.0, 5.0}) {
      const auto r = moment_bound_system(q0, b_cell, 0.7, grid, V, theta);
      CHECK(r.kappa_cell == doctest::Approx(std::max(kv, b_cell / 0.7)));
      for (std::size_t l = 0; l < 6; ++l) {
        CHECK(r.closed_bounds[l] == doctest::Approx(std::pow(r.kappa_cell, l + 1) / std::tgamma(l + 2.0)));
        for (double v : r.trajectories[l]) CHECK(v <= r.closed_bounds[l] * (1 + 1e-12));
      }
    }
  }
  {
    const std::vector<double> q0{1.0, 0.5, 0.2};
    const auto r = moment_bound_system(q0, 0.0, 0.9, grid, 1.0, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (std::size_t l = 0; l < 3; ++l) {
        CHECK(r.trajectories[l][k] == doctest::Approx(q0[l] * std::exp(-(l + 1.0) * 0.9 * grid[k])).epsilon(1e-12));
      }
    }
  }
  {
    // Distinct and coinciding decay rates against a numerical reference.
    const std::vector<double> q0{0.3, 2.0, 0.0, 1.1};
    const std::vector<double> t{0.0, 0.7, 3.0};
    const auto r = moment_bound_system(q0, 1.3, 0.45, t, 1.0, 0.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const auto ref = rk4_moments(q0, 1.3, 0.45, t[k], 4000);
      for (std::size_t l = 0; l < 4; ++l) CHECK(r.trajectories[l][k] == doctest::Approx(ref[l]).epsilon(1e-10));
    }
  }
  const std::vector<double> q0{1.0};
  CHECK_THROWS_AS(moment_bound_system(q0, 1.0, 0.0, grid, 1.0, 0.0), DomainError);
  const std::vector<double> negative{-1.0};
  CHECK_THROWS_AS(moment_bound_system(negative, 1.0, 1.0, grid, 1.0, 0.0), DomainError);
}

TEST_CASE("stationary density bound") {
  const Window w(1, {10.0});
  const RateField unit_b{ScalarField::constant(1.0), ScalarField::constant(0.0)};
  const ModelParams p(w, CompetitionKernel::top_hat(1, 2.0, 1.0), unit_b);
  const auto half = stationary_density_bound(p, ScalarField::constant(0.0));
  REQUIRE(half.has_value());
  CHECK(half->global == doctest::Approx(0.5));
  CHECK(half->pointwise(Point{3.0, 0, 0}) == doctest::Approx(0.5));

  const ModelParams q(w, CompetitionKernel::top_hat(1, 1.0, 1.0), unit_b);
  const auto three = stationary_density_bound(q, ScalarField::constant(3.0), 0.25);
  REQUIRE(three.has_value());
  CHECK(three->global == doctest::Approx(3.0));
  CHECK(three->pointwise(Point{1.0, 0, 0}) == doctest::Approx(3.0));
  CHECK(three->asymptotic(Point{1.0, 0, 0}) == doctest::Approx(1.25));

  const ModelParams free(w, CompetitionKernel{}, unit_b);
  CHECK_FALSE(stationary_density_bound(free, ScalarField::constant(0.0)).has_value());
}
