#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "contpop/field.hpp"
#include "contpop/model.hpp"

namespace contpop {

/// Norms of the rates and kernel entering the analytic estimates.
struct RateNorms {
  double a_integral = 0.0;  // <a>
  double a_sup = 0.0;       // ||a||
  double b_sup = 0.0;       // ||b||
  double m_sup = 0.0;       // ||m||

  static RateNorms of(const ModelParams& params);
};

/// Finite-order surrogate of the theta-norm sup_eta |k(eta)| e^{-theta |eta|}.
struct ThetaNormReport {
  double theta = 0.0;
  /// per_order[n-1] = sup |k^(n)| e^{-theta n}
  std::vector<double> per_order;
  double norm = 0.0;
};

/// correlations[n-1] holds samples of k^(n). Requires order 1.
ThetaNormReport theta_norm(std::span<const std::vector<double>> correlations, double theta);

/// Operator-norm estimate for the hierarchy generator from K_theta into
/// K_theta', split into the diagonal (A) and off-diagonal (B) parts.
struct OperatorNormBound {
  double total = 0.0;
  double diagonal = 0.0;      // 4||a|| / (e^2 d^2) + ||m|| / (e d)
  double off_diagonal = 0.0;  // (||b|| e^-theta + <a> e^theta') / (e d)
};
OperatorNormBound operator_norm_bound(double theta, double theta_prime, const RateNorms& norms);

/// T(theta', theta) = (theta' - theta) / (||b|| e^-theta + <a> e^theta').
double existence_time(double theta, double theta_prime, const RateNorms& norms);
/// tau(theta) = [||b|| e^-theta + e <a> e^theta]^-1 = T(theta + 1, theta).
double tau(double theta, const RateNorms& norms);

/// theta_T = theta0 + log(1 + T ||b|| e^-theta0).
double surgailis_theta_growth(double theta0, double t, const RateNorms& norms);

/// Uniform theta ball max{theta0, log(||b|| / m_*)} of the competition-free
/// flow when m >= m_* > 0; empty when m_* <= 0.
std::optional<double> surgailis_uniform_theta(double theta0, double m_star, const RateNorms& norms);

/// Continuation schedule: T_n = kappa tau(theta_{n-1}),
/// theta_n = theta_{n-1} + log(1 + T_{n-1} ||b|| e^{-theta_{n-1}}),
/// seeded with theta_0 and T_0 = kappa tau(theta_0).
struct ScheduleEntry {
  std::size_t n = 0;
  double step = 0.0;        // T_n
  double theta = 0.0;       // theta_{T_n}
  double cumulative = 0.0;  // sum_{k <= n} T_k
  double identity_residual = 0.0;
};

struct Schedule {
  double kappa = 0.0;
  double theta0 = 0.0;
  double seed_step = 0.0;  // T_0
  std::vector<ScheduleEntry> entries;
  /// max_n |T_{n-1} - (e^{theta_n} - e^{theta_{n-1}}) / ||b|| | (0 when ||b|| = 0)
  double max_identity_residual = 0.0;
  double total() const { return entries.empty() ? 0.0 : entries.back().cumulative; }
};

inline constexpr std::size_t kMaxScheduleSteps = 1'000'000;
inline constexpr double kDefaultKappa = 0.4;

Schedule continuation_schedule(double theta0, double kappa, const RateNorms& norms, std::size_t steps);

/// Smallest schedule whose partial sum exceeds `horizon`; empty optional
/// when kMaxScheduleSteps iterations do not suffice.
std::optional<Schedule> schedule_until(double theta0, double kappa, const RateNorms& norms,
                                       double horizon, std::size_t cap = kMaxScheduleSteps);

/// Explicit solution of u' = b - a u.
struct ComparisonBound {
  double value = 0.0;
  double uniform = 0.0;  // max{u0, b/a}
};
ComparisonBound comparison_ode_bound(double u0, double a, double b, double t);
/// Earliest time after which u(t) <= b/a + eps (0 if already there).
double relaxation_time(double u0, double a, double b, double eps);

/// Comparison system dq_l/dt = b q_{l-1} - l a q_l, q_0 = 1, solved exactly.
struct MomentBoundSystem {
  std::vector<double> times;
  /// trajectories[l-1][k] = q_l(times[k])
  std::vector<std::vector<double>> trajectories;
  double kappa_cell = 0.0;
  /// closed_bounds[l-1] = kappa_cell^l / l!
  std::vector<double> closed_bounds;
};

/// cell_volume and theta enter kappa_cell = max{V e^theta, b_cell / a_cell}.
MomentBoundSystem moment_bound_system(std::span<const double> q0, double b_cell, double a_cell,
                                      std::span<const double> t_grid, double cell_volume,
                                      double theta);

/// x -> max{k0(x), b(x)/a(0)}, its global version max{||k0||, ||b||/a(0)}
/// and the asymptotic level b(x)/a(0) + eps.
struct DensityBound {
  std::function<double(const Point&)> pointwise;
  double global = 0.0;
  std::function<double(const Point&)> asymptotic;
};
/// Empty when a(0) = 0 (no effective mortality).
std::optional<DensityBound> stationary_density_bound(const ModelParams& params,
                                                     const ScalarField& k0, double eps = 0.0);

}  // namespace contpop
