#include "contpop/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "contpop/errors.hpp"

namespace contpop {

ModelParams::ModelParams(Window window, CompetitionKernel kernel, RateField rates, double theta0)
    : window_(std::move(window)),
      kernel_(std::move(kernel)),
      rates_(std::move(rates)),
      theta0_(theta0) {
  if (!kernel_.is_zero() && kernel_.dim() != window_.dim()) {
    throw DomainError("kernel and window dimensions differ");
  }
  if (window_.periodic() && kernel_.r_cut() > 0.5 * window_.min_side()) {
    throw DomainError("kernel cutoff " + std::to_string(kernel_.r_cut()) +
                      " exceeds half the smallest periodic window side");
  }
  if (!window_.periodic() && window_.buffer_width() < kernel_.r_cut()) {
    throw DomainError("buffer width is smaller than the kernel cutoff");
  }
  if (!std::isfinite(theta0_)) throw DomainError("theta0 must be finite");
}

double death_rate_at(std::size_t index, std::span<const Point> config, const ModelParams& params) {
  const Point& x = config[index];
  double rate = params.m().value(x);
  const auto& a = params.kernel();
  if (a.is_zero()) return rate;
  const auto& w = params.window();
  for (std::size_t j = 0; j < config.size(); ++j) {
    if (j == index) continue;
    rate += a(w.displacement(config[j], x));
  }
  return rate;
}

double death_rate(const Point& x, const PointConfiguration& config, const ModelParams& params) {
  const auto it = std::find(config.positions.begin(), config.positions.end(), x);
  if (it == config.positions.end()) throw MembershipError("point is not a member of the configuration");
  return death_rate_at(static_cast<std::size_t>(it - config.positions.begin()), config.positions,
                       params);
}

double interaction_energy(std::span<const Point> eta, const ModelParams& params) {
  double e = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) e += death_rate_at(i, eta, params);
  return e;
}

void refresh_death_rates(PointConfiguration& config, const ModelParams& params) {
  config.death_rates.resize(config.size());
  for (std::size_t i = 0; i < config.size(); ++i) {
    config.death_rates[i] = death_rate_at(i, config.positions, params);
  }
}

double cell_infimum(const Box& cell, const CompetitionKernel& kernel) {
  if (kernel.is_zero()) return 0.0;
  const int dim = kernel.dim();
  constexpr int kSteps = 64;
  std::array<int, 3> idx{};
  double lo = kernel.sup();
  while (true) {
    Point p{};
    for (int i = 0; i < dim; ++i) {
      const double h = cell.upper[i] - cell.lower[i];
      p[i] = cell.lower[i] + h * idx[i] / kSteps;
    }
    lo = std::min(lo, kernel(p));
    int axis = dim - 1;
    while (axis >= 0 && ++idx[axis] > kSteps) {
      idx[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return lo > 0.0 ? lo : 0.0;
}

}  // namespace contpop
