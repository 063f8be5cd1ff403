#pragma once

#include <optional>
#include <span>
#include <vector>

#include "contpop/field.hpp"
#include "contpop/geometry.hpp"
#include "contpop/kernel.hpp"

namespace contpop {

/// Immigration b and mortality m.
struct RateField {
  ScalarField b = ScalarField::constant(0.0);
  ScalarField m = ScalarField::constant(0.0);

  double b_sup() const { return b.sup(); }
  double m_sup() const { return m.sup(); }
};

/// Full model specification: window, kernel, rates and the initial
/// sub-Poissonian parameter theta0.
class ModelParams {
 public:
  ModelParams(Window window, CompetitionKernel kernel, RateField rates, double theta0 = 0.0);

  const Window& window() const { return window_; }
  const CompetitionKernel& kernel() const { return kernel_; }
  const RateField& rates() const { return rates_; }
  const ScalarField& b() const { return rates_.b; }
  const ScalarField& m() const { return rates_.m; }
  double theta0() const { return theta0_; }
  int dim() const { return window_.dim(); }

  /// <a>, ||a||, ||b||, ||m||.
  double a_integral() const { return kernel_.integral(); }
  double a_sup() const { return kernel_.sup(); }
  double b_sup() const { return rates_.b.sup(); }
  double m_sup() const { return rates_.m.sup(); }

 private:
  Window window_;
  CompetitionKernel kernel_;
  RateField rates_;
  double theta0_;
};

/// Finite set of particle positions with optionally cached death rates.
struct PointConfiguration {
  std::vector<Point> positions;
  std::vector<double> death_rates;  // empty, or one entry per position

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_cached_rates() const { return death_rates.size() == positions.size() && !empty(); }
};

/// m(x) + sum over y in config, y != x, of a(x - y). Exactly one occurrence of
/// x is excluded. Throws MembershipError when x is not in config.
double death_rate(const Point& x, const PointConfiguration& config, const ModelParams& params);
/// Same, addressing the member by index.
double death_rate_at(std::size_t index, std::span<const Point> config, const ModelParams& params);

/// E(eta) = sum_x m(x) + sum_x sum_{y != x} a(x - y).
double interaction_energy(std::span<const Point> eta, const ModelParams& params);

/// Recomputes every death rate from scratch (O(N^2)) into config.death_rates.
void refresh_death_rates(PointConfiguration& config, const ModelParams& params);

/// inf of a over the cube `cell` (side h), minimized on a grid of pitch h/64.
/// Returns 0 when that minimum is not positive.
double cell_infimum(const Box& cell, const CompetitionKernel& kernel);

}  // namespace contpop
