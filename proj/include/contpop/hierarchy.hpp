#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "contpop/field.hpp"
#include "contpop/model.hpp"

namespace contpop {

/// Rule expressing the unresolved k^(3) through k^(1), k^(2).
enum class Closure {
  zero_third_cumulant,  // sum over 3 pairings of k2 k1, minus 2 k1^3
  kirkwood,             // k2 k2 k2 / k1^3, denominator floored at 1e-12
  mean_field,           // k2(x1, x2) k1(y)
};

Closure parse_closure(const std::string& name);
std::string closure_name(Closure c);

/// k^(3)(x1, x2, x3) from the closure, given the three pair values
/// k2_12, k2_13, k2_23 and the densities at the three points.
double close_third(Closure closure, double k2_12, double k2_13, double k2_23, double k1_1,
                   double k1_2, double k1_3);

inline constexpr double kKirkwoodFloor = 1e-12;

enum class HierarchyMode {
  /// Homogeneous b, m on a periodic window: k^(1) scalar, k^(2) on the
  /// periodic separation grid (any dimension).
  homogeneous,
  /// d = 1 only: k^(1)(x) on a grid, k^(2)(x1, x2) on the product grid.
  full_grid,
};

struct HierarchyOptions {
  HierarchyMode mode = HierarchyMode::homogeneous;
  int points_per_axis = 256;
  int n_max = 2;
  Closure closure = Closure::zero_third_cumulant;
};

struct HierarchyState {
  double t = 0.0;
  std::vector<double> k1;
  /// Empty when n_max = 1 (k^(2) is then k1 k1).
  std::vector<double> k2;
};

struct HierarchyTrajectory {
  std::vector<HierarchyState> snapshots;
  std::size_t steps = 0;
  std::size_t clip_events = 0;
  double clip_mass = 0.0;
};

/// Truncated correlation-function hierarchy integrated with classic RK4.
class HierarchySolver {
 public:
  HierarchySolver(const ModelParams& params, HierarchyOptions options);
  ~HierarchySolver();
  HierarchySolver(const HierarchySolver&) = delete;
  HierarchySolver& operator=(const HierarchySolver&) = delete;

  const HierarchyOptions& options() const { return options_; }
  int points_per_axis() const { return n_; }
  /// Grid points for k^(1) (one entry in homogeneous mode).
  std::size_t k1_size() const;
  /// Grid points for k^(2).
  std::size_t k2_size() const;
  /// Separation vector of k^(2) entry j (homogeneous mode).
  Point separation(std::size_t j) const;
  /// Position of k^(1) entry i (full-grid mode).
  double position(std::size_t i) const;
  /// Quadrature weight of one grid cell.
  double cell_volume() const { return cell_volume_; }
  /// Discrete kernel integral used by the quadrature.
  double kernel_mass() const;

  /// State of a Poisson initial condition with density rho0.
  HierarchyState poisson_state(const ScalarField& rho0) const;

  /// b - m k1 - integral of a(x - y) k2(x, y) dy.
  std::vector<double> rhs_order1(const HierarchyState& s) const;
  /// -[m1 + m2 + 2 a(x1 - x2)] k2 - integral [a(y - x1) + a(y - x2)] k3 dy
  ///   + b(x1) k1(x2) + b(x2) k1(x1), with k3 from the closure.
  std::vector<double> rhs_order2(const HierarchyState& s) const;

  /// Left side of the step-size guard: dt (||m|| + 2 ||a|| + <a> sup k1).
  double stiffness(const HierarchyState& s) const;

  /// Integrates to t_end with fixed step dt, recording the states at the
  /// requested times (each <= t_end; t_end itself is always recorded).
  /// Throws NumericalError on guard violation, non-finite values or when
  /// clipped mass exceeds 1e-3 of the total mass.
  HierarchyTrajectory integrate(HierarchyState state0, double t_end, double dt,
                                std::span<const double> snapshot_times = {}) const;

 private:
  struct Fft;

  void rhs(const HierarchyState& s, std::vector<double>& d1, std::vector<double>& d2) const;
  void rhs_homogeneous(const HierarchyState& s, std::vector<double>& d1,
                       std::vector<double>& d2) const;
  void rhs_full(const HierarchyState& s, std::vector<double>& d1, std::vector<double>& d2) const;
  double mass(const HierarchyState& s) const;

  const ModelParams* params_;
  HierarchyOptions options_;
  int dim_;
  int n_;
  double cell_volume_ = 0.0;
  double spacing_ = 0.0;
  double origin_ = 0.0;
  std::vector<double> a_grid_;   // homogeneous: a at each separation; full: n x n matrix
  std::vector<double> b_grid_;   // full: b(x_i)
  std::vector<double> m_grid_;   // full: m(x_i)
  std::unique_ptr<Fft> fft_;
};

}  // namespace contpop
