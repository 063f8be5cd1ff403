#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "contpop/field.hpp"
#include "contpop/model.hpp"
#include "contpop/rng.hpp"

namespace contpop {

/// Initial state of a replica.
struct InitialCondition {
  enum class Kind { empty, poisson, explicit_list };

  Kind kind = Kind::empty;
  ScalarField density = ScalarField::constant(0.0);  // poisson
  std::vector<Point> points;                         // explicit_list

  static InitialCondition empty() { return {}; }
  static InitialCondition poisson(ScalarField rho0) {
    return {Kind::poisson, std::move(rho0), {}};
  }
  static InitialCondition explicit_list(std::vector<Point> pts) {
    return {Kind::explicit_list, ScalarField::constant(0.0), std::move(pts)};
  }
};

/// Samples the initial configuration in the window's particle domain.
/// Poisson: N ~ Poisson(integral of rho0), then N i.i.d. positions with
/// density rho0 / integral.
PointConfiguration sample_initial(const InitialCondition& init, const Window& window, Philox& rng);

struct EventRecord {
  enum class Kind { birth, death, halted };
  Kind kind = Kind::halted;
  double waiting_time = 0.0;
  Point where{};
};

/// Raised when a replica exceeds its event budget.
class CappedRunError : public std::runtime_error {
 public:
  CappedRunError(std::size_t replica, std::uint64_t cap);
  std::size_t replica() const { return replica_; }

 private:
  std::size_t replica_;
};

/// Gillespie simulation of the immigration-death process with competition
/// on a finite window.
///
/// Per-particle death rates are maintained incrementally: an event at x only
/// touches particles within r_cut, found through a cell list with cell side
/// >= r_cut. Deaths are selected by a two-level scan over cached per-cell
/// rate sums. Every kAuditInterval events all rates are rebuilt from scratch.
class Simulation {
 public:
  static constexpr std::uint64_t kAuditInterval = std::uint64_t{1} << 16;

  Simulation(const ModelParams& params, const PointConfiguration& initial, Philox rng);

  double time() const { return t_; }
  std::size_t size() const { return pos_.size(); }
  /// Integral of b over the particle domain.
  double immigration_rate() const { return b_total_; }
  /// Running sum of per-particle death rates.
  double total_death_rate() const { return d_total_; }

  /// Fires one event. Returns a halted record when the total rate is zero.
  EventRecord step();

  /// Simulates up to time t_stop; the pending event past t_stop is discarded
  /// (exact by memorylessness). Throws CappedRunError(replica) when the event
  /// count would exceed max_events.
  void advance_to(double t_stop, std::uint64_t max_events = 100'000'000, std::size_t replica = 0);

  PointConfiguration configuration() const;

  /// Rebuilds all rates from scratch and returns the relative drift of the
  /// running total before the rebuild.
  double audit();
  /// D_tot recomputed by the O(N^2) model-core formula; state is untouched.
  double death_rate_total_from_scratch() const;
  /// True when every particle is registered in exactly the cell containing it.
  bool index_consistent() const;

  std::uint64_t events() const { return events_; }
  std::uint64_t births() const { return births_; }
  std::uint64_t deaths() const { return deaths_; }
  double max_audit_residual() const { return max_audit_residual_; }
  std::size_t cell_count() const { return cell_rate_.size(); }

 private:
  std::uint32_t cell_of(const Point& x) const;
  void insert(const Point& x);
  void remove(std::uint32_t i);
  std::uint32_t select_victim(double u) const;
  void rebuild_rates();

  const ModelParams* params_;
  Philox rng_;
  double t_ = 0.0;
  double b_total_ = 0.0;
  double d_total_ = 0.0;

  // Particles (structure of arrays).
  std::vector<Point> pos_;
  std::vector<double> rate_;
  std::vector<std::uint32_t> cell_;
  std::vector<std::uint32_t> slot_;

  // Cell list.
  int dim_;
  std::array<int, 3> ncell_{1, 1, 1};
  std::array<double, 3> cell_side_{1.0, 1.0, 1.0};
  Box domain_;
  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::vector<std::uint32_t>> neighbors_;
  std::vector<double> cell_rate_;

  std::uint64_t events_ = 0;
  std::uint64_t births_ = 0;
  std::uint64_t deaths_ = 0;
  double max_audit_residual_ = 0.0;
};

struct ReplicaPlan {
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  std::vector<double> snapshots{0.0};
  std::uint64_t max_events = 100'000'000;
  unsigned threads = 1;
};

struct ReplicaStats {
  std::uint64_t events = 0;
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
  double max_audit_residual = 0.0;
  double final_audit_residual = 0.0;
};

/// snapshots[s][r] is replica r at plan.snapshots[s].
struct Ensemble {
  std::vector<double> times;
  std::vector<std::vector<PointConfiguration>> snapshots;
  std::vector<ReplicaStats> stats;

  std::size_t replicas() const { return stats.size(); }
};

/// Runs independent replicas; replica r draws from Philox(plan.seed, r).
/// Output is identical for every thread count.
Ensemble run_replicas(const ReplicaPlan& plan, const ModelParams& params,
                      const InitialCondition& init);

}  // namespace contpop
