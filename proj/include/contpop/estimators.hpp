#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contpop/combinatorics.hpp"
#include "contpop/geometry.hpp"
#include "contpop/model.hpp"

namespace contpop {

/// Replica configurations at one snapshot time.
using Snapshot = std::vector<PointConfiguration>;

/// Cubic cells of side h tiling the core window.
class CellPartition {
 public:
  CellPartition(const Window& window, double side);

  double side() const { return side_; }
  std::size_t size() const { return cells_.size(); }
  const Box& cell(std::size_t i) const { return cells_[i]; }
  const std::vector<Box>& cells() const { return cells_; }
  /// Index of the cell containing x, or size() if x is outside the core.
  std::size_t locate(const Point& x) const;
  int dim() const { return dim_; }
  double cell_volume() const;

 private:
  int dim_;
  double side_;
  std::array<int, 3> counts_{1, 1, 1};
  std::vector<Box> cells_;
};

std::uint64_t count_in(const PointConfiguration& config, const Box& region, int dim);

/// F^(l) = N (N-1) ... (N-l+1) / l! with N the count in the cell.
BigInt factorial_moment(const PointConfiguration& config, const Box& cell, int dim, int l);
BigInt factorial_moment(std::uint64_t count, int l);
/// Floating-point binomial C(N, l), used when averaging over replicas.
double factorial_moment_value(std::uint64_t count, int l);

/// sum_{l=1}^{n} l! S(n, l) F^(l) from F^(1..n) (factorials[0] is F^(1)).
double raw_moment_from_factorials(std::span<const double> factorials, int n);
BigInt raw_moment_from_factorials(std::span<const BigInt> factorials, int n);

/// Binned estimate of k^(1) or k^(2) with replica-level standard errors.
struct CorrelationGrid {
  int order = 1;
  /// Bin centers; for order 2 only the first component (r) is used.
  std::vector<Point> centers;
  std::vector<double> values;
  std::vector<double> stderrs;
  std::size_t samples = 0;
};

/// Regular bins over the core window for density estimates.
struct DensityBins {
  std::array<int, 3> counts{1, 1, 1};
};

CorrelationGrid density_estimate(const Snapshot& ensemble, const Window& window,
                                 const DensityBins& bins);

struct RadialBins {
  double r_max = 1.0;
  int count = 10;
};

/// k^(2)(r) from ordered pair counts with minimum-image separations.
CorrelationGrid pair_correlation_estimate(const Snapshot& ensemble, const Window& window,
                                          const RadialBins& bins);

/// Per snapshot, per cell: factorial moments q^(l) (l = 1..l_max) and raw
/// moments mu(N^n) (n = 1..n_max) obtained from averaged factorials.
struct MomentSeries {
  std::vector<double> times;
  std::size_t cells = 0;
  int l_max = 0;
  int n_max = 0;
  /// [snapshot][cell][l-1]
  std::vector<std::vector<std::vector<double>>> factorial;
  std::vector<std::vector<std::vector<double>>> factorial_stderr;
  /// [snapshot][cell][n-1]
  std::vector<std::vector<std::vector<double>>> raw;
  std::vector<std::vector<std::vector<double>>> raw_stderr;
  /// Direct ensemble average of N^n, kept alongside the factorial route.
  std::vector<std::vector<std::vector<double>>> raw_direct;
};

inline constexpr int kMaxMomentOrder = 8;

MomentSeries moment_series(std::span<const Snapshot> snapshots, std::span<const double> times,
                           const CellPartition& partition, int l_max, int n_max);

/// Mean and standard error of the mean over a sample; stderr is 0 below 2 samples.
struct MeanError {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanError mean_and_stderr(std::span<const double> samples);

/// E[N_x N_y] for two disjoint cells compared with the bound implied by
/// E[(N_x - N_y)^2] >= 0 in factorial-moment form:
///   E[N_x N_y] <= q2_x + q2_y + (q1_x + q1_y) / 2.
struct TwoCellCheck {
  double cross = 0.0;
  double cross_stderr = 0.0;
  double bound = 0.0;
};
TwoCellCheck two_cell_second_moment(const Snapshot& ensemble, const Box& cell_x, const Box& cell_y,
                                    int dim);

}  // namespace contpop
