#include "contpop/estimators.hpp"

#include <cmath>
#include <numeric>

#include "contpop/errors.hpp"
#include "contpop/kernel.hpp"

namespace contpop {

CellPartition::CellPartition(const Window& window, double side) : dim_(window.dim()), side_(side) {
  if (!(side > 0.0)) throw DomainError("cell side must be > 0");
  std::size_t total = 1;
  for (int i = 0; i < dim_; ++i) {
    const double ratio = window.side(i) / side;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
      throw DomainError("cell side must divide every window side");
    }
    counts_[i] = static_cast<int>(n);
    total *= static_cast<std::size_t>(counts_[i]);
  }
  cells_.reserve(total);
  std::array<int, 3> idx{};
  while (true) {
    Box b;
    for (int i = 0; i < dim_; ++i) {
      b.lower[i] = side * idx[i];
      b.upper[i] = idx[i] + 1 == counts_[i] ? window.side(i) : side * (idx[i] + 1);
    }
    cells_.push_back(b);
    int axis = dim_ - 1;
    while (axis >= 0 && ++idx[axis] >= counts_[axis]) {
      idx[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
}

std::size_t CellPartition::locate(const Point& x) const {
  std::size_t idx = 0;
  for (int i = 0; i < dim_; ++i) {
    const int c = static_cast<int>(std::floor(x[i] / side_));
    if (x[i] < 0.0 || c >= counts_[i]) return cells_.size();
    idx = idx * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(c);
  }
  return idx;
}

double CellPartition::cell_volume() const { return std::pow(side_, dim_); }

std::uint64_t count_in(const PointConfiguration& config, const Box& region, int dim) {
  std::uint64_t n = 0;
  for (const auto& p : config.positions) n += region.contains(p, dim) ? 1 : 0;
  return n;
}

BigInt factorial_moment(std::uint64_t count, int l) {
  if (l < 1) throw DomainError("factorial moment order must be >= 1");
  return binomial(count, static_cast<std::uint64_t>(l));
}

BigInt factorial_moment(const PointConfiguration& config, const Box& cell, int dim, int l) {
  return factorial_moment(count_in(config, cell, dim), l);
}

double factorial_moment_value(std::uint64_t count, int l) {
  if (l < 1) throw DomainError("factorial moment order must be >= 1");
  if (count < static_cast<std::uint64_t>(l)) return 0.0;
  double c = 1.0;
  for (int i = 1; i <= l; ++i) {
    c *= static_cast<double>(count - static_cast<std::uint64_t>(l) + static_cast<std::uint64_t>(i));
    c /= i;
  }
  return c;
}

double raw_moment_from_factorials(std::span<const double> factorials, int n) {
  if (n < 1) throw DomainError("raw moment order must be >= 1");
  if (factorials.size() < static_cast<std::size_t>(n)) {
    throw DomainError("factorial moments missing up to order " + std::to_string(n));
  }
  const auto& s = StirlingTable::shared();
  double total = 0.0;
  for (int l = 1; l <= n; ++l) {
    total += (factorial(l) * s(n, l)).convert_to<double>() * factorials[static_cast<std::size_t>(l - 1)];
  }
  return total;
}

BigInt raw_moment_from_factorials(std::span<const BigInt> factorials, int n) {
  if (n < 1) throw DomainError("raw moment order must be >= 1");
  if (factorials.size() < static_cast<std::size_t>(n)) {
    throw DomainError("factorial moments missing up to order " + std::to_string(n));
  }
  const auto& s = StirlingTable::shared();
  BigInt total = 0;
  for (int l = 1; l <= n; ++l) total += factorial(l) * s(n, l) * factorials[static_cast<std::size_t>(l - 1)];
  return total;
}

MeanError mean_and_stderr(std::span<const double> samples) {
  MeanError out;
  const std::size_t n = samples.size();
  if (n == 0) return out;
  double sum = 0.0;
  for (double v : samples) sum += v;
  out.mean = sum / static_cast<double>(n);
  if (n < 2) return out;
  double ss = 0.0;
  for (double v : samples) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

CorrelationGrid density_estimate(const Snapshot& ensemble, const Window& window,
                                 const DensityBins& bins) {
  const int dim = window.dim();
  std::size_t total = 1;
  std::array<double, 3> width{};
  for (int i = 0; i < dim; ++i) {
    if (bins.counts[i] < 1) throw DomainError("density bins need a positive count per axis");
    width[i] = window.side(i) / bins.counts[i];
    if (!(width[i] > 0.0)) throw DomainError("zero-volume density bin");
    total *= static_cast<std::size_t>(bins.counts[i]);
  }
  double bin_volume = 1.0;
  for (int i = 0; i < dim; ++i) bin_volume *= width[i];

  CorrelationGrid grid;
  grid.order = 1;
  grid.samples = ensemble.size();
  grid.centers.resize(total);
  for (std::size_t b = 0; b < total; ++b) {
    std::size_t rest = b;
    for (int i = dim - 1; i >= 0; --i) {
      const auto c = rest % static_cast<std::size_t>(bins.counts[i]);
      rest /= static_cast<std::size_t>(bins.counts[i]);
      grid.centers[b][i] = width[i] * (static_cast<double>(c) + 0.5);
    }
  }
  std::vector<std::vector<double>> per_bin(total, std::vector<double>(ensemble.size(), 0.0));
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    for (const auto& p : ensemble[r].positions) {
      if (!window.in_core(p)) continue;
      std::size_t b = 0;
      for (int i = 0; i < dim; ++i) {
        const int c = std::min(static_cast<int>(p[i] / width[i]), bins.counts[i] - 1);
        b = b * static_cast<std::size_t>(bins.counts[i]) + static_cast<std::size_t>(c);
      }
      per_bin[b][r] += 1.0 / bin_volume;
    }
  }
  grid.values.resize(total);
  grid.stderrs.resize(total);
  for (std::size_t b = 0; b < total; ++b) {
    const auto me = mean_and_stderr(per_bin[b]);
    grid.values[b] = me.mean;
    grid.stderrs[b] = me.stderr_;
  }
  return grid;
}

CorrelationGrid pair_correlation_estimate(const Snapshot& ensemble, const Window& window,
                                          const RadialBins& bins) {
  const int dim = window.dim();
  if (bins.count < 1 || !(bins.r_max > 0.0)) throw DomainError("radial bins need r_max > 0 and count >= 1");
  if (window.periodic() && bins.r_max > 0.5 * window.min_side()) {
    throw DomainError("radial bins exceed half the window side");
  }
  if (!window.periodic() && bins.r_max > window.buffer_width()) {
    throw DomainError("radial bins exceed the buffer width");
  }
  const double dr = bins.r_max / bins.count;
  const double volume = window.volume();
  std::vector<double> shell(static_cast<std::size_t>(bins.count));
  for (int k = 0; k < bins.count; ++k) {
    shell[static_cast<std::size_t>(k)] = ball_volume(dim, dr * (k + 1)) - ball_volume(dim, dr * k);
  }
  std::vector<std::vector<double>> per_bin(static_cast<std::size_t>(bins.count),
                                           std::vector<double>(ensemble.size(), 0.0));
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    const auto& pts = ensemble[r].positions;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!window.in_core(pts[i])) continue;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j == i) continue;
        const double d = window.distance(pts[i], pts[j]);
        if (d >= bins.r_max) continue;
        const auto k = std::min(static_cast<std::size_t>(d / dr), shell.size() - 1);
        per_bin[k][r] += 1.0;
      }
    }
  }
  CorrelationGrid grid;
  grid.order = 2;
  grid.samples = ensemble.size();
  for (std::size_t k = 0; k < shell.size(); ++k) {
    for (auto& v : per_bin[k]) v /= volume * shell[k];
    const auto me = mean_and_stderr(per_bin[k]);
    Point c{};
    c[0] = dr * (static_cast<double>(k) + 0.5);
    grid.centers.push_back(c);
    grid.values.push_back(me.mean);
    grid.stderrs.push_back(me.stderr_);
  }
  return grid;
}

MomentSeries moment_series(std::span<const Snapshot> snapshots, std::span<const double> times,
                           const CellPartition& partition, int l_max, int n_max) {
  if (l_max < 1 || n_max < 1 || l_max > kMaxMomentOrder || n_max > kMaxMomentOrder) {
    throw DomainError("moment orders must lie in 1..8");
  }
  if (snapshots.size() != times.size()) throw DomainError("one time per snapshot required");
  const int l_need = std::max(l_max, n_max);
  const int dim = partition.dim();
  MomentSeries out;
  out.times.assign(times.begin(), times.end());
  out.cells = partition.size();
  out.l_max = l_max;
  out.n_max = n_max;
  const auto& stirling_table = StirlingTable::shared();
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(n_max) + 1);
  for (int n = 1; n <= n_max; ++n) {
    for (int l = 1; l <= n; ++l) {
      weights[static_cast<std::size_t>(n)].push_back(
          (factorial(l) * stirling_table(n, l)).convert_to<double>());
    }
  }
  for (const auto& snap : snapshots) {
    const std::size_t R = snap.size();
    std::vector<std::vector<std::uint64_t>> counts(partition.size(), std::vector<std::uint64_t>(R, 0));
    for (std::size_t r = 0; r < R; ++r) {
      for (const auto& p : snap[r].positions) {
        const std::size_t c = partition.locate(p);
        if (c < partition.size()) ++counts[c][r];
      }
    }
    std::vector<std::vector<double>> fac(partition.size()), fac_se(partition.size()),
        raw(partition.size()), raw_se(partition.size()), raw_dir(partition.size());
    std::vector<double> sample(R);
    for (std::size_t c = 0; c < partition.size(); ++c) {
      std::vector<double> means(static_cast<std::size_t>(l_need));
      for (int l = 1; l <= l_need; ++l) {
        for (std::size_t r = 0; r < R; ++r) sample[r] = factorial_moment_value(counts[c][r], l);
        const auto me = mean_and_stderr(sample);
        means[static_cast<std::size_t>(l - 1)] = me.mean;
        if (l <= l_max) {
          fac[c].push_back(me.mean);
          fac_se[c].push_back(me.stderr_);
        }
      }
      for (int n = 1; n <= n_max; ++n) {
        const auto& w = weights[static_cast<std::size_t>(n)];
        double via_factorials = 0.0;
        for (int l = 1; l <= n; ++l) {
          via_factorials += w[static_cast<std::size_t>(l - 1)] * means[static_cast<std::size_t>(l - 1)];
        }
        raw[c].push_back(via_factorials);
        for (std::size_t r = 0; r < R; ++r) {
          sample[r] = std::pow(static_cast<double>(counts[c][r]), n);
        }
        const auto me = mean_and_stderr(sample);
        raw_se[c].push_back(me.stderr_);
        raw_dir[c].push_back(me.mean);
      }
    }
    out.factorial.push_back(std::move(fac));
    out.factorial_stderr.push_back(std::move(fac_se));
    out.raw.push_back(std::move(raw));
    out.raw_stderr.push_back(std::move(raw_se));
    out.raw_direct.push_back(std::move(raw_dir));
  }
  return out;
}

TwoCellCheck two_cell_second_moment(const Snapshot& ensemble, const Box& cell_x, const Box& cell_y,
                                    int dim) {
  const std::size_t R = ensemble.size();
  std::vector<double> cross(R), q1x(R), q1y(R), q2x(R), q2y(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto nx = count_in(ensemble[r], cell_x, dim);
    const auto ny = count_in(ensemble[r], cell_y, dim);
    cross[r] = static_cast<double>(nx) * static_cast<double>(ny);
    q1x[r] = static_cast<double>(nx);
    q1y[r] = static_cast<double>(ny);
    q2x[r] = factorial_moment_value(nx, 2);
    q2y[r] = factorial_moment_value(ny, 2);
  }
  TwoCellCheck out;
  const auto c = mean_and_stderr(cross);
  out.cross = c.mean;
  out.cross_stderr = c.stderr_;
  out.bound = mean_and_stderr(q2x).mean + mean_and_stderr(q2y).mean +
              0.5 * (mean_and_stderr(q1x).mean + mean_and_stderr(q1y).mean);
  return out;
}

}  // namespace contpop
