#include <doctest.h>

#include <cmath>
#include <vector>

#include "contpop/combinatorics.hpp"
#include "contpop/errors.hpp"
#include "contpop/estimators.hpp"
#include "contpop/simulator.hpp"

using namespace contpop;

namespace {

Snapshot poisson_ensemble(const Window& w, double kappa, std::size_t replicas, std::uint64_t seed) {
  Snapshot out;
  for (std::size_t r = 0; r < replicas; ++r) {
    Philox g(seed, r);
    out.push_back(sample_initial(InitialCondition::poisson(ScalarField::constant(kappa)), w, g));
  }
  return out;
}

}  // namespace

TEST_CASE("factorial moments") {
  CHECK(factorial_moment(3, 2) == 3);
  CHECK(factorial_moment(2, 5) == 0);
  CHECK(factorial_moment(7, 1) == 7);
  CHECK(factorial_moment(12, 8) == binomial(12, 8));
  CHECK(factorial_moment_value(10, 3) == doctest::Approx(120.0));
  PointConfiguration c{{{0.5, 0, 0}, {0.7, 0, 0}, {1.5, 0, 0}}, {}};
  CHECK(factorial_moment(c, Box{{0, 0, 0}, {1, 0, 0}}, 1, 2) == 1);
}

TEST_CASE("raw moments from factorial moments") {
  const std::vector<double> two{2.0, 1.0};
  CHECK(raw_moment_from_factorials(two, 2) == doctest::Approx(4.0));
  CHECK(raw_moment_from_factorials(std::span<const double>(two.data(), 1), 1) == doctest::Approx(2.0));
  const std::vector<double> three{3.0, 3.0, 1.0};
  CHECK(raw_moment_from_factorials(three, 3) == doctest::Approx(27.0));
  CHECK_THROWS_AS(raw_moment_from_factorials(std::span<const double>(three.data(), 2), 3), DomainError);
  for (std::uint64_t n = 0; n <= 12; ++n) {
    std::vector<BigInt> f;
    for (int l = 1; l <= 8; ++l) f.push_back(factorial_moment(n, l));
    for (int k = 1; k <= 8; ++k) CHECK(raw_moment_from_factorials(f, k) == pow(BigInt(n), static_cast<unsigned>(k)));
  }
}

TEST_CASE("cell partition") {
  const Window w(2, {4.0, 2.0});
  const CellPartition p(w, 1.0);
  CHECK(p.size() == 8);
  CHECK(p.cell_volume() == doctest::Approx(1.0));
  double total = 0.0;
  for (const auto& c : p.cells()) total += c.volume(2);
  CHECK(total == doctest::Approx(w.volume()));
  CHECK(p.cell(p.locate({2.5, 1.5, 0})).contains({2.5, 1.5, 0}, 2));
  CHECK_THROWS_AS(CellPartition(w, 0.75), DomainError);
}

TEST_CASE("density estimate") {
  const Window w(1, {10.0});
  Snapshot empty(5);
  const auto g0 = density_estimate(empty, w, DensityBins{{5, 1, 1}});
  for (double v : g0.values) CHECK(v == 0.0);
  const auto ens = poisson_ensemble(w, 1.5, 400, 1);
  const auto g = density_estimate(ens, w, DensityBins{{5, 1, 1}});
  for (std::size_t b = 0; b < g.values.size(); ++b) {
    CHECK(std::abs(g.values[b] - 1.5) <= 3.5 * g.stderrs[b]);
  }
  CHECK(g.centers[0][0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(density_estimate(ens, w, DensityBins{{0, 1, 1}}), DomainError);
}

TEST_CASE("pair correlation estimate") {
  const Window w(1, {20.0});
  const auto ens = poisson_ensemble(w, 2.0, 300, 2);
  const auto g = pair_correlation_estimate(ens, w, RadialBins{2.0, 8});
  for (std::size_t b = 0; b < g.values.size(); ++b) {
    CHECK(std::abs(g.values[b] - 4.0) <= 3.5 * g.stderrs[b]);
  }
  Snapshot singles(10, PointConfiguration{{{1.0, 0, 0}}, {}});
  const auto s = pair_correlation_estimate(singles, w, RadialBins{2.0, 4});
  for (double v : s.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(pair_correlation_estimate(ens, w, RadialBins{10.5, 4}), DomainError);

  const Window w2(2, {8.0, 8.0});
  const auto e2 = poisson_ensemble(w2, 1.0, 200, 3);
  const auto g2 = pair_correlation_estimate(e2, w2, RadialBins{2.0, 4});
  for (std::size_t b = 0; b < g2.values.size(); ++b) CHECK(std::abs(g2.values[b] - 1.0) <= 3.5 * g2.stderrs[b]);
}

TEST_CASE("moment series") {
  const Window w(1, {10.0});
  const CellPartition part(w, 2.0);
  const std::vector<double> times{0.0};
  std::vector<Snapshot> det{Snapshot{PointConfiguration{{{0.1, 0, 0}, {0.2, 0, 0}, {1.9, 0, 0}, {5.0, 0, 0}}, {}}}};
  const auto one = moment_series(det, times, part, 4, 4);
  CHECK(one.factorial[0][0][0] == 3.0);
  CHECK(one.factorial[0][0][1] == 3.0);
  CHECK(one.factorial[0][0][2] == 1.0);
  CHECK(one.factorial[0][0][3] == 0.0);
  CHECK(one.raw[0][0][2] == doctest::Approx(27.0));
  CHECK(one.factorial[0][2][0] == 1.0);

  const auto ens = poisson_ensemble(w, 0.8, 500, 4);
  std::vector<Snapshot> snaps{ens};
  const auto ms = moment_series(snaps, times, part, 4, 4);
  const double mu = 0.8 * 2.0;
  for (std::size_t c = 0; c < part.size(); ++c) {
    double term = 1.0;
    for (int l = 1; l <= 4; ++l) {
      term *= mu / l;
      const auto i = static_cast<std::size_t>(l - 1);
      CHECK(std::abs(ms.factorial[0][c][i] - term) <= 3.5 * ms.factorial_stderr[0][c][i]);
      CHECK(ms.factorial[0][c][i] >= 0.0);
      CHECK(ms.raw[0][c][i] == doctest::Approx(ms.raw_direct[0][c][i]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(moment_series(snaps, times, part, 9, 2), DomainError);
}

TEST_CASE("pointwise monotonicity and subadditivity of counts") {
  const Window w(1, {8.0});
  const CellPartition part(w, 2.0);
  const auto ens = poisson_ensemble(w, 1.2, 200, 5);
  for (const auto& c : ens) {
    const double total = static_cast<double>(count_in(c, w.core(), 1));
    double sum_sq = 0.0;
    for (const auto& cell : part.cells()) sum_sq += std::pow(static_cast<double>(count_in(c, cell, 1)), 2);
    CHECK(total * total <= part.size() * sum_sq + 1e-9);
    if (total >= 1) {
      for (int n = 1; n < 8; ++n) CHECK(std::pow(total, n) <= std::pow(total, n + 1));
    }
  }
}

TEST_CASE("two-cell second moment bound") {
  const Window w(1, {10.0});
  const auto ens = poisson_ensemble(w, 1.0, 400, 6);
  const auto chk = two_cell_second_moment(ens, Box{{0, 0, 0}, {1, 0, 0}}, Box{{1, 0, 0}, {2, 0, 0}}, 1);
  CHECK(chk.cross <= chk.bound + 3.0 * chk.cross_stderr);
  CHECK(chk.cross == doctest::Approx(1.0).epsilon(0.25));
  CHECK(chk.bound == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("mean and standard error") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto me = mean_and_stderr(v);
  CHECK(me.mean == 2.5);
  CHECK(me.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  const std::vector<double> one{7.0};
  CHECK(mean_and_stderr(one).stderr_ == 0.0);
}
