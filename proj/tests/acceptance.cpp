// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <nlohmann/json.hpp>

#include "contpop/bounds.hpp"
#include "contpop/cli.hpp"
#include "contpop/combinatorics.hpp"
#include "contpop/estimators.hpp"
#include "contpop/hierarchy.hpp"
#include "contpop/rng.hpp"
#include "contpop/simulator.hpp"

namespace fs = std::filesystem;
using namespace contpop;

namespace {

constexpr double kSigmas = 3.0;
constexpr double kWallLimitSeconds = 60.0;
constexpr double kHierarchyTolerance = 1e-6;
constexpr double kIdentityTolerance = 1e-12;
constexpr double kOrderRatioLow = 12.0;
constexpr double kOrderRatioHigh = 20.0;
constexpr double kScheduleHorizon = 10.0;
constexpr std::uint64_t kSeed = 20240611;

unsigned worker_threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  std::printf("[%s] criterion %d: %s; %s\n", o.passed ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.passed) ++failures;
}

template <class F>
void guarded(int id, const std::string& title, F&& f) {
  try {
    report(id, title, f());
  } catch (const std::exception& e) {
    report(id, title, {false, std::string("exception: ") + e.what()});
  }
}

ModelParams line(double side, CompetitionKernel k, ScalarField b, ScalarField m) {
  return ModelParams(Window(1, {side}), std::move(k), {std::move(b), std::move(m)});
}

// Per-replica spatial mean density with its standard error.
MeanError mean_density(const Snapshot& snap, double volume) {
  std::vector<double> rho;
  rho.reserve(snap.size());
  for (const auto& c : snap) rho.push_back(static_cast<double>(c.size()) / volume);
  return mean_and_stderr(rho);
}

// Criteria 3-5 share one ensemble.
struct CompetitionRun {
  ModelParams params = line(20.0, CompetitionKernel::gaussian(1, 1.0, 1.0 / std::sqrt(2.0 * std::numbers::pi)),
                            ScalarField::constant(1.0), ScalarField::constant(0.0));
  InitialCondition init = InitialCondition::poisson(ScalarField::constant(0.5));
  Ensemble ensemble;

  CompetitionRun() {
    ReplicaPlan plan;
    plan.replicas = 200;
    plan.seed = kSeed + 3;
    plan.snapshots = {0, 1, 2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    plan.threads = worker_threads();
    ensemble = run_replicas(plan, params, init);
  }
  std::size_t index_of(double t) const {
    return static_cast<std::size_t>(std::find(ensemble.times.begin(), ensemble.times.end(), t) - ensemble.times.begin());
  }
};

Outcome criterion1() {
  const auto p = line(10.0, CompetitionKernel{}, ScalarField::constant(1.0), ScalarField::constant(1.0));
  ReplicaPlan plan;
  plan.replicas = 200;
  plan.seed = kSeed + 1;
  plan.snapshots = {0.5, 1, 2, 5};
  plan.threads = 1;
  const auto start = std::chrono::steady_clock::now();
  const auto ens = run_replicas(plan, p, InitialCondition::empty());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = wall < kWallLimitSeconds;
  double worst = 0.0;
  for (std::size_t s = 0; s < ens.times.size(); ++s) {
    const auto d = mean_density(ens.snapshots[s], 10.0);
    const double z = std::abs(d.mean - (1.0 - std::exp(-ens.times[s]))) / d.stderr_;
    worst = std::max(worst, z);
    ok = ok && z <= kSigmas;
  }
  return {ok, "worst |z| = " + fmt(worst) + " (tolerance " + fmt(kSigmas) + "), wall " + fmt(wall) +
                  " s single-threaded (limit " + fmt(kWallLimitSeconds) + " s)"};
}

Outcome criterion2() {
  const auto p = line(10.0, CompetitionKernel{}, ScalarField::constant(1.0), ScalarField::constant(1.0));
  const HierarchySolver s(p, {HierarchyMode::homogeneous, 128, 2, Closure::zero_third_cumulant});
  const auto end = s.integrate(s.poisson_state(ScalarField::constant(0.0)), 2.0, 1e-3).snapshots.back();
  const double rho = 1.0 - std::exp(-2.0);
  const double e1 = std::abs(end.k1[0] - rho);
  double e2 = 0.0;
  for (double v : end.k2) e2 = std::max(e2, std::abs(v - rho * rho));
  return {e1 <= kHierarchyTolerance && e2 <= kHierarchyTolerance,
          "|k1 - oracle| = " + fmt(e1) + ", max |k2 - rho^2| = " + fmt(e2) + " (tolerance " +
              fmt(kHierarchyTolerance) + ")"};
}

Outcome criterion3(const CompetitionRun& run) {
  bool ok = true;
  double worst = -INFINITY;
  for (double t : {1.0, 2.0, 5.0}) {
    const auto d = mean_density(run.ensemble.snapshots[run.index_of(t)], 20.0);
    const double z = (d.mean - (0.5 + t)) / d.stderr_;
    worst = std::max(worst, z);
    ok = ok && z <= kSigmas;
  }
  return {ok, "largest (k1 - (0.5 + t)) / stderr = " + fmt(worst) + " (must be <= " + fmt(kSigmas) + ")"};
}

Outcome criterion4(const CompetitionRun& run) {
  const double level = std::max(0.5, run.params.b_sup() / run.params.kernel()(Point{}));
  bool density_ok = true, pair_ok = true;
  double worst = -INFINITY, peak = 0.0, worst_pair = -INFINITY;
  const CellPartition cells(run.params.window(), 1.0);
  for (std::size_t s = 0; s < run.ensemble.times.size(); ++s) {
    if (std::fmod(run.ensemble.times[s], 5.0) != 0.0) continue;
    const auto& snap = run.ensemble.snapshots[s];
    const auto d = mean_density(snap, 20.0);
    const double z = (d.mean - level) / std::max(d.stderr_, 1e-300);
    if (z > worst) {
      worst = z;
      peak = d.mean;
    }
    density_ok = density_ok && z <= kSigmas;
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
      const auto tc = two_cell_second_moment(snap, cells.cell(c), cells.cell(c + 1), 1);
      const double zp = (tc.cross - tc.bound) / std::max(tc.cross_stderr, 1e-300);
      worst_pair = std::max(worst_pair, zp);
      pair_ok = pair_ok && tc.cross - kSigmas * tc.cross_stderr <= tc.bound;
    }
  }
  return {density_ok && pair_ok,
          "density level " + fmt(level) + ", worst snapshot density " + fmt(peak) + " at " + fmt(worst) +
              " stderr above the level (must be <= " + fmt(kSigmas) + "); two-cell worst (cross - bound)/stderr = " +
              fmt(worst_pair) + (pair_ok ? " ok" : " violated")};
}

Outcome criterion5(const CompetitionRun& run) {
  const int L = 4;
  const CellPartition cells(run.params.window(), 1.0);
  const auto ms = moment_series(run.ensemble.snapshots, run.ensemble.times, cells, L, L);
  const double a_cell = cell_infimum(Box{{-1, 0, 0}, {1, 0, 0}}, run.params.kernel());
  const double V = cells.cell_volume();
  bool closed_ok = true, ode_ok = true;
  double worst_closed = -INFINITY, worst_ode = -INFINITY, kappa = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double b_cell = run.params.b().integral(cells.cell(c), 1);
    std::vector<double> q0(ms.factorial[0][c].begin(), ms.factorial[0][c].end());
    double theta = run.params.theta0();
    double fact = 1.0;
    for (int l = 1; l <= L; ++l) {
      fact *= l;
      const double q = q0[static_cast<std::size_t>(l - 1)];
      if (q > 0) theta = std::max(theta, std::log(std::pow(fact * q, 1.0 / l) / V));
    }
    const auto sys = moment_bound_system(q0, b_cell, a_cell, ms.times, V, theta);
    kappa = std::max(kappa, sys.kappa_cell);
    for (std::size_t s = 0; s < ms.times.size(); ++s) {
      for (int l = 1; l <= L; ++l) {
        const auto li = static_cast<std::size_t>(l - 1);
        const double q = ms.factorial[s][c][li], se = ms.factorial_stderr[s][c][li];
        const double zc = (q - sys.closed_bounds[li]) / std::max(se, 1e-300);
        const double zo = (q - sys.trajectories[li][s]) / std::max(se, 1e-300);
        if (se > 0) {
          worst_closed = std::max(worst_closed, zc);
          worst_ode = std::max(worst_ode, zo);
        }
        closed_ok = closed_ok && q <= sys.closed_bounds[li] + kSigmas * se;
        ode_ok = ode_ok && q <= sys.trajectories[li][s] + kSigmas * se;
      }
    }
  }
  return {closed_ok && ode_ok, "a_cell = " + fmt(a_cell) + ", kappa_cell = " + fmt(kappa) +
                                   "; worst (q - closed bound)/stderr = " + fmt(worst_closed) +
                                   ", worst (q - ODE envelope)/stderr = " + fmt(worst_ode) + " (must be <= " +
                                   fmt(kSigmas) + ")"};
}

// Number of set partitions of {0..n-1} into exactly k blocks, by restricted growth strings.
std::vector<std::uint64_t> brute_force_partitions(int n) {
  std::vector<std::uint64_t> count(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int blocks) {
    if (i == n) {
      ++count[static_cast<std::size_t>(blocks)];
      return;
    }
    for (int v = 0; v <= blocks; ++v) {
      a[static_cast<std::size_t>(i)] = v;
      rec(i + 1, std::max(blocks, v + 1));
    }
  };
  if (n == 0) {
    count[0] = 1;
  } else {
    rec(0, 0);
  }
  return count;
}

Outcome criterion6() {
  Philox g(kSeed + 6, 0);
  const Window w(1, {4.0});
  const Box cell{{0, 0, 0}, {1, 0, 0}};
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    PointConfiguration config;
    const auto inside = static_cast<int>(g.uniform() * 13.0);
    for (int i = 0; i < inside; ++i) config.positions.push_back({g.uniform(), 0, 0});
    const auto outside = static_cast<int>(g.uniform() * 5.0);
    for (int i = 0; i < outside; ++i) config.positions.push_back({1.0 + 3.0 * g.uniform(), 0, 0});
    const int n = 1 + static_cast<int>(g.uniform() * 8.0);
    std::vector<BigInt> f;
    for (int l = 1; l <= n; ++l) f.push_back(factorial_moment(config, cell, 1, l));
    BigInt direct = 1;
    for (int k = 0; k < n; ++k) direct *= inside;
    if (raw_moment_from_factorials(f, n) != direct) ++mismatches;
  }
  int table_mismatches = 0;
  for (int n = 1; n <= 10; ++n) {
    const auto brute = brute_force_partitions(n);
    for (int k = 1; k <= n; ++k) {
      if (stirling(n, k) != BigInt(brute[static_cast<std::size_t>(k)])) ++table_mismatches;
    }
  }
  return {mismatches == 0 && table_mismatches == 0,
          "1000 random configurations, identity mismatches " + std::to_string(mismatches) +
              "; Stirling table mismatches for n <= 10: " + std::to_string(table_mismatches) + " (exact)"};
}

// Transition probabilities of a birth-death chain with the given rates.
Eigen::VectorXd chain_law(const std::vector<double>& birth, const std::vector<double>& death, int start, double t) {
  const auto n = static_cast<Eigen::Index>(birth.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i + 1 < n) q(i, i + 1) = birth[static_cast<std::size_t>(i)];
    if (i > 0) q(i, i - 1) = death[static_cast<std::size_t>(i)];
    q(i, i) = -q.row(i).sum();
  }
  const Eigen::MatrixXd p = (q * t).exp();
  return p.row(start).transpose();
}

// Compares occupation frequencies of states 0..shown-1 with the chain law.
void compare_occupation(const Ensemble& ens, const std::vector<double>& birth, const std::vector<double>& death,
                        int start, std::size_t shown, bool& ok, double& worst) {
  const double R = static_cast<double>(ens.replicas());
  for (std::size_t s = 0; s < ens.times.size(); ++s) {
    const auto law = chain_law(birth, death, start, ens.times[s]);
    std::vector<double> freq(shown, 0.0);
    for (const auto& c : ens.snapshots[s]) {
      if (c.size() < shown) freq[c.size()] += 1.0 / R;
    }
    for (std::size_t k = 0; k < shown; ++k) {
      const double p = law(static_cast<Eigen::Index>(k));
      const double se = std::sqrt(p * (1 - p) / R);
      const double diff = std::abs(freq[k] - p);
      if (se > 0) worst = std::max(worst, diff / se);
      ok = ok && diff <= kSigmas * se + 1e-15;
    }
  }
}

Outcome criterion7() {
  ReplicaPlan plan;
  plan.replicas = 10000;
  plan.snapshots = {0.5, 2.0};
  plan.threads = worker_threads();

  // Three particles inside one interaction range and no immigration.
  const double A = 0.5, m = 1.0;
  const auto confined = line(10.0, CompetitionKernel::top_hat(1, A, 1.0), ScalarField::constant(0.0),
                             ScalarField::constant(m));
  plan.seed = kSeed + 7;
  const auto ens = run_replicas(plan, confined, InitialCondition::explicit_list({{1.0, 0, 0}, {1.2, 0, 0}, {1.4, 0, 0}}));
  std::vector<double> birth(4, 0.0), death(4, 0.0);
  for (int n = 1; n < 4; ++n) death[static_cast<std::size_t>(n)] = n * (m + A * (n - 1));
  bool ok = true;
  double worst = 0.0;
  std::size_t max_size = 0;
  for (const auto& snap : ens.snapshots) {
    for (const auto& c : snap) max_size = std::max(max_size, c.size());
  }
  ok = max_size <= 3;
  compare_occupation(ens, birth, death, 3, 4, ok, worst);

  // Immigration into a small box against a truncated chain.
  const auto immigrating = line(10.0, CompetitionKernel::top_hat(1, A, 1.0),
                                ScalarField::box(10.0, Box{{0, 0, 0}, {0.1, 0, 0}}), ScalarField::constant(m));
  plan.seed = kSeed + 70;
  const auto ens2 = run_replicas(plan, immigrating, InitialCondition::empty());
  const int truncation = 30;
  std::vector<double> b2(truncation, 1.0), d2(truncation, 0.0);
  for (int n = 1; n < truncation; ++n) d2[static_cast<std::size_t>(n)] = n * (m + A * (n - 1));
  bool ok2 = true;
  double worst2 = 0.0;
  compare_occupation(ens2, b2, d2, 0, 4, ok2, worst2);
  return {ok && ok2, "confined chain (max size " + std::to_string(max_size) + ") worst |z| = " + fmt(worst) +
                         "; immigration chain worst |z| = " + fmt(worst2) + " (tolerance " + fmt(kSigmas) + ")"};
}

Outcome criterion8() {
  RateNorms n;
  n.a_integral = 1.0;
  n.a_sup = 1.0;
  n.b_sup = 1.0;
  const auto s = schedule_until(0.0, 0.4, n, kScheduleHorizon);
  if (!s) return {false, "horizon not reached within " + std::to_string(kMaxScheduleSteps) + " steps"};
  return {s->max_identity_residual <= kIdentityTolerance,
          "sum reached " + fmt(s->total()) + " > " + fmt(kScheduleHorizon) + " after " +
              std::to_string(s->entries.size()) + " steps; max identity residual " + fmt(s->max_identity_residual) +
              " (tolerance " + fmt(kIdentityTolerance) + ")"};
}

Outcome criterion9() {
  const double m = 10.0;
  const auto p = line(10.0, CompetitionKernel{}, ScalarField::constant(0.0), ScalarField::constant(m));
  const HierarchySolver s(p, {HierarchyMode::homogeneous, 16, 2, Closure::zero_third_cumulant});
  const auto init = s.poisson_state(ScalarField::constant(1.0));
  std::vector<double> err;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    const auto end = s.integrate(init, 2.0, dt).snapshots.back();
    err.push_back(std::abs(end.k1[0] - std::exp(-m * 2.0)));
  }
  const double r1 = err[0] / err[1], r2 = err[1] / err[2];
  const bool ok = r1 >= kOrderRatioLow && r1 <= kOrderRatioHigh && r2 >= kOrderRatioLow && r2 <= kOrderRatioHigh;
  return {ok, "errors " + fmt(err[0]) + ", " + fmt(err[1]) + ", " + fmt(err[2]) + "; ratios " + fmt(r1) + ", " +
                  fmt(r2) + " (range [" + fmt(kOrderRatioLow) + ", " + fmt(kOrderRatioHigh) + "])"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

// Replays a manifest's command line with another output directory and thread count.
int replay(const fs::path& manifest, const fs::path& out, const std::string& threads) {
  auto args = nlohmann::json::parse(slurp(manifest))["command_line"].get<std::vector<std::string>>();
  std::vector<std::string> edited;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if ((args[i] == "--out" || args[i] == "--threads") && i + 1 < args.size()) {
      ++i;
      continue;
    }
    edited.push_back(args[i]);
  }
  edited.insert(edited.end(), {"--out", out.string(), "--threads", threads});
  return run_cli(edited);
}

bool same_csvs(const fs::path& a, const fs::path& b, std::size_t& compared) {
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    const auto other = b / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) return false;
  }
  return compared > 0;
}

Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / ("contpop_acceptance_" + std::to_string(kSeed));
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cfg = root / "experiment.json";
  std::ofstream(cfg) << R"({
  "dimension": 2, "sides": [8, 8], "boundary": "periodic",
  "kernel": {"kind": "gaussian", "amplitude": 0.8, "range": 0.5},
  "b": 1.5, "m": 0.3,
  "initial": {"kind": "poisson", "density": 0.5},
  "estimators": {"cell_side": 2, "l_max": 4, "n_max": 4, "density_bins": [4, 4], "r_max": 2, "r_bins": 8},
  "simulation": {"replicas": 64, "snapshots": [0, 1, 3]},
  "hierarchy": {"n_max": 2, "dt": 0.01, "t_end": 3, "points_per_axis": 32}
})";
  const std::string seed = std::to_string(kSeed + 10);
  bool ok = run_cli({"simulate", "--config", cfg.string(), "--out", (root / "t1").string(), "--seed", seed,
                     "--threads", "1"}) == cli::kOk;
  ok = ok && run_cli({"simulate", "--config", cfg.string(), "--out", (root / "t8").string(), "--seed", seed,
                      "--threads", "8"}) == cli::kOk;
  ok = ok && replay(root / "t1" / "manifest.json", root / "replay", "8") == cli::kOk;
  ok = ok && run_cli({"hierarchy", "--config", cfg.string(), "--out", (root / "h").string()}) == cli::kOk;
  ok = ok && replay(root / "h" / "manifest.json", root / "h_replay", "1") == cli::kOk;
  std::size_t n1 = 0, n2 = 0, n3 = 0;
  const bool same = ok && same_csvs(root / "t1", root / "t8", n1) && same_csvs(root / "t1", root / "replay", n2) &&
                    same_csvs(root / "h", root / "h_replay", n3);
  fs::remove_all(root);
  return {same, std::to_string(n1) + " simulate CSVs identical across --threads 1/8, " + std::to_string(n2) +
                    " identical on manifest replay, " + std::to_string(n3) +
                    " hierarchy CSVs identical on replay (byte comparison)"};
}

}  // namespace

int main() {
  guarded(1, "competition-free simulator vs explicit density", criterion1);
  guarded(2, "competition-free hierarchy vs explicit flow at t=2", criterion2);
  const CompetitionRun run;
  guarded(3, "density dominated by the competition-free oracle", [&] { return criterion3(run); });
  guarded(4, "density bounded by max{k0, b/a(0)} up to t=50 and two-cell check", [&] { return criterion4(run); });
  guarded(5, "cell factorial moments below closed and ODE envelopes", [&] { return criterion5(run); });
  guarded(6, "power-sum identity and Stirling table in exact arithmetic", criterion6);
  guarded(7, "occupation law of small chains vs matrix exponential", criterion7);
  guarded(8, "continuation schedule passes horizon 10", criterion8);
  guarded(9, "RK4 convergence order", criterion9);
  guarded(10, "byte-identical reruns", criterion10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
