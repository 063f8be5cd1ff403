#include "contpop/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "contpop/bounds.hpp"
#include "contpop/combinatorics.hpp"
#include "contpop/config.hpp"
#include "contpop/errors.hpp"
#include "contpop/estimators.hpp"
#include "contpop/hierarchy.hpp"
#include "contpop/simulator.hpp"
#include "contpop/surgailis.hpp"

namespace contpop::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("missing CSV column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
  t.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != t.header.size()) throw ConfigError(path.string() + ": ragged row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> coordinate_names(const std::string& prefix, int dim) {
  std::vector<std::string> out;
  for (int i = 1; i <= dim; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CONTPOP_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("CONTPOP_SEED is not an unsigned integer: ") + env);
  }
  throw ConfigError("no seed given: pass --seed or set CONTPOP_SEED");
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

json manifest_for(const std::string& subcommand, const Common& c, const ExperimentConfig& cfg,
                  const json& parameters, const std::vector<std::string>& command_line) {
  json m;
  m["tool_version"] = kToolVersion;
  m["subcommand"] = subcommand;
  m["config_path"] = c.config;
  m["config_hash"] = hex64(cfg.content_hash);
  m["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  m["output_directory"] = c.out;
  m["threads"] = c.threads;
  m["parameters"] = parameters;
  m["command_line"] = command_line;
  return m;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Box bin_box(const Point& center, const Window& window, const std::array<int, 3>& bins) {
  Box b{};
  for (int i = 0; i < window.dim(); ++i) {
    const double w = window.side(i) / bins[static_cast<std::size_t>(i)];
    b.lower[i] = center[i] - 0.5 * w;
    b.upper[i] = center[i] + 0.5 * w;
  }
  return b;
}

// Mean first correlation function of the competition-free flow over a region.
double oracle_density(const ExperimentConfig& cfg, double t, const Box& region) {
  const int dim = cfg.params.dim();
  const SurgailisFlow flow(cfg.params.rates(), t);
  const double vol = region.volume(dim);
  switch (cfg.initial.kind) {
    case InitialCondition::Kind::poisson:
      return expected_count(region, dim, flow, cfg.initial.density) / vol;
    case InitialCondition::Kind::empty:
      return expected_count(region, dim, flow, ScalarField::constant(0.0)) / vol;
    case InitialCondition::Kind::explicit_list: {
      double survivors = 0.0;
      for (const auto& p : cfg.initial.points) {
        if (region.contains(p, dim)) survivors += flow.psi(p);
      }
      return (survivors + expected_count(region, dim, flow, ScalarField::constant(0.0))) / vol;
    }
  }
  return 0.0;
}

ScalarField initial_density_field(const ExperimentConfig& cfg, const char* who) {
  switch (cfg.initial.kind) {
    case InitialCondition::Kind::poisson: return cfg.initial.density;
    case InitialCondition::Kind::empty: return ScalarField::constant(0.0);
    case InitialCondition::Kind::explicit_list: break;
  }
  throw ConfigError(std::string(who) + " needs a poisson or empty initial condition");
}

Box difference_box(const Box& cell, int dim) {
  Box d{};
  for (int i = 0; i < dim; ++i) {
    const double h = cell.upper[i] - cell.lower[i];
    d.lower[i] = -h;
    d.upper[i] = h;
  }
  return d;
}

// Exact factorial moments of the initial state in a cell.
std::vector<double> initial_factorials(const ExperimentConfig& cfg, const Box& cell, int l_max) {
  const int dim = cfg.params.dim();
  std::vector<double> q(static_cast<std::size_t>(l_max), 0.0);
  if (cfg.initial.kind == InitialCondition::Kind::poisson) {
    const double mu = cfg.initial.density.integral(cell, dim);
    double term = 1.0;
    for (int l = 1; l <= l_max; ++l) {
      term *= mu / l;
      q[static_cast<std::size_t>(l - 1)] = term;
    }
  } else if (cfg.initial.kind == InitialCondition::Kind::explicit_list) {
    std::uint64_t n = 0;
    for (const auto& p : cfg.initial.points) n += cell.contains(p, dim) ? 1 : 0;
    for (int l = 1; l <= l_max; ++l) q[static_cast<std::size_t>(l - 1)] = factorial_moment_value(n, l);
  }
  return q;
}

// Smallest theta with q_l <= (V e^theta)^l / l! for every l.
double theta_from_moments(std::span<const double> q, double volume) {
  double theta = -std::numeric_limits<double>::infinity();
  double fact = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double l = static_cast<double>(i + 1);
    fact *= l;
    if (q[i] > 0.0) theta = std::max(theta, std::log(std::pow(fact * q[i], 1.0 / l) / volume));
  }
  return theta;
}

/// Family-wise critical value: at least 3 sigma, Bonferroni-widened over `tests` comparisons.
double critical_z(std::size_t tests) {
  const boost::math::normal_distribution<double> normal;
  const double tail = 0.00135 / static_cast<double>(std::max<std::size_t>(tests, 1));
  return std::max(3.0, boost::math::quantile(boost::math::complement(normal, tail)));
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::optional<std::size_t> replicas;
  std::vector<double> snapshots;
  std::optional<std::uint64_t> max_events;
};

int cmd_simulate(const Common& c, const SimulateArgs& a, const std::vector<std::string>& argv,
                 std::ostream& out) {
  ExperimentConfig cfg = load_config(c.config);
  if (a.replicas) cfg.simulation.replicas = *a.replicas;
  if (!a.snapshots.empty()) cfg.simulation.snapshots = a.snapshots;
  if (a.max_events) cfg.simulation.max_events = *a.max_events;
  Common common = c;
  common.seed = resolve_seed(c.seed);
  const int dim = cfg.params.dim();
  const auto& est = cfg.estimators;
  const CellPartition partition(cfg.params.window(), est.cell_side);

  fs::create_directories(c.out);
  const json parameters = {{"replicas", cfg.simulation.replicas},
                           {"snapshots", cfg.simulation.snapshots},
                           {"max_events", cfg.simulation.max_events}};
  write_json(fs::path(c.out) / "manifest.json", manifest_for("simulate", common, cfg, parameters, argv));

  const Stopwatch clock;
  const ReplicaPlan plan{cfg.simulation.replicas, *common.seed, cfg.simulation.snapshots,
                         cfg.simulation.max_events, c.threads};
  const Ensemble ens = run_replicas(plan, cfg.params, cfg.initial);
  const double sim_seconds = clock.seconds();

  for (std::size_t s = 0; s < ens.times.size(); ++s) {
    CsvWriter w(fs::path(c.out) / ("configurations_" + std::to_string(s) + ".csv"),
                concat({"replica"}, coordinate_names("x", dim)));
    for (std::size_t r = 0; r < ens.replicas(); ++r) {
      for (const auto& p : ens.snapshots[s][r].positions) {
        std::vector<std::string> cells{std::to_string(r)};
        for (int i = 0; i < dim; ++i) cells.push_back(num(p[i]));
        w.row(cells);
      }
    }
  }

  const int l_need = std::max(est.l_max, est.n_max);
  const MomentSeries ms = moment_series(ens.snapshots, ens.times, partition, l_need, est.n_max);
  {
    CsvWriter w(fs::path(c.out) / "moments.csv", {"t", "cell_id", "l_or_n", "kind", "value", "stderr"});
    for (std::size_t s = 0; s < ms.times.size(); ++s) {
      for (std::size_t cell = 0; cell < ms.cells; ++cell) {
        for (int l = 1; l <= l_need; ++l) {
          const auto i = static_cast<std::size_t>(l - 1);
          w.row({num(ms.times[s]), std::to_string(cell), std::to_string(l), "factorial",
                 num(ms.factorial[s][cell][i]), num(ms.factorial_stderr[s][cell][i])});
        }
        for (int n = 1; n <= est.n_max; ++n) {
          const auto i = static_cast<std::size_t>(n - 1);
          w.row({num(ms.times[s]), std::to_string(cell), std::to_string(n), "raw",
                 num(ms.raw[s][cell][i]), num(ms.raw_stderr[s][cell][i])});
        }
      }
    }
  }
  {
    CsvWriter w(fs::path(c.out) / "k1.csv",
                concat(concat({"t"}, coordinate_names("bin_center_", dim)), {"value", "stderr"}));
    for (std::size_t s = 0; s < ens.times.size(); ++s) {
      const auto grid = density_estimate(ens.snapshots[s], cfg.params.window(), DensityBins{est.density_bins});
      for (std::size_t b = 0; b < grid.values.size(); ++b) {
        std::vector<std::string> cells{num(ens.times[s])};
        for (int i = 0; i < dim; ++i) cells.push_back(num(grid.centers[b][i]));
        cells.push_back(num(grid.values[b]));
        cells.push_back(num(grid.stderrs[b]));
        w.row(cells);
      }
    }
  }
  if (est.r_bins > 0) {
    CsvWriter w(fs::path(c.out) / "k2.csv", {"t", "r", "value", "stderr"});
    for (std::size_t s = 0; s < ens.times.size(); ++s) {
      const auto grid = pair_correlation_estimate(ens.snapshots[s], cfg.params.window(),
                                                  RadialBins{est.r_max, est.r_bins});
      for (std::size_t b = 0; b < grid.values.size(); ++b) {
        w.row({num(ens.times[s]), num(grid.centers[b][0]), num(grid.values[b]), num(grid.stderrs[b])});
      }
    }
  }

  json summary;
  std::uint64_t events = 0, births = 0, deaths = 0;
  double max_audit = 0.0, final_audit = 0.0;
  for (const auto& st : ens.stats) {
    events += st.events;
    births += st.births;
    deaths += st.deaths;
    max_audit = std::max(max_audit, st.max_audit_residual);
    final_audit = std::max(final_audit, st.final_audit_residual);
  }
  json mean_counts = json::array();
  for (std::size_t s = 0; s < ens.times.size(); ++s) {
    double total = 0.0;
    for (const auto& cfg_r : ens.snapshots[s]) total += static_cast<double>(cfg_r.size());
    mean_counts.push_back(total / static_cast<double>(std::max<std::size_t>(ens.replicas(), 1)));
  }
  summary["replicas"] = ens.replicas();
  summary["events"] = events;
  summary["births"] = births;
  summary["deaths"] = deaths;
  summary["max_audit_residual"] = max_audit;
  summary["final_audit_residual"] = final_audit;
  summary["mean_particle_count"] = mean_counts;
  summary["simulation_seconds"] = sim_seconds;
  summary["wall_time_seconds"] = clock.seconds();
  write_json(fs::path(c.out) / "summary.json", summary);
  out << "simulate: " << ens.replicas() << " replicas, " << events << " events, "
      << clock.seconds() << " s\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct HierarchyArgs {
  std::optional<std::string> closure;
  std::optional<int> n_max;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::string> mode;
  std::optional<int> points;
  std::vector<double> snapshots;
};

int cmd_hierarchy(const Common& c, const HierarchyArgs& a, const std::vector<std::string>& argv,
                  std::ostream& out) {
  ExperimentConfig cfg = load_config(c.config);
  auto& h = cfg.hierarchy;
  if (a.closure) h.options.closure = parse_closure(*a.closure);
  if (a.n_max) h.options.n_max = *a.n_max;
  if (a.dt) h.dt = *a.dt;
  if (a.t_end) h.t_end = *a.t_end;
  if (a.points) h.options.points_per_axis = *a.points;
  if (a.mode) {
    if (*a.mode == "homogeneous") {
      h.options.mode = HierarchyMode::homogeneous;
    } else if (*a.mode == "full_grid") {
      h.options.mode = HierarchyMode::full_grid;
    } else {
      throw ConfigError("--mode must be homogeneous or full_grid");
    }
  }
  std::vector<double> times = a.snapshots;
  if (times.empty()) {
    for (double t : cfg.simulation.snapshots) {
      if (t <= h.t_end) times.push_back(t);
    }
  }
  const ScalarField rho0 = initial_density_field(cfg, "hierarchy");
  const HierarchySolver solver(cfg.params, h.options);

  fs::create_directories(c.out);
  const json parameters = {{"closure", closure_name(h.options.closure)},
                           {"n_max", h.options.n_max},
                           {"dt", h.dt},
                           {"t_end", h.t_end},
                           {"mode", h.options.mode == HierarchyMode::homogeneous ? "homogeneous" : "full_grid"},
                           {"points_per_axis", h.options.points_per_axis},
                           {"snapshots", times}};
  write_json(fs::path(c.out) / "manifest.json", manifest_for("hierarchy", c, cfg, parameters, argv));

  const Stopwatch clock;
  const auto traj = solver.integrate(solver.poisson_state(rho0), h.t_end, h.dt, times);
  const int dim = cfg.params.dim();
  const auto& window = cfg.params.window();
  const bool homogeneous = h.options.mode == HierarchyMode::homogeneous;
  const int n = solver.points_per_axis();
  double spacing = window.min_side() / n;
  const double r_limit = homogeneous || window.periodic() ? window.min_side() / 2.0
                                                          : window.side(0) + 2.0 * window.buffer_width();
  const auto r_bins = static_cast<std::size_t>(std::floor(r_limit / spacing + 1e-9)) + 1;
  if (!homogeneous) spacing = std::abs(solver.position(1) - solver.position(0));

  CsvWriter w1(fs::path(c.out) / "k1.csv",
               concat(concat({"t"}, coordinate_names("bin_center_", dim)), {"value", "stderr", "source"}));
  CsvWriter w2(fs::path(c.out) / "k2.csv", {"t", "r", "value", "stderr", "source"});
  for (const auto& s : traj.snapshots) {
    if (homogeneous) {
      std::vector<std::string> cells{num(s.t)};
      for (int i = 0; i < dim; ++i) cells.push_back(num(window.side(i) / 2.0));
      cells.insert(cells.end(), {num(s.k1[0]), num(0.0), "hierarchy"});
      w1.row(cells);
    } else {
      for (std::size_t i = 0; i < s.k1.size(); ++i) {
        w1.row({num(s.t), num(solver.position(i)), num(s.k1[i]), num(0.0), "hierarchy"});
      }
    }
    std::vector<double> sum(r_bins, 0.0);
    std::vector<double> weight(r_bins, 0.0);
    auto add = [&](double r, double v) {
      const auto b = static_cast<std::size_t>(std::llround(r / spacing));
      if (b < r_bins) {
        sum[b] += v;
        weight[b] += 1.0;
      }
    };
    if (homogeneous) {
      for (std::size_t j = 0; j < solver.k2_size(); ++j) {
        add(norm(solver.separation(j), dim), s.k2.empty() ? s.k1[0] * s.k1[0] : s.k2[j]);
      }
      if (s.k2.empty()) {
        for (std::size_t b = 0; b < r_bins; ++b) {
          if (weight[b] == 0.0) {
            sum[b] = s.k1[0] * s.k1[0];
            weight[b] = 1.0;
          }
        }
      }
    } else {
      const std::size_t m = s.k1.size();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const double xi = solver.position(i), xj = solver.position(j);
          const double r = window.periodic() ? window.distance({xi, 0, 0}, {xj, 0, 0}) : std::abs(xi - xj);
          add(r, s.k2.empty() ? s.k1[i] * s.k1[j] : s.k2[i * m + j]);
        }
      }
    }
    for (std::size_t b = 0; b < r_bins; ++b) {
      if (weight[b] > 0.0) {
        w2.row({num(s.t), num(static_cast<double>(b) * spacing), num(sum[b] / weight[b]), num(0.0),
                "hierarchy"});
      }
    }
  }
  json summary = {{"steps", traj.steps},
                  {"clip_events", traj.clip_events},
                  {"clip_mass", traj.clip_mass},
                  {"kernel_mass_discrete", solver.kernel_mass()},
                  {"kernel_mass", cfg.params.a_integral()},
                  {"wall_time_seconds", clock.seconds()}};
  write_json(fs::path(c.out) / "summary.json", summary);
  out << "hierarchy: " << traj.steps << " steps, " << clock.seconds() << " s\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SurgailisArgs {
  std::vector<double> times;
  int points = 64;
};

int cmd_surgailis(const Common& c, const SurgailisArgs& a, const std::vector<std::string>& argv,
                  std::ostream& out) {
  const ExperimentConfig cfg = load_config(c.config);
  std::vector<double> times = a.times.empty() ? cfg.simulation.snapshots : a.times;
  for (double t : times) {
    if (!(t >= 0.0)) throw ConfigError("times must be >= 0");
  }
  if (a.points < 1) throw ConfigError("--points must be >= 1");
  const int dim = cfg.params.dim();
  const auto& window = cfg.params.window();

  fs::create_directories(c.out);
  const json parameters = {{"times", times}, {"points_per_axis", a.points}};
  write_json(fs::path(c.out) / "manifest.json", manifest_for("surgailis", c, cfg, parameters, argv));

  const Stopwatch clock;
  const auto centers = cell_centers(window.core(), dim, a.points);
  const bool have_density = cfg.initial.kind != InitialCondition::Kind::explicit_list;
  if (have_density) {
    const ScalarField rho0 = initial_density_field(cfg, "surgailis");
    CsvWriter w(fs::path(c.out) / "density.csv", concat(concat({"t"}, coordinate_names("x", dim)), {"density"}));
    for (double t : times) {
      const SurgailisFlow flow(cfg.params.rates(), t);
      const auto rho = poisson_density_flow(rho0, flow, centers);
      for (std::size_t i = 0; i < centers.size(); ++i) {
        std::vector<std::string> cells{num(t)};
        for (int k = 0; k < dim; ++k) cells.push_back(num(centers[i][k]));
        cells.push_back(num(rho[i]));
        w.row(cells);
      }
    }
  }
  {
    CsvWriter w(fs::path(c.out) / "k1.csv",
                concat(concat({"t"}, coordinate_names("bin_center_", dim)), {"value", "stderr", "source"}));
    const auto& bins = cfg.estimators.density_bins;
    std::vector<int> counts(bins.begin(), bins.begin() + dim);
    Box unit{};
    for (int i = 0; i < dim; ++i) unit.upper[i] = window.side(i);
    for (double t : times) {
      std::array<int, 3> idx{};
      while (true) {
        Point center{};
        for (int i = 0; i < dim; ++i) center[i] = window.side(i) / bins[i] * (idx[i] + 0.5);
        std::vector<std::string> cells{num(t)};
        for (int i = 0; i < dim; ++i) cells.push_back(num(center[i]));
        cells.push_back(num(oracle_density(cfg, t, bin_box(center, window, bins))));
        cells.push_back(num(0.0));
        cells.push_back("surgailis");
        w.row(cells);
        int axis = dim - 1;
        while (axis >= 0 && ++idx[axis] >= bins[axis]) {
          idx[axis] = 0;
          --axis;
        }
        if (axis < 0) break;
      }
    }
  }
  json summary = {{"times", times},
                  {"density_grid", have_density},
                  {"competition_ignored", !cfg.params.kernel().is_zero()},
                  {"wall_time_seconds", clock.seconds()}};
  write_json(fs::path(c.out) / "summary.json", summary);
  out << "surgailis: " << times.size() << " times\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct BoundsArgs {
  std::optional<std::size_t> schedule;
  double kappa = kDefaultKappa;
  std::optional<double> horizon;
  std::vector<double> moment_system;
  std::optional<double> theta_norm;
  std::optional<double> theta_prime;
  int t_points = 101;
};

int cmd_bounds(const Common& c, const BoundsArgs& a, const std::vector<std::string>& argv,
               std::ostream& out) {
  const ExperimentConfig cfg = load_config(c.config);
  const auto& p = cfg.params;
  const int dim = p.dim();
  const RateNorms norms = RateNorms::of(p);
  if (!a.moment_system.empty() && a.moment_system.size() != 2) {
    throw ConfigError("--moment-system takes L and t_end");
  }

  fs::create_directories(c.out);
  json parameters = {{"kappa", a.kappa}, {"t_points", a.t_points}};
  if (a.schedule) parameters["schedule"] = *a.schedule;
  if (a.horizon) parameters["horizon"] = *a.horizon;
  if (!a.moment_system.empty()) parameters["moment_system"] = a.moment_system;
  if (a.theta_norm) parameters["theta_norm"] = *a.theta_norm;
  if (a.theta_prime) parameters["theta_prime"] = *a.theta_prime;
  write_json(fs::path(c.out) / "manifest.json", manifest_for("bounds", c, cfg, parameters, argv));

  const Stopwatch clock;
  json report;
  const double theta = p.theta0();
  const double theta_prime = a.theta_prime.value_or(theta + 1.0);
  report["norms"] = {{"a_integral", norms.a_integral},
                     {"a_sup", norms.a_sup},
                     {"a_origin", p.kernel().at_origin()},
                     {"b_sup", norms.b_sup},
                     {"m_sup", norms.m_sup}};
  report["theta0"] = theta;
  const auto op = operator_norm_bound(theta, theta_prime, norms);
  report["operator_norm"] = {{"theta", theta},
                             {"theta_prime", theta_prime},
                             {"total", op.total},
                             {"diagonal", op.diagonal},
                             {"off_diagonal", op.off_diagonal}};
  report["existence_time"] = existence_time(theta, theta_prime, norms);
  report["tau"] = tau(theta, norms);

  const ScalarField k0 = cfg.initial.kind == InitialCondition::Kind::poisson
                             ? cfg.initial.density
                             : ScalarField::constant(0.0);
  if (const auto density = stationary_density_bound(p, k0)) {
    report["stationary_density"] = {{"available", true}, {"global", density->global}};
  } else {
    const double t_ref = cfg.hierarchy.t_end;
    report["stationary_density"] = {
        {"available", false},
        {"reason", "a(0) = 0"},
        {"theta_growth", {{"t", t_ref}, {"theta", surgailis_theta_growth(theta, t_ref, norms)}}}};
  }
  const double m_star = p.m().inf_over(p.window().core(), dim);
  if (const auto ts = surgailis_uniform_theta(theta, m_star, norms)) {
    report["surgailis_uniform_theta"] = {{"m_star", m_star}, {"theta", *ts}};
  }

  if (a.schedule) {
    const Schedule s = continuation_schedule(theta, a.kappa, norms, *a.schedule);
    CsvWriter w(fs::path(c.out) / "schedule.csv", {"n", "T_n", "theta_n", "cumulative", "identity_residual"});
    for (const auto& e : s.entries) {
      w.row({std::to_string(e.n), num(e.step), num(e.theta), num(e.cumulative), num(e.identity_residual)});
    }
    report["schedule"] = {{"steps", s.entries.size()},
                          {"kappa", s.kappa},
                          {"seed_step", s.seed_step},
                          {"total", s.total()},
                          {"final_theta", s.entries.empty() ? theta : s.entries.back().theta},
                          {"max_identity_residual", s.max_identity_residual}};
  }
  if (a.horizon) {
    const auto s = schedule_until(theta, a.kappa, norms, *a.horizon);
    report["horizon_search"] = {{"horizon", *a.horizon},
                                {"reached", s.has_value()},
                                {"steps", s ? json(s->entries.size()) : json(nullptr)},
                                {"max_identity_residual", s ? json(s->max_identity_residual) : json(nullptr)}};
  }
  if (!a.moment_system.empty()) {
    const int L = static_cast<int>(a.moment_system[0]);
    const double t_end = a.moment_system[1];
    if (L < 1 || L > kMaxMomentOrder) throw ConfigError("moment order must lie in 1..8");
    if (!(t_end >= 0.0) || a.t_points < 2) throw ConfigError("moment system needs t_end >= 0 and >= 2 points");
    std::vector<double> grid;
    for (int k = 0; k < a.t_points; ++k) grid.push_back(t_end * k / (a.t_points - 1));
    const CellPartition partition(p.window(), cfg.estimators.cell_side);
    CsvWriter w(fs::path(c.out) / "moment_bounds.csv", {"t", "cell_id", "l", "value", "closed_bound"});
    json cells = json::array();
    for (std::size_t ci = 0; ci < partition.size(); ++ci) {
      const Box& cell = partition.cell(ci);
      const double a_cell = cell_infimum(difference_box(cell, dim), p.kernel());
      const double b_cell = p.b().integral(cell, dim);
      const auto q0 = initial_factorials(cfg, cell, L);
      const double th = std::max(theta, theta_from_moments(q0, cell.volume(dim)));
      if (!(a_cell > 0.0)) {
        cells.push_back({{"cell_id", ci}, {"a_cell", a_cell}, {"available", false}});
        continue;
      }
      const auto sys = moment_bound_system(q0, b_cell, a_cell, grid, cell.volume(dim), th);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        for (int l = 1; l <= L; ++l) {
          const auto i = static_cast<std::size_t>(l - 1);
          w.row({num(grid[k]), std::to_string(ci), std::to_string(l), num(sys.trajectories[i][k]),
                 num(sys.closed_bounds[i])});
        }
      }
      cells.push_back({{"cell_id", ci},
                       {"a_cell", a_cell},
                       {"b_cell", b_cell},
                       {"theta", th},
                       {"kappa_cell", sys.kappa_cell},
                       {"closed_bounds", sys.closed_bounds},
                       {"available", true}});
    }
    report["moment_system"] = cells;
  }
  if (a.theta_norm) {
    if (cfg.initial.kind == InitialCondition::Kind::explicit_list) {
      throw ConfigError("theta norm needs a poisson or empty initial condition");
    }
    std::vector<std::vector<double>> orders;
    const double rho = k0.sup();
    for (int n = 1; n <= kMaxMomentOrder; ++n) orders.push_back({std::pow(rho, n)});
    const auto tn = contpop::theta_norm(orders, *a.theta_norm);
    report["theta_norm"] = {{"theta", tn.theta}, {"per_order", tn.per_order}, {"norm", tn.norm},
                            {"orders", kMaxMomentOrder}};
  }
  write_json(fs::path(c.out) / "bounds.json", report);
  write_json(fs::path(c.out) / "summary.json", {{"wall_time_seconds", clock.seconds()}});
  out << report.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct CheckResult {
  explicit CheckResult(std::string n) : name(std::move(n)) {}

  std::string name;
  bool applicable = true;
  bool passed = true;
  std::size_t comparisons = 0;
  double worst_z = -std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  std::string note;

  // One-sided comparison value <= bound (+ z sigma).
  void upper(double value, double bound, double sigma, double z) {
    ++comparisons;
    const double gap = bound - value;
    min_gap = std::min(min_gap, gap);
    if (sigma > 0.0) worst_z = std::max(worst_z, -gap / sigma);
    if (value > bound + z * sigma + 1e-12 * std::max(1.0, std::abs(bound))) passed = false;
  }

  json to_json() const {
    json j = {{"name", name}, {"applicable", applicable}, {"passed", passed}, {"comparisons", comparisons}};
    j["min_gap"] = std::isfinite(min_gap) ? json(min_gap) : json(nullptr);
    j["worst_z"] = std::isfinite(worst_z) ? json(worst_z) : json(nullptr);
    if (!note.empty()) j["note"] = note;
    return j;
  }
};

struct MomentRow {
  double t;
  std::size_t cell;
  int order;
  bool factorial;
  double value;
  double stderr_;
};

int cmd_verify(const Common& c, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_config(c.config);
  const fs::path run(c.out);
  const json manifest = read_json(run / "manifest.json");
  if (manifest.value("subcommand", "") != "simulate") {
    throw ConfigError("verify needs the output directory of a simulate run");
  }
  if (manifest.value("config_hash", "") != hex64(cfg.content_hash)) {
    err << "verification refused: config hash " << hex64(cfg.content_hash)
        << " does not match the run manifest (" << manifest.value("config_hash", "") << ")\n";
    return kConfigError;
  }
  const auto& p = cfg.params;
  const int dim = p.dim();
  const auto& window = p.window();

  const CsvTable k1 = read_csv(run / "k1.csv");
  const CsvTable mom = read_csv(run / "moments.csv");
  const std::size_t k1_t = k1.column("t"), k1_v = k1.column("value"), k1_s = k1.column("stderr");
  std::vector<std::size_t> k1_x;
  for (const auto& name : coordinate_names("bin_center_", dim)) k1_x.push_back(k1.column(name));

  std::vector<MomentRow> moments;
  {
    const auto ct = mom.column("t"), cc = mom.column("cell_id"), cl = mom.column("l_or_n"),
               ck = mom.column("kind"), cv = mom.column("value"), cs = mom.column("stderr");
    for (const auto& r : mom.rows) {
      if (r[ck] != "factorial" && r[ck] != "raw") throw ConfigError("moments.csv: unknown kind " + r[ck]);
      moments.push_back({to_double(r[ct]), static_cast<std::size_t>(to_double(r[cc])),
                         static_cast<int>(to_double(r[cl])), r[ck] == "factorial", to_double(r[cv]),
                         to_double(r[cs])});
    }
  }

  std::vector<CheckResult> checks;

  // Competition-free runs must agree with the explicit flow.
  {
    CheckResult ck{"oracle_equivalence"};
    if (!p.kernel().is_zero()) {
      ck.applicable = false;
      ck.note = "competition kernel present";
    } else {
      const double z = critical_z(2 * k1.rows.size());
      for (const auto& r : k1.rows) {
        Point center{};
        for (int i = 0; i < dim; ++i) center[i] = to_double(r[k1_x[static_cast<std::size_t>(i)]]);
        const double oracle = oracle_density(cfg, to_double(r[k1_t]), bin_box(center, window, cfg.estimators.density_bins));
        const double v = to_double(r[k1_v]), s = to_double(r[k1_s]);
        ck.upper(v, oracle, s, z);
        ck.upper(-v, -oracle, s, z);
      }
      ck.note = "two-sided, z = " + num(z);
    }
    checks.push_back(ck);
  }
  // Domination by the competition-free flow.
  {
    CheckResult ck{"domination"};
    const double z = critical_z(k1.rows.size());
    for (const auto& r : k1.rows) {
      Point center{};
      for (int i = 0; i < dim; ++i) center[i] = to_double(r[k1_x[static_cast<std::size_t>(i)]]);
      const double oracle = oracle_density(cfg, to_double(r[k1_t]), bin_box(center, window, cfg.estimators.density_bins));
      ck.upper(to_double(r[k1_v]), oracle, to_double(r[k1_s]), z);
    }
    ck.note = "z = " + num(z);
    checks.push_back(ck);
  }
  // Cell moment bounds: closed form and comparison trajectories.
  {
    CheckResult closed{"moment_bounds_closed"};
    CheckResult ode{"moment_bounds_ode"};
    const CellPartition partition(window, cfg.estimators.cell_side);
    const double a_cell = partition.size() ? cell_infimum(difference_box(partition.cell(0), dim), p.kernel()) : 0.0;
    if (!(a_cell > 0.0)) {
      closed.applicable = ode.applicable = false;
      closed.note = ode.note = "a_cell = 0";
    } else {
      std::size_t n_fac = 0;
      int l_max = 0;
      double t_first = std::numeric_limits<double>::infinity();
      for (const auto& m : moments) {
        if (!m.factorial) continue;
        ++n_fac;
        l_max = std::max(l_max, m.order);
        t_first = std::min(t_first, m.t);
      }
      const double z = critical_z(2 * n_fac);
      std::map<std::size_t, std::vector<double>> q0;
      for (std::size_t ci = 0; ci < partition.size(); ++ci) {
        q0[ci] = initial_factorials(cfg, partition.cell(ci), l_max);
      }
      if (t_first == 0.0) {
        for (const auto& m : moments) {
          if (m.factorial && m.t == 0.0 && m.cell < partition.size()) {
            q0[m.cell][static_cast<std::size_t>(m.order - 1)] = m.value;
          }
        }
      }
      std::map<std::size_t, MomentBoundSystem> systems;
      std::vector<double> times;
      for (const auto& m : moments) times.push_back(m.t);
      std::sort(times.begin(), times.end());
      times.erase(std::unique(times.begin(), times.end()), times.end());
      double theta_used = p.theta0();
      for (std::size_t ci = 0; ci < partition.size(); ++ci) {
        const Box& cell = partition.cell(ci);
        const double th = std::max(p.theta0(), theta_from_moments(q0[ci], cell.volume(dim)));
        theta_used = std::max(theta_used, th);
        systems.emplace(ci, moment_bound_system(q0[ci], p.b().integral(cell, dim),
                                                cell_infimum(difference_box(cell, dim), p.kernel()),
                                                times, cell.volume(dim), th));
      }
      for (const auto& m : moments) {
        if (!m.factorial || m.cell >= partition.size()) continue;
        const auto& sys = systems.at(m.cell);
        const auto k = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), m.t) - times.begin());
        const auto i = static_cast<std::size_t>(m.order - 1);
        closed.upper(m.value, sys.closed_bounds[i], m.stderr_, z);
        ode.upper(m.value, sys.trajectories[i][k], m.stderr_, z);
      }
      closed.note = "a_cell = " + num(a_cell) + ", theta = " + num(theta_used) + ", z = " + num(z);
      ode.note = closed.note;
    }
    checks.push_back(closed);
    checks.push_back(ode);
  }
  // Density bound from effective mortality.
  {
    CheckResult ck{"density_bound"};
    const double a0 = p.kernel().at_origin();
    if (!(a0 > 0.0)) {
      ck.applicable = false;
      ck.note = "a(0) = 0";
    } else {
      double k0 = 0.0;
      if (cfg.initial.kind == InitialCondition::Kind::poisson) {
        k0 = cfg.initial.density.sup();
      } else if (cfg.initial.kind == InitialCondition::Kind::explicit_list) {
        for (const auto& r : k1.rows) {
          if (to_double(r[k1_t]) == 0.0) k0 = std::max(k0, to_double(r[k1_v]));
        }
      }
      const double bound = std::max(k0, p.b_sup() / a0);
      const double z = critical_z(k1.rows.size());
      for (const auto& r : k1.rows) ck.upper(to_double(r[k1_v]), bound, to_double(r[k1_s]), z);
      ck.note = "bound = " + num(bound) + ", z = " + num(z);
    }
    checks.push_back(ck);
  }
  // Raw moments recomputed from factorial moments.
  {
    CheckResult ck{"stirling_identity"};
    std::map<std::pair<double, std::size_t>, std::map<int, double>> fac;
    for (const auto& m : moments) {
      if (m.factorial) fac[{m.t, m.cell}][m.order] = m.value;
    }
    const auto& table = StirlingTable::shared();
    double worst = 0.0;
    for (const auto& m : moments) {
      if (m.factorial) continue;
      ++ck.comparisons;
      const auto it = fac.find({m.t, m.cell});
      double rebuilt = 0.0;
      bool complete = it != fac.end();
      for (int l = 1; complete && l <= m.order; ++l) {
        const auto f = it->second.find(l);
        if (f == it->second.end()) {
          complete = false;
          break;
        }
        rebuilt += (factorial(l) * table(m.order, l)).convert_to<double>() * f->second;
      }
      if (!complete) {
        ck.passed = false;
        ck.note = "factorial rows missing";
        continue;
      }
      const double rel = std::abs(rebuilt - m.value) / std::max(1.0, std::abs(m.value));
      worst = std::max(worst, rel);
      if (rel > 1e-9) ck.passed = false;
    }
    ck.min_gap = 1e-9 - worst;
    if (ck.note.empty()) ck.note = "max relative deviation = " + num(worst);
    checks.push_back(ck);
  }

  bool all = true;
  json report = json::array();
  for (const auto& ck : checks) {
    all = all && ck.passed;
    report.push_back(ck.to_json());
    out << (ck.applicable ? (ck.passed ? "PASS " : "FAIL ") : "SKIP ") << ck.name;
    if (ck.applicable && std::isfinite(ck.min_gap)) out << " min_gap=" << num(ck.min_gap);
    if (ck.applicable && std::isfinite(ck.worst_z)) out << " worst_z=" << num(ck.worst_z);
    if (!ck.note.empty()) out << " (" << ck.note << ")";
    out << '\n';
  }
  write_json(run / "verify.json", {{"config_hash", hex64(cfg.content_hash)}, {"passed", all}, {"checks", report}});
  return all ? kOk : kFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial immigration-death process with competition: simulation, hierarchy and bounds"};
  app.require_subcommand(1);
  Common common;
  SimulateArgs sim;
  HierarchyArgs hier;
  SurgailisArgs surg;
  BoundsArgs bnd;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", common.config, "Experiment JSON file")->required();
    auto* o = sub->add_option("--out", common.out, "Output directory");
    if (needs_out) o->required();
    sub->add_option("--seed", common.seed, "Random seed (falls back to CONTPOP_SEED)");
    sub->add_option("--threads", common.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  };

  auto* s_sim = app.add_subcommand("simulate", "Run replicas of the stochastic process");
  add_common(s_sim, true);
  s_sim->add_option("--replicas", sim.replicas, "Number of replicas");
  s_sim->add_option("--snapshots", sim.snapshots, "Snapshot times")->delimiter(',');
  s_sim->add_option("--max-events", sim.max_events, "Event cap per replica");

  auto* s_hier = app.add_subcommand("hierarchy", "Integrate the truncated correlation hierarchy");
  add_common(s_hier, true);
  s_hier->add_option("--closure", hier.closure, "zero-third-cumulant | kirkwood | mean-field");
  s_hier->add_option("--nmax", hier.n_max, "Truncation order (1 or 2)");
  s_hier->add_option("--dt", hier.dt, "Time step");
  s_hier->add_option("--t-end", hier.t_end, "Final time");
  s_hier->add_option("--mode", hier.mode, "homogeneous | full_grid");
  s_hier->add_option("--points", hier.points, "Grid points per axis");
  s_hier->add_option("--snapshots", hier.snapshots, "Output times")->delimiter(',');

  auto* s_surg = app.add_subcommand("surgailis", "Evaluate the competition-free flow");
  add_common(s_surg, true);
  s_surg->add_option("--times", surg.times, "Evaluation times")->delimiter(',');
  s_surg->add_option("--points", surg.points, "Density grid points per axis");

  auto* s_bnd = app.add_subcommand("bounds", "Evaluate analytic bounds and schedules");
  add_common(s_bnd, true);
  s_bnd->add_option("--schedule", bnd.schedule, "Number of continuation steps");
  s_bnd->add_option("--kappa", bnd.kappa, "Schedule fraction in (0, 1/2)");
  s_bnd->add_option("--horizon", bnd.horizon, "Search for a schedule exceeding this horizon");
  s_bnd->add_option("--moment-system", bnd.moment_system, "Order L and final time")->expected(2);
  s_bnd->add_option("--theta-norm", bnd.theta_norm, "Theta for the initial-state norm");
  s_bnd->add_option("--theta-prime", bnd.theta_prime, "Target theta for operator bounds");
  s_bnd->add_option("--t-points", bnd.t_points, "Time grid size for the moment system");

  auto* s_ver = app.add_subcommand("verify", "Cross-check a completed simulate run");
  add_common(s_ver, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    if (s_sim->parsed()) return cmd_simulate(common, sim, args, out);
    if (s_hier->parsed()) return cmd_hierarchy(common, hier, args, out);
    if (s_surg->parsed()) return cmd_surgailis(common, surg, args, out);
    if (s_bnd->parsed()) return cmd_bounds(common, bnd, args, out);
    if (s_ver->parsed()) return cmd_verify(common, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CapacityError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const CappedRunError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace contpop::cli
