#include "contpop/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "contpop/errors.hpp"

namespace contpop {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* k) { return it.key() == k; });
    if (!ok) unknown.push_back(it.key());
  }
  if (!unknown.empty()) {
    std::string msg = where + ": unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return get_or<T>(j, key, T{}, where);
}

Point point_from(const std::vector<double>& v, int dim, const std::string& where) {
  if (static_cast<int>(v.size()) != dim) {
    throw ConfigError(where + ": expected " + std::to_string(dim) + " coordinates");
  }
  Point p{};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

std::vector<double> point_to(const Point& p, int dim) {
  return {p.begin(), p.begin() + dim};
}

// Re-throws library validation failures as configuration errors.
template <class F>
auto guarded(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::length_error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ScalarField field_from_json(const json& j, int dim, const std::string& where) {
  if (j.is_number()) return ScalarField::constant(j.get<double>());
  check_keys(j, {"kind", "value", "lower", "upper", "counts", "values"}, where);
  const auto kind = require<std::string>(j, "kind", where);
  return guarded(where, [&] {
    if (kind == "constant") {
      check_keys(j, {"kind", "value"}, where);
      return ScalarField::constant(require<double>(j, "value", where));
    }
    if (kind == "box") {
      check_keys(j, {"kind", "value", "lower", "upper"}, where);
      Box box{point_from(require<std::vector<double>>(j, "lower", where), dim, where + ".lower"),
              point_from(require<std::vector<double>>(j, "upper", where), dim, where + ".upper")};
      return ScalarField::box(require<double>(j, "value", where), box);
    }
    if (kind == "grid") {
      check_keys(j, {"kind", "lower", "upper", "counts", "values"}, where);
      Box box{point_from(require<std::vector<double>>(j, "lower", where), dim, where + ".lower"),
              point_from(require<std::vector<double>>(j, "upper", where), dim, where + ".upper")};
      auto counts = require<std::vector<int>>(j, "counts", where);
      if (static_cast<int>(counts.size()) != dim) throw ConfigError(where + ".counts: wrong length");
      return ScalarField::grid(box, std::move(counts), require<std::vector<double>>(j, "values", where));
    }
    throw ConfigError(where + ": unknown field kind '" + kind + "'");
  });
}

json field_to_json(const ScalarField& f, int dim) {
  switch (f.kind()) {
    case ScalarField::Kind::constant:
      return {{"kind", "constant"}, {"value", f.constant_value()}};
    case ScalarField::Kind::box:
      return {{"kind", "box"},
              {"value", f.sup()},
              {"lower", point_to(f.support().lower, dim)},
              {"upper", point_to(f.support().upper, dim)}};
    case ScalarField::Kind::grid:
      return {{"kind", "grid"},
              {"lower", point_to(f.support().lower, dim)},
              {"upper", point_to(f.support().upper, dim)},
              {"counts", f.counts()},
              {"values", f.values()}};
  }
  return {};
}

CompetitionKernel kernel_from_json(const json& j, int dim) {
  const std::string where = "kernel";
  check_keys(j, {"kind", "amplitude", "range", "r_cut", "spacing", "values"}, where);
  const auto kind = require<std::string>(j, "kind", where);
  return guarded(where, [&] {
    if (kind == "zero") return CompetitionKernel{};
    if (kind == "gaussian" || kind == "exponential") {
      const double amp = require<double>(j, "amplitude", where);
      const double range = require<double>(j, "range", where);
      const double r_cut = get_or<double>(j, "r_cut", -1.0, where);
      return kind == "gaussian" ? CompetitionKernel::gaussian(dim, amp, range, r_cut)
                                : CompetitionKernel::exponential(dim, amp, range, r_cut);
    }
    if (kind == "top_hat") {
      return CompetitionKernel::top_hat(dim, require<double>(j, "amplitude", where),
                                        require<double>(j, "range", where));
    }
    if (kind == "tabulated") {
      return CompetitionKernel::tabulated(dim, require<double>(j, "spacing", where),
                                          require<std::vector<double>>(j, "values", where));
    }
    throw ConfigError(where + ": unknown kernel kind '" + kind + "'");
  });
}

json kernel_to_json(const CompetitionKernel& k) {
  if (k.is_zero()) return {{"kind", "zero"}};
  switch (k.kind()) {
    case KernelKind::gaussian:
    case KernelKind::exponential:
      return {{"kind", k.kind_name()},
              {"amplitude", k.amplitude()},
              {"range", k.range()},
              {"r_cut", k.r_cut()}};
    case KernelKind::top_hat:
      return {{"kind", "top_hat"}, {"amplitude", k.amplitude()}, {"range", k.r_cut()}};
    case KernelKind::tabulated:
      return {{"kind", "tabulated"}, {"spacing", k.table_spacing()}, {"values", k.table()}};
  }
  return {};
}

namespace {
constexpr std::initializer_list<const char*> kModelKeys = {
    "dimension", "sides", "boundary", "buffer_width", "kernel", "b", "m", "theta0"};
}

ModelParams model_from_json(const json& j) {
  const std::string where = "model";
  check_keys(j, kModelKeys, where);
  const int dim = require<int>(j, "dimension", where);
  if (dim < 1 || dim > 3) throw ConfigError("dimension must be 1, 2 or 3");
  auto sides = require<std::vector<double>>(j, "sides", where);
  const auto boundary_name = get_or<std::string>(j, "boundary", "periodic", where);
  Boundary boundary;
  if (boundary_name == "periodic") {
    boundary = Boundary::periodic;
  } else if (boundary_name == "absorbing") {
    boundary = Boundary::absorbing_buffer;
  } else {
    throw ConfigError("boundary must be 'periodic' or 'absorbing'");
  }
  const double buffer = get_or<double>(j, "buffer_width", 0.0, where);
  return guarded(where, [&] {
    Window window(dim, std::move(sides), boundary, buffer);
    CompetitionKernel kernel =
        j.contains("kernel") ? kernel_from_json(j.at("kernel"), dim) : CompetitionKernel{};
    RateField rates;
    if (j.contains("b")) rates.b = field_from_json(j.at("b"), dim, "b");
    if (j.contains("m")) rates.m = field_from_json(j.at("m"), dim, "m");
    return ModelParams(std::move(window), std::move(kernel), std::move(rates),
                       get_or<double>(j, "theta0", 0.0, where));
  });
}

json model_to_json(const ModelParams& p) {
  const int dim = p.dim();
  return {{"dimension", dim},
          {"sides", p.window().sides()},
          {"boundary", p.window().periodic() ? "periodic" : "absorbing"},
          {"buffer_width", p.window().buffer_width()},
          {"kernel", kernel_to_json(p.kernel())},
          {"b", field_to_json(p.b(), dim)},
          {"m", field_to_json(p.m(), dim)},
          {"theta0", p.theta0()}};
}

namespace {

InitialCondition initial_from_json(const json& j, int dim) {
  const std::string where = "initial";
  check_keys(j, {"kind", "density", "points"}, where);
  const auto kind = require<std::string>(j, "kind", where);
  if (kind == "empty") return InitialCondition::empty();
  if (kind == "poisson") {
    return InitialCondition::poisson(field_from_json(j.at("density"), dim, "initial.density"));
  }
  if (kind == "points") {
    std::vector<Point> pts;
    for (const auto& row : require<std::vector<std::vector<double>>>(j, "points", where)) {
      pts.push_back(point_from(row, dim, "initial.points"));
    }
    return InitialCondition::explicit_list(std::move(pts));
  }
  throw ConfigError("initial: unknown kind '" + kind + "'");
}

EstimatorSection estimators_from_json(const json& j, int dim) {
  const std::string where = "estimators";
  check_keys(j, {"cell_side", "l_max", "n_max", "density_bins", "r_max", "r_bins"}, where);
  EstimatorSection s;
  s.cell_side = get_or(j, "cell_side", s.cell_side, where);
  s.l_max = get_or(j, "l_max", s.l_max, where);
  s.n_max = get_or(j, "n_max", s.n_max, where);
  if (j.contains("density_bins")) {
    const auto bins = j.at("density_bins").get<std::vector<int>>();
    if (static_cast<int>(bins.size()) != dim) throw ConfigError("estimators.density_bins: wrong length");
    std::copy(bins.begin(), bins.end(), s.density_bins.begin());
  } else {
    for (int a = dim; a < 3; ++a) s.density_bins[static_cast<std::size_t>(a)] = 1;
  }
  s.r_max = get_or(j, "r_max", s.r_max, where);
  s.r_bins = get_or(j, "r_bins", s.r_bins, where);
  if (s.l_max < 1 || s.n_max < 1) throw ConfigError("estimators: moment orders must be >= 1");
  return s;
}

HierarchySection hierarchy_from_json(const json& j) {
  const std::string where = "hierarchy";
  check_keys(j, {"mode", "points_per_axis", "n_max", "closure", "dt", "t_end"}, where);
  HierarchySection s;
  const auto mode = get_or<std::string>(j, "mode", "homogeneous", where);
  if (mode == "homogeneous") {
    s.options.mode = HierarchyMode::homogeneous;
  } else if (mode == "full_grid") {
    s.options.mode = HierarchyMode::full_grid;
  } else {
    throw ConfigError("hierarchy.mode must be 'homogeneous' or 'full_grid'");
  }
  s.options.points_per_axis = get_or(j, "points_per_axis", s.options.points_per_axis, where);
  s.options.n_max = get_or(j, "n_max", s.options.n_max, where);
  if (j.contains("closure")) {
    s.options.closure = guarded(where, [&] { return parse_closure(j.at("closure").get<std::string>()); });
  }
  s.dt = get_or(j, "dt", s.dt, where);
  s.t_end = get_or(j, "t_end", s.t_end, where);
  return s;
}

SimulationSection simulation_from_json(const json& j) {
  const std::string where = "simulation";
  check_keys(j, {"replicas", "snapshots", "max_events"}, where);
  SimulationSection s;
  s.replicas = get_or<std::size_t>(j, "replicas", s.replicas, where);
  s.snapshots = get_or(j, "snapshots", s.snapshots, where);
  s.max_events = get_or<std::uint64_t>(j, "max_events", s.max_events, where);
  return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  std::vector<const char*> allowed(kModelKeys);
  for (const char* k : {"initial", "estimators", "hierarchy", "simulation"}) allowed.push_back(k);
  std::vector<std::string> unknown;
  if (!doc.is_object()) throw ConfigError(source + ": top level must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      unknown.push_back(it.key());
    }
  }
  if (!unknown.empty()) {
    std::string msg = source + ": unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  json model = json::object();
  for (const char* k : kModelKeys) {
    if (doc.contains(k)) model[k] = doc[k];
  }
  ModelParams params = model_from_json(model);
  const int dim = params.dim();
  ExperimentConfig cfg{std::move(params),
                       doc.contains("initial") ? initial_from_json(doc["initial"], dim)
                                               : InitialCondition::empty(),
                       doc.contains("estimators") ? estimators_from_json(doc["estimators"], dim)
                                                  : estimators_from_json(json::object(), dim),
                       doc.contains("hierarchy") ? hierarchy_from_json(doc["hierarchy"])
                                                 : HierarchySection{},
                       doc.contains("simulation") ? simulation_from_json(doc["simulation"])
                                                  : SimulationSection{},
                       source,
                       fnv1a64(text)};
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace contpop
