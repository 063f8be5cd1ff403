#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "contpop/hierarchy.hpp"
#include "contpop/model.hpp"
#include "contpop/simulator.hpp"

namespace contpop {

struct EstimatorSection {
  double cell_side = 1.0;
  int l_max = 4;
  int n_max = 4;
  std::array<int, 3> density_bins{10, 1, 1};
  double r_max = 1.0;
  int r_bins = 10;
};

struct HierarchySection {
  HierarchyOptions options;
  double dt = 1e-3;
  double t_end = 1.0;
};

struct SimulationSection {
  std::size_t replicas = 1;
  std::vector<double> snapshots{0.0};
  std::uint64_t max_events = 100'000'000;
};

/// One experiment: model, initial state and per-subcommand settings.
struct ExperimentConfig {
  ModelParams params;
  InitialCondition initial;
  EstimatorSection estimators;
  HierarchySection hierarchy;
  SimulationSection simulation;
  std::string source_path;
  std::uint64_t content_hash = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

ScalarField field_from_json(const nlohmann::json& j, int dim, const std::string& where);
nlohmann::json field_to_json(const ScalarField& f, int dim);
CompetitionKernel kernel_from_json(const nlohmann::json& j, int dim);
nlohmann::json kernel_to_json(const CompetitionKernel& k);

ModelParams model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelParams& p);

/// Throws ConfigError on malformed documents or unknown keys.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<memory>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace contpop
