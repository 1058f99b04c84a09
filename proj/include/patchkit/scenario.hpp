#pragma once

#include <json.hpp>

#include "patchkit/simulator.hpp"

namespace patchkit {

using Json = nlohmann::json;

/// Scenario file contents. Every numeric default comes from the published
/// schema (scenario_schema(), mirrored in scenarios/schema.json), not from
/// scattered code paths.
struct Scenario {
  std::string name = "unnamed";
  std::string system_name;
  int n_dirs = 0;
  bool include_zero = true;
  std::vector<double> unicycle_speeds, unicycle_turn_rates;

  Region constraint = Region::empty(0);
  Region target = Region::empty(0);
  double delta = 0, gamma = 0, eps_dec = 0;
  double tol_bd = 0, tol_act = 0;

  int n_boundary = 0;  // hypothesis-check boundary samples

  double dwell = 0, horizon = 0;
  int node_budget = 0;

  double lambda = 0;
  std::string boundary_style;
  double depth_target = 0;  // crown depth the boundary layer must cover
  double band_thickness = 0, outer_reach = 0, wall_tilt = 0;
  double tube_growth = 0, cover_pitch = 0;
  int max_tubes = 0;

  double dt = 0, t_max = 0;
  int grid_n = 0;
  std::uint64_t seed = 0;

  static Scenario from_json(const Json& j);
  static Scenario from_file(const std::string& path);

  ControlSystem build_system() const;
  /// grid_n x grid_n points of the bounding box inside S and outside the
  /// delta-neighborhood of the target.
  std::vector<Vec> initial_grid() const;
  BoundaryFeedbackConfig boundary_config() const;
};

/// The published scenario schema (field, type, default, description).
const Json& scenario_schema();

Json region_to_json(const Region& r);
Region region_from_json(const Json& j);

Json feedback_to_json(const PatchyFeedback& fb, const Json& provenance_meta = Json::object());
PatchyFeedback feedback_from_json(const Json& j);

}  // namespace patchkit
