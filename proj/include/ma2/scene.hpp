#pragma once

#include <map>
#include <string>
#include <vector>

#include "ma2/config.hpp"
#include "ma2/field.hpp"
#include "ma2/geometry.hpp"

namespace ma2 {

// A long-horizon waypoint task. The visit order must revisit at least one
// waypoint with two distinct successors, so that visually identical states
// demand different actions at different stages.
struct TaskSpec {
  std::string name;
  std::map<std::string, Point3> waypoints;
  std::string home;                     // starting waypoint
  std::vector<std::string> visit_order; // waypoints to reach, in order
  double success_tolerance = 0.01;      // meters
  int horizon_cap = 0;                  // steps; 0 = derive as 4x expert length

  void validate() const;

  // Full waypoint sequence including the start.
  std::vector<std::string> sequence() const;

  // Minimum step count of the straight-line expert.
  int expert_steps(double max_step_len) const;
};

// A revisited waypoint with two distinct successors: the engineered
// ambiguity this environment exists to exhibit.
struct AmbiguitySpec {
  std::string waypoint;
  int stage_a = 0, stage_b = 0;           // stage_index at each visit
  std::string successor_a, successor_b;   // stage-correct next waypoints
};

// All ambiguity pairs of a task (first two visits of each revisited
// waypoint whose successors differ).
std::vector<AmbiguitySpec> find_ambiguities(const TaskSpec& task);

// Scene description: cameras, workspace bounds, renderer and simulator
// parameters, the background shelf where distractors live, and the tasks.
struct SceneConfig {
  int width = 32, height = 32;
  CameraModel global_cam;
  CameraModel aux_cam;

  Point3 workspace_min{0.0, 0.0, 0.03};
  Point3 workspace_max{0.5, 0.25, 0.07};

  // Background shelf: distractors are sampled here, behind the workspace.
  double shelf_x0 = 0.02, shelf_y0 = 0.42, shelf_x1 = 0.48, shelf_y1 = 0.47;
  double shelf_z = 0.05;
  double distractor_radius_min = 0.015, distractor_radius_max = 0.03;
  double distractor_intensity = 0.6;

  double waypoint_sigma_px = 1.0, waypoint_intensity = 0.5;
  double ee_sigma_px = 1.2, ee_intensity = 1.0;

  double max_step_len = 0.02;
  double demo_noise = 0.001;  // 10% of the default success tolerance

  FieldConfig field;

  std::map<std::string, TaskSpec> tasks;

  static SceneConfig default_scene();
  static SceneConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
  std::uint64_t hash() const { return config_hash(to_config()); }

  const TaskSpec& task(const std::string& name) const;
};

}  // namespace ma2
