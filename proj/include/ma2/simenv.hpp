#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ma2/field.hpp"
#include "ma2/geometry.hpp"
#include "ma2/rng.hpp"
#include "ma2/scene.hpp"

namespace ma2 {

struct Distractor {
  Point3 center;
  double radius;
};

// Ground-truth simulator state. stage_index is hidden from policies; only
// the expert and the success check may read it.
struct EnvState {
  Point3 ee;
  int stage_index = 0;
  int step_count = 0;
  std::vector<Distractor> distractors;
  bool out_of_workspace = false;
};

struct Observation {
  GrayImage global;  // top-down view, no trace
  GrayImage aux;     // oblique raw view
  Point3 ee;
};

struct Demonstration {
  std::vector<Observation> observations;
  std::vector<Point3> actions;  // absolute next-step EE targets
  MotionTrace trace;            // EE positions of the observations
};

struct TaskComplete : std::runtime_error {
  TaskComplete() : std::runtime_error("expert queried on a completed task") {}
};

struct GenerationStalled : std::runtime_error {
  explicit GenerationStalled(const std::string& task)
      : std::runtime_error("dataset generation stalled for task " + task) {}
};

// Places the EE at the task's home waypoint and samples distractors on the
// background shelf, rejecting any whose projected pixel lies within
// 3*sigma of an expert path segment in the global view.
EnvState reset(const SceneConfig& scene, const TaskSpec& task,
               std::uint64_t seed, int distractor_count);

// Kinematic point robot: moves toward the action target capped at
// max_step_len, advances the stage machine, clamps to workspace bounds.
EnvState step(const SceneConfig& scene, const TaskSpec& task,
              const EnvState& state, const Point3& action);

// Deterministic render from {ee, distractors} and static task geometry
// only; stage_index never influences pixels.
GrayImage render(const SceneConfig& scene, const TaskSpec& task,
                 const EnvState& state, const CameraModel& cam);

Observation observe(const SceneConfig& scene, const TaskSpec& task,
                    const EnvState& state);

// One straight-line expert step toward the current target plus isotropic
// Gaussian jitter of std demo_noise. Throws TaskComplete when done.
Point3 expert_policy(const SceneConfig& scene, const TaskSpec& task,
                     const EnvState& state, Rng& rng, double demo_noise);

struct DatasetGenStats {
  int regenerated = 0;  // rollouts discarded for exceeding the horizon cap
};

std::vector<Demonstration> generate_dataset(const SceneConfig& scene,
                                            const TaskSpec& task, int n_demos,
                                            std::uint64_t seed, double demo_noise,
                                            DatasetGenStats* stats = nullptr);

struct SuccessResult {
  bool success = false;
  int stages_completed = 0;
};

SuccessResult check_success(const std::vector<EnvState>& trajectory,
                            const TaskSpec& task);

// Pixel distance from a point to a segment, used by the distractor
// placement check and its oracle test.
double point_segment_distance(const Pixel& p, const Pixel& a, const Pixel& b);

}  // namespace ma2
