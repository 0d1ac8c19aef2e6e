#include "ma2/simenv.hpp"

#include <cmath>

namespace ma2 {

double point_segment_distance(const Pixel& p, const Pixel& a, const Pixel& b) {
  const Pixel ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double t = std::min(1.0, std::max(0.0, (p - a).dot(ab) / len2));
  return (p - (a + t * ab)).norm();
}

namespace {

std::vector<std::pair<Pixel, Pixel>> expert_path_segments(
    const SceneConfig& scene, const TaskSpec& task) {
  const auto seq = task.sequence();
  std::vector<std::pair<Pixel, Pixel>> segments;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    segments.emplace_back(
        project_world(scene.global_cam, task.waypoints.at(seq[i - 1])),
        project_world(scene.global_cam, task.waypoints.at(seq[i])));
  }
  return segments;
}

Point3 clamp_to_workspace(const SceneConfig& scene, const Point3& p,
                          bool* clamped) {
  Point3 out = p.cwiseMax(scene.workspace_min).cwiseMin(scene.workspace_max);
  if (clamped != nullptr && out != p) *clamped = true;
  return out;
}

// Additive Gaussian splat around the projected world point; evaluated in a
// 4-sigma window for speed.
void splat(GrayImage& image, const CameraModel& cam, const Point3& world,
           double sigma_px, double intensity) {
  Point3 p_cam = world_to_camera(cam.world_to_camera, world);
  if (p_cam.z() <= 1e-9) return;
  const Pixel c = project(cam, p_cam);
  const double r = 4.0 * sigma_px;
  const long u0 = std::max(0L, std::lround(std::floor(c.x() - r)));
  const long u1 = std::min(image.cols() - 1, std::lround(std::ceil(c.x() + r)));
  const long v0 = std::max(0L, std::lround(std::floor(c.y() - r)));
  const long v1 = std::min(image.rows() - 1, std::lround(std::ceil(c.y() + r)));
  const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
  for (long v = v0; v <= v1; ++v) {
    const double dv = v - c.y();
    for (long u = u0; u <= u1; ++u) {
      const double du = u - c.x();
      image(v, u) += intensity * std::exp(-(du * du + dv * dv) * inv);
    }
  }
}

}  // namespace

EnvState reset(const SceneConfig& scene, const TaskSpec& task,
               std::uint64_t seed, int distractor_count) {
  if (distractor_count < 0) {
    throw std::invalid_argument("reset: distractor_count must be >= 0");
  }
  EnvState state;
  state.ee = task.waypoints.at(task.home);
  state.stage_index = 0;
  state.step_count = 0;

  const auto segments = expert_path_segments(scene, task);
  const double min_distance = 3.0 * scene.field.sigma;
  Rng rng(mix_seed(seed, /*stream=*/0xD157));
  int attempts = 0;
  while (static_cast<int>(state.distractors.size()) < distractor_count) {
    if (++attempts > 10000 * (distractor_count + 1)) {
      throw std::runtime_error("reset: cannot place distractors clear of the "
                               "expert corridor");
    }
    Distractor d;
    d.center = {rng.uniform(scene.shelf_x0, scene.shelf_x1),
                rng.uniform(scene.shelf_y0, scene.shelf_y1), scene.shelf_z};
    d.radius = rng.uniform(scene.distractor_radius_min,
                           scene.distractor_radius_max);
    const Pixel px = project_world(scene.global_cam, d.center);
    bool clear = true;
    for (const auto& [a, b] : segments) {
      if (point_segment_distance(px, a, b) <= min_distance) {
        clear = false;
        break;
      }
    }
    if (clear) state.distractors.push_back(d);
  }
  return state;
}

EnvState step(const SceneConfig& scene, const TaskSpec& task,
              const EnvState& state, const Point3& action) {
  if (!action.allFinite()) {
    throw std::invalid_argument("step: non-finite action");
  }
  EnvState next = state;
  const Point3 delta = action - state.ee;
  const double dist = delta.norm();
  if (dist > scene.max_step_len) {
    next.ee = state.ee + delta * (scene.max_step_len / dist);
  } else {
    next.ee = action;
  }
  next.ee = clamp_to_workspace(scene, next.ee, &next.out_of_workspace);
  while (next.stage_index < static_cast<int>(task.visit_order.size())) {
    const Point3& target =
        task.waypoints.at(task.visit_order[next.stage_index]);
    if ((next.ee - target).norm() > task.success_tolerance) break;
    ++next.stage_index;
  }
  ++next.step_count;
  return next;
}

GrayImage render(const SceneConfig& scene, const TaskSpec& task,
                 const EnvState& state, const CameraModel& cam) {
  GrayImage image = GrayImage::Zero(cam.height, cam.width);
  for (const auto& [name, pos] : task.waypoints) {
    splat(image, cam, pos, scene.waypoint_sigma_px, scene.waypoint_intensity);
  }
  for (const auto& d : state.distractors) {
    const double depth =
        world_to_camera(cam.world_to_camera, d.center).z();
    const double sigma_px =
        std::max(0.6, d.radius * cam.fx / std::max(depth, 1e-6));
    splat(image, cam, d.center, sigma_px, scene.distractor_intensity);
  }
  splat(image, cam, state.ee, scene.ee_sigma_px, scene.ee_intensity);
  return image.cwiseMin(1.0);
}

Observation observe(const SceneConfig& scene, const TaskSpec& task,
                    const EnvState& state) {
  return {render(scene, task, state, scene.global_cam),
          render(scene, task, state, scene.aux_cam), state.ee};
}

Point3 expert_policy(const SceneConfig& scene, const TaskSpec& task,
                     const EnvState& state, Rng& rng, double demo_noise) {
  if (state.stage_index >= static_cast<int>(task.visit_order.size())) {
    throw TaskComplete();
  }
  const Point3& target = task.waypoints.at(task.visit_order[state.stage_index]);
  const Point3 delta = target - state.ee;
  const double dist = delta.norm();
  Point3 action = dist <= scene.max_step_len
                      ? target
                      : Point3(state.ee + delta * (scene.max_step_len / dist));
  if (demo_noise > 0.0) {
    action += demo_noise * Point3(rng.normal(), rng.normal(), rng.normal());
  }
  return action;
}

std::vector<Demonstration> generate_dataset(const SceneConfig& scene,
                                            const TaskSpec& task, int n_demos,
                                            std::uint64_t seed, double demo_noise,
                                            DatasetGenStats* stats) {
  if (n_demos <= 0) {
    throw std::invalid_argument("generate_dataset: n_demos must be > 0");
  }
  std::vector<Demonstration> demos;
  demos.reserve(n_demos);
  const int n_stages = static_cast<int>(task.visit_order.size());
  int attempts = 0;
  while (static_cast<int>(demos.size()) < n_demos) {
    if (attempts >= 10 * n_demos) throw GenerationStalled(task.name);
    Rng rng(mix_seed(seed, /*stream=*/0xDE30, attempts));
    ++attempts;

    Demonstration demo;
    EnvState state = reset(scene, task, seed, /*distractor_count=*/0);
    bool ok = false;
    while (state.step_count < task.horizon_cap) {
      const Point3 action = expert_policy(scene, task, state, rng, demo_noise);
      demo.observations.push_back(observe(scene, task, state));
      demo.actions.push_back(action);
      demo.trace.append(state.step_count, state.ee);
      state = step(scene, task, state, action);
      if (state.stage_index == n_stages) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      if (stats != nullptr) ++stats->regenerated;
      continue;
    }
    demos.push_back(std::move(demo));
  }
  return demos;
}

SuccessResult check_success(const std::vector<EnvState>& trajectory,
                            const TaskSpec& task) {
  if (trajectory.empty()) return {false, 0};
  const EnvState& last = trajectory.back();
  const int n_stages = static_cast<int>(task.visit_order.size());
  const bool success =
      last.stage_index == n_stages && last.step_count <= task.horizon_cap;
  return {success, last.stage_index};
}

}  // namespace ma2
