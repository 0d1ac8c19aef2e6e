#include "ma2/scene.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <sstream>

namespace ma2 {

void TaskSpec::validate() const {
  if (waypoints.count(home) == 0) {
    throw std::invalid_argument("TaskSpec " + name + ": unknown home waypoint");
  }
  if (visit_order.empty()) {
    throw std::invalid_argument("TaskSpec " + name + ": empty visit order");
  }
  for (const auto& w : visit_order) {
    if (waypoints.count(w) == 0) {
      throw std::invalid_argument("TaskSpec " + name + ": unknown waypoint " + w);
    }
  }
  if (success_tolerance <= 0.0) {
    throw std::invalid_argument("TaskSpec " + name + ": tolerance must be > 0");
  }
  if (find_ambiguities(*this).empty()) {
    throw std::invalid_argument("TaskSpec " + name +
                                ": visit order has no revisited waypoint with "
                                "distinct successors");
  }
}

std::vector<std::string> TaskSpec::sequence() const {
  std::vector<std::string> seq;
  seq.reserve(visit_order.size() + 1);
  seq.push_back(home);
  seq.insert(seq.end(), visit_order.begin(), visit_order.end());
  return seq;
}

int TaskSpec::expert_steps(double max_step_len) const {
  const auto seq = sequence();
  int steps = 0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double leg = (waypoints.at(seq[i]) - waypoints.at(seq[i - 1])).norm();
    if (leg > success_tolerance) {
      steps += static_cast<int>(
          std::ceil((leg - success_tolerance) / max_step_len));
    }
  }
  return steps;
}

std::vector<AmbiguitySpec> find_ambiguities(const TaskSpec& task) {
  const auto seq = task.sequence();
  std::vector<AmbiguitySpec> out;
  std::map<std::string, std::vector<std::size_t>> visits;
  // Positions that have a successor.
  for (std::size_t p = 0; p + 1 < seq.size(); ++p) visits[seq[p]].push_back(p);
  for (const auto& [wp, positions] : visits) {
    for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
      for (std::size_t j = i + 1; j < positions.size(); ++j) {
        const std::string& succ_a = seq[positions[i] + 1];
        const std::string& succ_b = seq[positions[j] + 1];
        if (succ_a != succ_b) {
          out.push_back({wp, static_cast<int>(positions[i]),
                         static_cast<int>(positions[j]), succ_a, succ_b});
        }
      }
    }
  }
  return out;
}

namespace {

CameraModel make_camera(double fx, double fy, double cx, double cy, int width,
                        int height, const Eigen::Matrix3d& rotation,
                        const Point3& camera_pos) {
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.world_to_camera = RigidTransform(rotation, -(rotation * camera_pos));
  cam.validate();
  return cam;
}

Eigen::Matrix3d look_at_rotation(const Point3& camera_pos, const Point3& target) {
  const Point3 forward = (target - camera_pos).normalized();
  Point3 right = forward.cross(Point3(0, 0, 1));
  if (right.norm() < 1e-9) right = Point3(1, 0, 0);  // straight down
  right.normalize();
  const Point3 down = forward.cross(right);
  Eigen::Matrix3d rotation;
  rotation.row(0) = right.transpose();
  rotation.row(1) = down.transpose();
  rotation.row(2) = forward.transpose();
  return rotation;
}

void camera_to_config(const std::string& prefix, const CameraModel& cam,
                      KeyValueConfig& cfg) {
  cfg.set_double(prefix + ".fx", cam.fx);
  cfg.set_double(prefix + ".fy", cam.fy);
  cfg.set_double(prefix + ".cx", cam.cx);
  cfg.set_double(prefix + ".cy", cam.cy);
  cfg.set_int(prefix + ".width", cam.width);
  cfg.set_int(prefix + ".height", cam.height);
  std::ostringstream pose;
  const Eigen::Matrix3d& rot = cam.world_to_camera.rotation();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose << format_double(rot(r, c)) << " ";
  }
  const Point3& t = cam.world_to_camera.translation();
  pose << format_double(t.x()) << " " << format_double(t.y()) << " "
       << format_double(t.z());
  cfg.set(prefix + ".pose", pose.str());
}

CameraModel camera_from_config(const std::string& prefix,
                               const KeyValueConfig& cfg) {
  CameraModel cam;
  cam.fx = cfg.get_double(prefix + ".fx");
  cam.fy = cfg.get_double(prefix + ".fy");
  cam.cx = cfg.get_double(prefix + ".cx");
  cam.cy = cfg.get_double(prefix + ".cy");
  cam.width = static_cast<int>(cfg.get_int(prefix + ".width"));
  cam.height = static_cast<int>(cfg.get_int(prefix + ".height"));
  const auto pose = cfg.get_doubles(prefix + ".pose");
  if (pose.size() != 12) {
    throw ConfigError(prefix + ".pose: expected 12 numbers, got " +
                      std::to_string(pose.size()));
  }
  Eigen::Matrix3d rot;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot(r, c) = pose[3 * r + c];
  }
  cam.world_to_camera =
      RigidTransform(rot, Point3(pose[9], pose[10], pose[11]));
  cam.validate();
  return cam;
}

std::string point_to_string(const Point3& p) {
  return format_double(p.x()) + " " + format_double(p.y()) + " " +
         format_double(p.z());
}

Point3 point_from_config(const KeyValueConfig& cfg, const std::string& key) {
  const auto v = cfg.get_doubles(key);
  if (v.size() != 3) throw ConfigError(key + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

std::vector<std::string> split_names(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

SceneConfig SceneConfig::default_scene() {
  SceneConfig scene;
  const double z = 0.05;  // tabletop manipulation plane

  // Top-down global camera 0.75 m above the workspace center.
  scene.global_cam = make_camera(
      32, 32, 16, 16, scene.width, scene.height,
      look_at_rotation({0.25, 0.125, 0.75}, {0.25, 0.125, z}),
      {0.25, 0.125, 0.75});

  // Oblique auxiliary camera in front of the table, framed so the
  // background shelf stays out of view.
  const Point3 aux_pos{0.25, -0.30, 0.55};
  scene.aux_cam = make_camera(44, 56, 16, 16, scene.width, scene.height,
                              look_at_rotation(aux_pos, {0.25, 0.05, z}),
                              aux_pos);

  auto add_task = [&](TaskSpec task) {
    task.validate();
    if (task.horizon_cap == 0) {
      task.horizon_cap = 4 * task.expert_steps(scene.max_step_len);
    }
    scene.tasks[task.name] = std::move(task);
  };

  {
    TaskSpec t;
    t.name = "alternating_place";
    t.waypoints = {{"center", {0.25, 0.125, z}},
                   {"right", {0.40, 0.125, z}},
                   {"left", {0.10, 0.125, z}}};
    t.home = "center";
    t.visit_order = {"right", "center", "left"};
    add_task(t);
  }
  {
    TaskSpec t;
    t.name = "key_press";
    t.waypoints = {{"home", {0.10, 0.05, z}},
                   {"space", {0.25, 0.10, z}},
                   {"delete", {0.40, 0.18, z}}};
    t.home = "home";
    t.visit_order = {"space", "delete", "space", "home"};
    add_task(t);
  }
  {
    TaskSpec t;
    t.name = "two_drawer";
    t.waypoints = {{"home", {0.25, 0.125, z}},
                   {"drawer1", {0.08, 0.20, z}},
                   {"drawer2", {0.42, 0.20, z}},
                   {"bin", {0.25, 0.03, z}}};
    t.home = "home";
    t.visit_order = {"drawer1", "bin", "home", "drawer2", "bin", "home"};
    add_task(t);
  }
  return scene;
}

KeyValueConfig SceneConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set_int("image.width", width);
  cfg.set_int("image.height", height);
  camera_to_config("global", global_cam, cfg);
  camera_to_config("aux", aux_cam, cfg);
  cfg.set("workspace.min", point_to_string(workspace_min));
  cfg.set("workspace.max", point_to_string(workspace_max));
  cfg.set_double("shelf.x0", shelf_x0);
  cfg.set_double("shelf.y0", shelf_y0);
  cfg.set_double("shelf.x1", shelf_x1);
  cfg.set_double("shelf.y1", shelf_y1);
  cfg.set_double("shelf.z", shelf_z);
  cfg.set_double("distractor.radius_min", distractor_radius_min);
  cfg.set_double("distractor.radius_max", distractor_radius_max);
  cfg.set_double("distractor.intensity", distractor_intensity);
  cfg.set_double("render.waypoint_sigma_px", waypoint_sigma_px);
  cfg.set_double("render.waypoint_intensity", waypoint_intensity);
  cfg.set_double("render.ee_sigma_px", ee_sigma_px);
  cfg.set_double("render.ee_intensity", ee_intensity);
  cfg.set_double("sim.max_step_len", max_step_len);
  cfg.set_double("sim.demo_noise", demo_noise);
  cfg.set_double("field.sigma", field.sigma);
  cfg.set_double("field.floor", field.floor);
  cfg.set_int("field.stride", field.stride);
  for (const auto& [name, task] : tasks) {
    const std::string p = "task." + name;
    cfg.set(p + ".home", task.home);
    std::string order;
    for (const auto& w : task.visit_order) order += (order.empty() ? "" : " ") + w;
    cfg.set(p + ".order", order);
    cfg.set_double(p + ".tolerance", task.success_tolerance);
    cfg.set_int(p + ".horizon_cap", task.horizon_cap);
    for (const auto& [wp, pos] : task.waypoints) {
      cfg.set(p + ".waypoint." + wp, point_to_string(pos));
    }
  }
  return cfg;
}

SceneConfig SceneConfig::from_config(const KeyValueConfig& cfg) {
  SceneConfig scene;
  scene.width = static_cast<int>(cfg.get_int("image.width"));
  scene.height = static_cast<int>(cfg.get_int("image.height"));
  scene.global_cam = camera_from_config("global", cfg);
  scene.aux_cam = camera_from_config("aux", cfg);
  scene.workspace_min = point_from_config(cfg, "workspace.min");
  scene.workspace_max = point_from_config(cfg, "workspace.max");
  scene.shelf_x0 = cfg.get_double("shelf.x0");
  scene.shelf_y0 = cfg.get_double("shelf.y0");
  scene.shelf_x1 = cfg.get_double("shelf.x1");
  scene.shelf_y1 = cfg.get_double("shelf.y1");
  scene.shelf_z = cfg.get_double("shelf.z");
  scene.distractor_radius_min = cfg.get_double("distractor.radius_min");
  scene.distractor_radius_max = cfg.get_double("distractor.radius_max");
  scene.distractor_intensity = cfg.get_double("distractor.intensity");
  scene.waypoint_sigma_px = cfg.get_double("render.waypoint_sigma_px");
  scene.waypoint_intensity = cfg.get_double("render.waypoint_intensity");
  scene.ee_sigma_px = cfg.get_double("render.ee_sigma_px");
  scene.ee_intensity = cfg.get_double("render.ee_intensity");
  scene.max_step_len = cfg.get_double("sim.max_step_len");
  scene.demo_noise = cfg.get_double("sim.demo_noise");
  scene.field.sigma = cfg.get_double("field.sigma");
  scene.field.floor = cfg.get_double("field.floor");
  scene.field.stride = static_cast<int>(cfg.get_int("field.stride"));
  scene.field.validate();

  scene.tasks.clear();
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind("task.", 0) != 0) continue;
    const auto rest = key.substr(5);
    const auto dot = rest.find('.');
    if (dot == std::string::npos) continue;
    const std::string name = rest.substr(0, dot);
    if (scene.tasks.count(name)) continue;
    TaskSpec task;
    task.name = name;
    const std::string p = "task." + name;
    task.home = cfg.get(p + ".home");
    task.visit_order = split_names(cfg.get(p + ".order"));
    task.success_tolerance = cfg.get_double(p + ".tolerance");
    task.horizon_cap = static_cast<int>(cfg.get_int(p + ".horizon_cap"));
    const std::string wp_prefix = p + ".waypoint.";
    for (const auto& [k2, v2] : cfg.entries()) {
      if (k2.rfind(wp_prefix, 0) == 0) {
        task.waypoints[k2.substr(wp_prefix.size())] = point_from_config(cfg, k2);
      }
    }
    task.validate();
    scene.tasks[name] = std::move(task);
  }
  return scene;
}

const TaskSpec& SceneConfig::task(const std::string& name) const {
  const auto it = tasks.find(name);
  if (it == tasks.end()) throw ConfigError("unknown task: " + name);
  return it->second;
}

}  // namespace ma2
