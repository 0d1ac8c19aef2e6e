#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace ma2 {

using Point3 = Eigen::Vector3d;
// Continuous pixel coordinates, top-left origin, u rightward, v downward.
// Kept sub-pixel until rasterization.
using Pixel = Eigen::Vector2d;

struct BehindCamera : std::runtime_error {
  BehindCamera() : std::runtime_error("point at or behind the camera plane") {}
};

// Rigid world->camera motion. Orthonormality (det +1) is validated on
// construction to 1e-9.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Point3::Zero()) {}
  RigidTransform(const Eigen::Matrix3d& rotation, const Point3& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    return RigidTransform(rotation_.transpose(),
                          -(rotation_.transpose() * translation_));
  }

 private:
  Eigen::Matrix3d rotation_;
  Point3 translation_;
};

struct CameraModel {
  double fx = 1.0, fy = 1.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  RigidTransform world_to_camera;
  int width = 0, height = 0;

  void validate() const;
};

// Ordered end-effector history in the world frame.
struct MotionTrace {
  struct Entry {
    long timestep;
    Point3 position;
  };

  std::vector<Entry> points;

  void append(long timestep, const Point3& position);
  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

inline Point3 world_to_camera(const RigidTransform& transform, const Point3& p) {
  return transform.apply(p);
}

// Perspective projection of a camera-frame point. Throws BehindCamera for
// z <= 1e-9; callers that project traces drop such points instead.
Pixel project(const CameraModel& cam, const Point3& p_cam);

// Inverse of project along the ray at a given depth.
Point3 unproject(const CameraModel& cam, const Pixel& px, double depth);

struct ProjectedTrace {
  std::vector<Pixel> pixels;  // input order, visible points only
  int dropped = 0;            // behind-camera points
};

ProjectedTrace project_trace(const CameraModel& cam, const MotionTrace& trace);

// Convenience: world point straight through to pixel space.
inline Pixel project_world(const CameraModel& cam, const Point3& p_world) {
  return project(cam, world_to_camera(cam.world_to_camera, p_world));
}

}  // namespace ma2
