#include "ma2/geometry.hpp"

#include <Eigen/LU>

namespace ma2 {

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation,
                               const Point3& translation)
    : rotation_(rotation), translation_(translation) {
  const Eigen::Matrix3d residual =
      rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (residual.cwiseAbs().maxCoeff() >= 1e-9) {
    throw std::invalid_argument("RigidTransform: rotation is not orthonormal");
  }
  if (rotation.determinant() < 0.0) {
    throw std::invalid_argument("RigidTransform: rotation has determinant -1");
  }
  if (!translation.allFinite()) {
    throw std::invalid_argument("RigidTransform: non-finite translation");
  }
}

void CameraModel::validate() const {
  if (fx <= 0.0 || fy <= 0.0) {
    throw std::invalid_argument("CameraModel: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("CameraModel: image dimensions must be positive");
  }
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw std::invalid_argument("CameraModel: principal point outside the frame");
  }
}

void MotionTrace::append(long timestep, const Point3& position) {
  if (!points.empty() && timestep <= points.back().timestep) {
    throw std::invalid_argument("MotionTrace: timesteps must be strictly increasing");
  }
  if (!position.allFinite()) {
    throw std::invalid_argument("MotionTrace: non-finite position");
  }
  points.push_back({timestep, position});
}

Pixel project(const CameraModel& cam, const Point3& p_cam) {
  if (p_cam.z() <= 1e-9) throw BehindCamera();
  return {cam.fx * p_cam.x() / p_cam.z() + cam.cx,
          cam.fy * p_cam.y() / p_cam.z() + cam.cy};
}

Point3 unproject(const CameraModel& cam, const Pixel& px, double depth) {
  return {(px.x() - cam.cx) / cam.fx * depth, (px.y() - cam.cy) / cam.fy * depth,
          depth};
}

ProjectedTrace project_trace(const CameraModel& cam, const MotionTrace& trace) {
  ProjectedTrace out;
  out.pixels.reserve(trace.points.size());
  for (const auto& entry : trace.points) {
    const Point3 p_cam = world_to_camera(cam.world_to_camera, entry.position);
    if (p_cam.z() <= 1e-9) {
      ++out.dropped;
      continue;
    }
    out.pixels.push_back(project(cam, p_cam));
  }
  return out;
}

}  // namespace ma2
