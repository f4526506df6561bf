#include "scenemem/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace scenemem {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: fx and fy must be > 0");
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("intrinsics: image dimensions must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw std::invalid_argument("intrinsics: principal point must be finite");
}

double CameraIntrinsics::horizontal_fov() const {
  return 2.0 * std::atan(static_cast<double>(width) / (2.0 * fx));
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-9) throw std::invalid_argument("pose: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("pose: rotation determinant must be +1");
}

Pose Pose::from_heading(const Vec3& center, double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  Mat3 cam_to_world;
  // columns: camera x (right), y (down), z (forward) expressed in world
  cam_to_world << c, 0.0, s,
                  0.0, 1.0, 0.0,
                  -s, 0.0, c;
  const Mat3 r = cam_to_world.transpose();
  return Pose(r, -(r * center));
}

Pose Pose::look_at(const Vec3& center, const Vec3& target) {
  Vec3 forward = target - center;
  const double n = forward.norm();
  if (n < 1e-12) throw std::invalid_argument("look_at: target coincides with center");
  forward /= n;
  const Vec3 down(0.0, 1.0, 0.0);
  Vec3 right = down.cross(forward);
  const double rn = right.norm();
  if (rn < 1e-9) throw std::invalid_argument("look_at: view direction is vertical");
  right /= rn;
  const Vec3 cam_down = forward.cross(right);
  Mat3 cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = cam_down;
  cam_to_world.col(2) = forward;
  const Mat3 r = cam_to_world.transpose();
  return Pose(r, -(r * center));
}

PixelCoord project(const Vec3& p_world, const Pose& pose, const CameraIntrinsics& k) {
  const Vec3 pc = pose.to_camera(p_world);
  if (std::abs(pc.z()) < 1e-12) throw std::domain_error("project: degenerate depth (|z_c| < 1e-12)");
  PixelCoord px;
  px.u = k.fy * pc.y() / pc.z() + k.cy;
  px.v = k.fx * pc.x() / pc.z() + k.cx;
  px.z_c = pc.z();
  return px;
}

Vec3 unproject(double u, double v, double depth, const Pose& pose, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw std::invalid_argument("unproject: depth must be > 0");
  const Vec3 pc((v - k.cx) / k.fx * depth, (u - k.cy) / k.fy * depth, depth);
  return pose.to_world(pc);
}

int nearest_pixel(double coord, int extent) {
  long r = std::lround(coord);
  if (r < 0) r = 0;
  if (r > extent - 1) r = extent - 1;
  return static_cast<int>(r);
}

double patch_center_u(int patch_row, int height) {
  return (patch_row + 0.5) * static_cast<double>(height) / kPatchGridSize;
}

double patch_center_v(int patch_col, int width) {
  return (patch_col + 0.5) * static_cast<double>(width) / kPatchGridSize;
}

double azimuth_of(const Vec3& dir) { return std::atan2(dir.x(), dir.z()); }

PatchGeometry patch_geometry(const Pose& pose, const CameraIntrinsics& k, int patch_row,
                             int patch_col, double patch_depth) {
  if (patch_row < 0 || patch_row >= kPatchGridSize || patch_col < 0 || patch_col >= kPatchGridSize)
    throw std::invalid_argument("patch_geometry: patch index out of range");
  if (!(patch_depth > 0.0)) throw std::invalid_argument("patch_geometry: depth must be > 0");
  const double u = patch_center_u(patch_row, k.height);
  const double v = patch_center_v(patch_col, k.width);
  PatchGeometry g;
  g.position = unproject(u, v, patch_depth, pose, k);
  g.heading = azimuth_of(g.position - pose.camera_center());
  g.size = patch_depth * (2.0 * std::tan(0.5 * k.horizontal_fov())) / kPatchGridSize;
  return g;
}

bool cull_predicate(const Vec3& p_world, DepthView depth, const Pose& pose,
                    const CameraIntrinsics& k, double delta, double max_distance) {
  const Vec3 pc = pose.to_camera(p_world);
  const double z = pc.z();
  if (!(z > 1e-12)) return false;
  const double u = k.fy * pc.y() / z + k.cy;
  const double v = k.fx * pc.x() / z + k.cx;
  if (!(u > 0.0 && u < static_cast<double>(k.height))) return false;
  if (!(v > 0.0 && v < static_cast<double>(k.width))) return false;
  const float d = depth.at(nearest_pixel(u, k.height), nearest_pixel(v, k.width));
  double bound = max_distance;
  if (std::isfinite(d) && d > 0.0f) bound = std::min(static_cast<double>(d) + delta, max_distance);
  return z < bound;
}

}  // namespace scenemem
