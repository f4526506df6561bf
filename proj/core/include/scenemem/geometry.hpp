#pragma once

#include <Eigen/Dense>

namespace scenemem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Camera/agent frame convention used throughout: +z forward, +x right,
// +y down. At identity pose the world frame coincides with the camera
// frame, so the world vertical axis is y (pointing down) and the ground
// plane is spanned by x and z.
//
// Pixel coordinates: u is the row index (bounded by the image height H),
// v is the column index (bounded by the width W). A depth or mask image
// is stored row-major as H rows of W entries; the pixel with integer
// indices (r, c) is centred at real-valued (u, v) = (r, c).

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;  // principal point column
  double cy = 0.0;  // principal point row
  int height = 0;
  int width = 0;

  void validate() const;        // throws std::invalid_argument
  double horizontal_fov() const;  // 2 * atan(W / (2 fx)), radians
};

// Rigid transform mapping world coordinates into the camera frame:
// P_c = R * P_w + T.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Pose(const Mat3& rotation, const Vec3& translation);  // validates R

  // Camera placed at `center` on the world ground plane orientation,
  // facing azimuth `heading` (0 = world +z, positive turns toward +x).
  static Pose from_heading(const Vec3& center, double heading);
  // Camera at `center` looking toward `target`. Throws if the view
  // direction is vertical (no horizontal component).
  static Pose look_at(const Vec3& center, const Vec3& target);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 to_camera(const Vec3& p_world) const { return rotation_ * p_world + translation_; }
  Vec3 to_world(const Vec3& p_camera) const {
    return rotation_.transpose() * (p_camera - translation_);
  }
  Vec3 camera_center() const { return -(rotation_.transpose() * translation_); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

struct PixelCoord {
  double u = 0.0;   // row coordinate
  double v = 0.0;   // column coordinate
  double z_c = 0.0;  // camera-frame depth (may be <= 0 for points behind)
};

// Non-owning view of a row-major H x W depth image.
struct DepthView {
  const float* data = nullptr;
  int height = 0;
  int width = 0;
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

// Perspective projection. Returns real-valued pixel coordinates and the
// camera depth; throws std::domain_error when |z_c| < 1e-12.
PixelCoord project(const Vec3& p_world, const Pose& pose, const CameraIntrinsics& k);

// Inverse of project for depth > 0; throws std::invalid_argument otherwise.
Vec3 unproject(double u, double v, double depth, const Pose& pose, const CameraIntrinsics& k);

// Nearest integer pixel index for a real-valued coordinate, clamped to
// the valid range. Shared by every code path that samples per-pixel data
// so that projection and re-sampling stay consistent.
int nearest_pixel(double coord, int extent);

inline constexpr int kPatchGridSize = 24;
inline constexpr int kPatchCount = kPatchGridSize * kPatchGridSize;  // 576

// Real-valued pixel coordinates of a patch centre in a 24x24 grid laid
// over an H x W image.
double patch_center_u(int patch_row, int height);
double patch_center_v(int patch_col, int width);

// Azimuth of a direction's horizontal component: 0 along +z, increasing
// toward +x (a clockwise turn when viewed from above in this y-down
// convention).
double azimuth_of(const Vec3& dir);

struct PatchGeometry {
  Vec3 position = Vec3::Zero();  // world-frame patch point
  double heading = 0.0;          // world-frame azimuth of the camera->point ray
  double size = 0.0;             // metric footprint of one patch at this depth
};

// Back-projects the centre of patch (patch_row, patch_col) observed at
// patch_depth. Footprint: size = depth * (2 tan(hfov/2)) / 24. Throws on
// out-of-range patch indices or non-positive depth.
PatchGeometry patch_geometry(const Pose& pose, const CameraIntrinsics& k, int patch_row,
                             int patch_col, double patch_depth);

// Frustum-cull test for an existing map point against a new observation.
// True iff the point projects strictly inside the image (0 < u < H,
// 0 < v < W) with 0 < z_c < min(d[u,v] + delta, max_distance), where
// d[u,v] is the depth image sampled at the nearest pixel. Invalid depth
// samples (<= 0 or non-finite) act as "beyond the horizon": the bound
// degrades to max_distance alone.
bool cull_predicate(const Vec3& p_world, DepthView depth, const Pose& pose,
                    const CameraIntrinsics& k, double delta, double max_distance);

}  // namespace scenemem
