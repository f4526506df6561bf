#include "scenemem/observation.hpp"

#include <stdexcept>

namespace scenemem {

float ObservationFrame::patch_depth(int patch_index) const {
  const int pr = patch_index / kPatchGridSize;
  const int pc = patch_index % kPatchGridSize;
  const int r = nearest_pixel(patch_center_u(pr, intrinsics.height), intrinsics.height);
  const int c = nearest_pixel(patch_center_v(pc, intrinsics.width), intrinsics.width);
  return depth[static_cast<std::size_t>(r) * intrinsics.width + c];
}

std::int32_t ObservationFrame::patch_mask(int patch_index) const {
  const int pr = patch_index / kPatchGridSize;
  const int pc = patch_index % kPatchGridSize;
  const int r = nearest_pixel(patch_center_u(pr, intrinsics.height), intrinsics.height);
  const int c = nearest_pixel(patch_center_v(pc, intrinsics.width), intrinsics.width);
  return masks[static_cast<std::size_t>(r) * intrinsics.width + c];
}

void ObservationFrame::validate(int expected_dim) const {
  intrinsics.validate();
  if (feature_dim != expected_dim)
    throw std::invalid_argument("frame: feature dimension " + std::to_string(feature_dim) +
                                " does not match configured " + std::to_string(expected_dim));
  if (patch_features.size() != static_cast<std::size_t>(kPatchCount) * feature_dim)
    throw std::invalid_argument("frame: patch feature grid is not 24x24 x dim");
  const std::size_t pixels =
      static_cast<std::size_t>(intrinsics.height) * static_cast<std::size_t>(intrinsics.width);
  if (depth.size() != pixels) throw std::invalid_argument("frame: depth image size mismatch");
  if (masks.size() != pixels) throw std::invalid_argument("frame: mask image size mismatch");
}

}  // namespace scenemem
