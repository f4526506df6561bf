#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scenemem/geometry.hpp"

namespace scenemem {

// One posed RGB-D observation reduced to what the map consumes: a 24x24
// grid of patch features, a full-resolution depth image, and a
// full-resolution segmentation-mask image. Mask id 0 is background; in
// synthetic data the mask ids double as ground-truth object ids.
struct ObservationFrame {
  std::uint64_t frame_id = 0;
  Pose pose;
  CameraIntrinsics intrinsics;
  int feature_dim = 0;
  // True when mask ids are ground-truth object ids (synthetic data);
  // integration then records them on the created points.
  bool masks_are_ground_truth = false;
  std::vector<float> patch_features;   // kPatchCount x feature_dim, row-major
  std::vector<float> depth;            // height x width, camera-frame z
  std::vector<std::int32_t> masks;     // height x width

  DepthView depth_view() const { return {depth.data(), intrinsics.height, intrinsics.width}; }

  std::span<const float> patch_feature(int patch_index) const {
    return {patch_features.data() + static_cast<std::size_t>(patch_index) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
  }

  // Depth and mask sampled at the centre pixel of a patch, using the same
  // nearest-pixel convention as the cull predicate.
  float patch_depth(int patch_index) const;
  std::int32_t patch_mask(int patch_index) const;

  // Throws std::invalid_argument when the grid is not 24x24 x expected_dim
  // or the image buffers disagree with the intrinsics.
  void validate(int expected_dim) const;
};

}  // namespace scenemem
