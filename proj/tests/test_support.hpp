#pragma once

// Shared builders for synthetic observation frames used across the unit
// test suites. Bands are expressed in patch columns (0..23) so a test can
// aim depth and mask values at specific patches without pixel arithmetic.

#include <cstdint>
#include <vector>

#include "scenemem/geometry.hpp"
#include "scenemem/observation.hpp"
#include "scenemem/rng.hpp"

namespace testsup {

inline scenemem::CameraIntrinsics camera(int height = 48, int width = 48, double focal = 40.0) {
  scenemem::CameraIntrinsics k;
  k.fx = focal;
  k.fy = focal;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  k.height = height;
  k.width = width;
  return k;
}

struct Band {
  int patch_col_begin = 0;  // inclusive
  int patch_col_end = 0;    // exclusive
  float depth = 0.0f;
  int mask = 0;
};

// Frame whose depth and mask images are constant within vertical bands of
// patch columns. Patch features are random unit vectors.
inline scenemem::ObservationFrame banded_frame(const scenemem::Pose& pose,
                                               const scenemem::CameraIntrinsics& k, int dim,
                                               const std::vector<Band>& bands,
                                               std::uint64_t frame_id, scenemem::SeededRng& rng,
                                               bool gt_masks = true) {
  scenemem::ObservationFrame f;
  f.frame_id = frame_id;
  f.pose = pose;
  f.intrinsics = k;
  f.feature_dim = dim;
  f.masks_are_ground_truth = gt_masks;
  const std::size_t pixels = static_cast<std::size_t>(k.height) * k.width;
  f.depth.assign(pixels, 0.0f);
  f.masks.assign(pixels, 0);
  for (int r = 0; r < k.height; ++r)
    for (int c = 0; c < k.width; ++c) {
      const int patch_col = c * scenemem::kPatchGridSize / k.width;
      for (const Band& b : bands)
        if (patch_col >= b.patch_col_begin && patch_col < b.patch_col_end) {
          f.depth[static_cast<std::size_t>(r) * k.width + c] = b.depth;
          f.masks[static_cast<std::size_t>(r) * k.width + c] = b.mask;
          break;
        }
    }
  f.patch_features.reserve(static_cast<std::size_t>(scenemem::kPatchCount) * dim);
  for (int i = 0; i < scenemem::kPatchCount; ++i) {
    const auto v = rng.unit_vector(dim);
    f.patch_features.insert(f.patch_features.end(), v.begin(), v.end());
  }
  return f;
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace testsup
