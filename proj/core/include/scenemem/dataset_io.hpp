#pragma once

#include <string>

#include "scenemem/scene_sim.hpp"

namespace scenemem {

// On-disk dataset layout: a directory holding manifest.json plus one
// frame_NNNNNN.bin per frame. Frame files are little-endian:
//   magic "DYNF", version u16, feature_dim u16, height u32, width u32,
//   frame_id u64, rotation 9 f64 row-major, translation 3 f64,
//   patch features 576 * feature_dim f32, depth H*W f32, masks H*W i32.
// The manifest records intrinsics, the generation seed, scene events, and
// the frame file list in order.

void write_dataset(const std::string& dir, const SimDataset& dataset);

// Validates the manifest against every frame header; throws
// std::runtime_error on any mismatch or truncation.
SimDataset load_dataset(const std::string& dir);

void write_frame_file(const std::string& path, const ObservationFrame& frame);
ObservationFrame load_frame_file(const std::string& path, const CameraIntrinsics& intrinsics);

// Scene description as JSON. gen-scene drops scene.json next to the frame
// files so replay reports can compare the map against ground-truth object
// placement; replay works without it but then skips those metrics.
void write_scene(const std::string& path, const Scene& scene);
Scene load_scene(const std::string& path);

}  // namespace scenemem
