#pragma once

#include <cstdint>
#include <vector>

#include "scenemem/config.hpp"
#include "scenemem/geometry.hpp"
#include "scenemem/observation.hpp"
#include "scenemem/rng.hpp"

namespace scenemem {

// Solid resting on the floor plane y = 0 (y points down, so a box with
// vertical half extent h spans y in [-2h, 0] and a sphere of radius r is
// centred at y = -r). Object ids start at 1; mask id 0 is reserved for the
// background.
struct SceneObject {
  enum class Shape { Box, Sphere };

  int id = 0;
  Shape shape = Shape::Box;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();  // Box only
  double radius = 0.0;               // Sphere only
  std::vector<float> feature;        // unit norm, scene feature_dim
};

struct Scene {
  int feature_dim = 0;
  double room_half_x = 0.0;
  double room_half_z = 0.0;
  double room_height = 0.0;  // room spans y in [-room_height, 0]
  // when false nothing but the objects is rendered, so a scene with no
  // objects produces all-invalid depth
  bool has_room_shell = false;
  std::vector<float> background_feature;  // unit norm
  std::vector<SceneObject> objects;

  const SceneObject* object(int id) const;
};

// Timed mutation of the scene during a trajectory. The event fires before
// the frame with index `frame` is rendered.
struct SceneEvent {
  enum class Kind { Move, Remove };

  std::uint64_t frame = 0;
  Kind kind = Kind::Move;
  int object_id = 0;
  Vec3 new_center = Vec3::Zero();  // Move only
};

// Places cfg.object_count solids (boxes and spheres) at non-overlapping
// floor positions inside a room shell. Object features (and the background
// feature) are random unit vectors redrawn until all pairwise |cos| <= 0.5,
// so identity is recoverable from features alone even at small dimensions.
// Deterministic in (cfg, feature_dim, seed).
Scene generate_scene(const SimConfig& cfg, int feature_dim, std::uint64_t seed);

// Teleports an object; the scene event behind relocation tests.
// Throws std::invalid_argument for an unknown id.
void move_object(Scene& scene, int object_id, const Vec3& new_center);

// Deletes an object outright. Throws std::invalid_argument for an unknown id.
void remove_object(Scene& scene, int object_id);

void apply_event(Scene& scene, const SceneEvent& event);

// fx = fy = focal_scale * width, principal point at the image centre.
CameraIntrinsics intrinsics_for(const SimConfig& cfg);

// Camera poses for cfg.frame_count frames. "orbit" circles the origin at
// trajectory.radius facing inward; "lawnmower" sweeps serpentine rows
// facing along the direction of travel; "survey" tiles a grid over the room
// with the heading stepping 90 degrees per frame (broad coverage for large
// scenes). phase in [0, 1) rotates the orbit start angle.
std::vector<Pose> trajectory_poses(const SimConfig& cfg, double phase = 0.0);

// Renders depth and mask images by casting one ray per pixel through the
// boxes and the room shell, then samples each of the 576 patch centres:
// depth/mask come straight from the images and the patch feature is the
// matching object (or background) feature plus a noise_sigma-scaled random
// unit perturbation, renormalised. Scaling the perturbation by total norm
// rather than per component keeps the expected cosine drop independent of
// feature_dim. Pixels with no forward hit get depth 0 (invalid).
ObservationFrame render_frame(const Scene& scene, const Pose& pose, const CameraIntrinsics& k,
                              std::uint64_t frame_id, double noise_sigma, SeededRng& rng);

struct SimDataset {
  CameraIntrinsics intrinsics;
  std::vector<ObservationFrame> frames;
  // provenance recorded in the manifest; not consumed by replay
  std::uint64_t seed = 0;
  std::vector<SceneEvent> events;
};

// Full pipeline: trajectory -> rendered frames with ids starting at
// first_frame_id. Deterministic in (scene, cfg, seed, first_frame_id, phase).
SimDataset build_dataset(const Scene& scene, const SimConfig& cfg, std::uint64_t seed,
                         std::uint64_t first_frame_id = 0, double phase = 0.0);

// Same pipeline over a mutable copy of the scene: each event fires before
// the frame with the matching index is rendered, so later frames show the
// moved or removed objects. Events are recorded in the returned dataset.
SimDataset build_dynamic_dataset(Scene scene, const SimConfig& cfg, std::uint64_t seed,
                                 std::vector<SceneEvent> events);

}  // namespace scenemem
