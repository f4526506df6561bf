#include "scenemem/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace scenemem {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return dot;  // inputs are unit norm
}

// Smallest s > eps with origin + s * dir inside [lo, hi] on every axis.
// Returns a negative value on miss. dir need not be unit length; s is in
// dir units, which the renderer arranges to be camera depth z_c.
double box_entry(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi) {
  constexpr double kEps = 1e-9;
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = origin[axis];
    const double d = dir[axis];
    if (std::abs(d) < 1e-12) {
      if (o < lo[axis] || o > hi[axis]) return -1.0;
      continue;
    }
    double t1 = (lo[axis] - o) / d;
    double t2 = (hi[axis] - o) / d;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return -1.0;
  }
  if (tmin > kEps) return tmin;   // ray starts outside the box
  if (tmax > kEps) return tmax;   // ray starts inside; take the exit face
  return -1.0;
}

// Same contract as box_entry for a sphere.
double sphere_entry(const Vec3& origin, const Vec3& dir, const Vec3& center, double radius) {
  constexpr double kEps = 1e-9;
  const Vec3 oc = origin - center;
  const double a = dir.squaredNorm();
  const double b = 2.0 * oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  const double s1 = (-b - sq) / (2.0 * a);
  if (s1 > kEps) return s1;
  const double s2 = (-b + sq) / (2.0 * a);
  if (s2 > kEps) return s2;
  return -1.0;
}

double object_entry(const Vec3& origin, const Vec3& dir, const SceneObject& obj) {
  if (obj.shape == SceneObject::Shape::Sphere)
    return sphere_entry(origin, dir, obj.center, obj.radius);
  return box_entry(origin, dir, obj.center - obj.half_extents, obj.center + obj.half_extents);
}

std::vector<float> perturbed_unit(const std::vector<float>& base, double sigma, SeededRng& rng) {
  std::vector<float> out = base;
  if (sigma > 0.0) {
    const auto noise = rng.unit_vector(static_cast<int>(base.size()));
    double norm_sq = 0.0;
    std::vector<double> acc(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      acc[i] = static_cast<double>(base[i]) + sigma * noise[i];
      norm_sq += acc[i] * acc[i];
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (std::size_t i = 0; i < base.size(); ++i) out[i] = static_cast<float>(acc[i] * inv);
  }
  return out;
}

}  // namespace

const SceneObject* Scene::object(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

Scene generate_scene(const SimConfig& cfg, int feature_dim, std::uint64_t seed) {
  cfg.validate();
  if (feature_dim <= 0) throw std::invalid_argument("generate_scene: feature_dim must be > 0");

  SeededRng rng(SeededRng::mix(seed, 0x5ce11e5ull));
  Scene scene;
  scene.feature_dim = feature_dim;
  scene.room_half_x = cfg.room_half_x;
  scene.room_half_z = cfg.room_half_z;
  scene.room_height = cfg.room_height;
  scene.has_room_shell = true;

  // Features: background + one per object, mutually separated so the
  // heuristic cosine threshold can tell objects apart at any dimension.
  std::vector<std::vector<float>> feats;
  feats.push_back(rng.unit_vector(feature_dim));
  int redraws = 0;
  while (feats.size() < static_cast<std::size_t>(cfg.object_count) + 1) {
    auto cand = rng.unit_vector(feature_dim);
    bool ok = true;
    for (const auto& f : feats)
      if (std::abs(cosine(f, cand)) > 0.5) {
        ok = false;
        break;
      }
    if (ok) {
      feats.push_back(std::move(cand));
    } else if (++redraws > 20000) {
      throw std::runtime_error("generate_scene: could not separate object features");
    }
  }
  scene.background_feature = std::move(feats[0]);

  // Boxes: rejection-sample non-overlapping floor footprints with a wall
  // margin so every object is fully inside the room.
  const double wall_margin = 0.3;
  const double gap = 0.15;
  const auto footprint_x = [](const SceneObject& o) {
    return o.shape == SceneObject::Shape::Sphere ? o.radius : o.half_extents.x();
  };
  const auto footprint_z = [](const SceneObject& o) {
    return o.shape == SceneObject::Shape::Sphere ? o.radius : o.half_extents.z();
  };
  for (int id = 1; id <= cfg.object_count; ++id) {
    SceneObject obj;
    obj.id = id;
    obj.feature = std::move(feats[static_cast<std::size_t>(id)]);
    bool placed = false;
    for (int attempt = 0; attempt < 20000 && !placed; ++attempt) {
      obj.shape =
          rng.next_double() < 0.5 ? SceneObject::Shape::Box : SceneObject::Shape::Sphere;
      double fx, fz, cy;
      if (obj.shape == SceneObject::Shape::Sphere) {
        obj.radius = rng.uniform(cfg.min_extent, cfg.max_extent);
        obj.half_extents = Vec3::Zero();
        fx = fz = obj.radius;
        cy = -obj.radius;
      } else {
        obj.radius = 0.0;
        obj.half_extents = Vec3(rng.uniform(cfg.min_extent, cfg.max_extent),
                                rng.uniform(cfg.min_extent, cfg.max_extent),
                                rng.uniform(cfg.min_extent, cfg.max_extent));
        fx = obj.half_extents.x();
        fz = obj.half_extents.z();
        cy = -obj.half_extents.y();
      }
      const double span_x = cfg.room_half_x - fx - wall_margin;
      const double span_z = cfg.room_half_z - fz - wall_margin;
      if (span_x <= 0.0 || span_z <= 0.0) continue;
      obj.center = Vec3(rng.uniform(-span_x, span_x), cy, rng.uniform(-span_z, span_z));
      bool overlaps = false;
      for (const auto& other : scene.objects) {
        const bool apart_x =
            std::abs(obj.center.x() - other.center.x()) > fx + footprint_x(other) + gap;
        const bool apart_z =
            std::abs(obj.center.z() - other.center.z()) > fz + footprint_z(other) + gap;
        if (!apart_x && !apart_z) {
          overlaps = true;
          break;
        }
      }
      placed = !overlaps;
    }
    if (!placed)
      throw std::runtime_error("generate_scene: could not place object " + std::to_string(id));
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

void move_object(Scene& scene, int object_id, const Vec3& new_center) {
  for (auto& o : scene.objects)
    if (o.id == object_id) {
      o.center = new_center;
      return;
    }
  throw std::invalid_argument("move_object: unknown object id " + std::to_string(object_id));
}

void remove_object(Scene& scene, int object_id) {
  for (auto it = scene.objects.begin(); it != scene.objects.end(); ++it)
    if (it->id == object_id) {
      scene.objects.erase(it);
      return;
    }
  throw std::invalid_argument("remove_object: unknown object id " + std::to_string(object_id));
}

void apply_event(Scene& scene, const SceneEvent& event) {
  if (event.kind == SceneEvent::Kind::Move)
    move_object(scene, event.object_id, event.new_center);
  else
    remove_object(scene, event.object_id);
}

CameraIntrinsics intrinsics_for(const SimConfig& cfg) {
  CameraIntrinsics k;
  k.height = cfg.render_height;
  k.width = cfg.render_width;
  k.fx = cfg.focal_scale * cfg.render_width;
  k.fy = cfg.focal_scale * cfg.render_width;
  k.cx = 0.5 * (cfg.render_width - 1);
  k.cy = 0.5 * (cfg.render_height - 1);
  k.validate();
  return k;
}

std::vector<Pose> trajectory_poses(const SimConfig& cfg, double phase) {
  cfg.validate();
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(cfg.frame_count));
  const int n = cfg.frame_count;

  if (cfg.trajectory == "orbit") {
    for (int i = 0; i < n; ++i) {
      const double angle = kTwoPi * (static_cast<double>(i) / n + phase);
      const Vec3 pos(cfg.orbit_radius * std::sin(angle), -cfg.camera_height,
                     cfg.orbit_radius * std::cos(angle));
      const double heading = std::atan2(-pos.x(), -pos.z());  // face the origin
      poses.push_back(Pose::from_heading(pos, heading));
    }
    return poses;
  }

  if (cfg.trajectory == "lawnmower") {
    const int rows = std::clamp(n / 8, 2, 6);
    const double x_span = 0.7 * cfg.room_half_x;
    const double z_lo = -0.7 * cfg.room_half_z;
    const double z_hi = 0.7 * cfg.room_half_z;
    for (int i = 0; i < n; ++i) {
      const int per_row = (n + rows - 1) / rows;
      const int row = std::min(i / per_row, rows - 1);
      const int step = i - row * per_row;
      const int row_len = std::min(per_row, n - row * per_row);
      const double frac = row_len > 1 ? static_cast<double>(step) / (row_len - 1) : 0.5;
      const bool forward = row % 2 == 0;
      const double x = forward ? -x_span + 2.0 * x_span * frac : x_span - 2.0 * x_span * frac;
      const double z = rows > 1 ? z_lo + (z_hi - z_lo) * row / (rows - 1) : 0.0;
      const double heading = forward ? std::numbers::pi / 2.0 : -std::numbers::pi / 2.0;
      poses.push_back(Pose::from_heading(Vec3(x, -cfg.camera_height, z), heading));
    }
    return poses;
  }

  // survey: grid of standpoints, heading stepping 90 degrees per frame
  const int grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  for (int i = 0; i < n; ++i) {
    const int gx = i % grid;
    const int gz = i / grid;
    const double fx = grid > 1 ? static_cast<double>(gx) / (grid - 1) : 0.5;
    const double fz = grid > 1 ? static_cast<double>(gz) / (grid - 1) : 0.5;
    const double x = -0.8 * cfg.room_half_x + 1.6 * cfg.room_half_x * fx;
    const double z = -0.8 * cfg.room_half_z + 1.6 * cfg.room_half_z * fz;
    const double heading = (i % 4) * (std::numbers::pi / 2.0);
    poses.push_back(Pose::from_heading(Vec3(x, -cfg.camera_height, z), heading));
  }
  return poses;
}

ObservationFrame render_frame(const Scene& scene, const Pose& pose, const CameraIntrinsics& k,
                              std::uint64_t frame_id, double noise_sigma, SeededRng& rng) {
  k.validate();
  if (scene.feature_dim <= 0 ||
      scene.background_feature.size() != static_cast<std::size_t>(scene.feature_dim))
    throw std::invalid_argument("render_frame: scene features not initialised");
  if (noise_sigma < 0.0) throw std::invalid_argument("render_frame: noise_sigma must be >= 0");

  ObservationFrame f;
  f.frame_id = frame_id;
  f.pose = pose;
  f.intrinsics = k;
  f.feature_dim = scene.feature_dim;
  f.masks_are_ground_truth = true;
  const std::size_t pixels = static_cast<std::size_t>(k.height) * k.width;
  f.depth.assign(pixels, 0.0f);
  f.masks.assign(pixels, 0);

  const Mat3 cam_to_world = pose.rotation().transpose();
  const Vec3 center = pose.camera_center();
  const Vec3 room_lo(-scene.room_half_x, -scene.room_height, -scene.room_half_z);
  const Vec3 room_hi(scene.room_half_x, 0.0, scene.room_half_z);

  for (int r = 0; r < k.height; ++r) {
    for (int c = 0; c < k.width; ++c) {
      // direction per unit camera depth, so the slab parameter equals z_c
      const Vec3 dir_c((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      const Vec3 dir_w = cam_to_world * dir_c;
      double best = scene.has_room_shell ? box_entry(center, dir_w, room_lo, room_hi) : -1.0;
      int best_id = best > 0.0 ? 0 : -1;
      for (const auto& obj : scene.objects) {
        const double s = object_entry(center, dir_w, obj);
        if (s > 0.0 && (best_id < 0 || s < best)) {
          best = s;
          best_id = obj.id;
        }
      }
      if (best_id >= 0) {
        const std::size_t idx = static_cast<std::size_t>(r) * k.width + c;
        f.depth[idx] = static_cast<float>(best);
        f.masks[idx] = best_id;
      }
    }
  }

  f.patch_features.reserve(static_cast<std::size_t>(kPatchCount) * scene.feature_dim);
  for (int i = 0; i < kPatchCount; ++i) {
    const int row = i / kPatchGridSize;
    const int col = i % kPatchGridSize;
    const int pr = nearest_pixel(patch_center_u(row, k.height), k.height);
    const int pc = nearest_pixel(patch_center_v(col, k.width), k.width);
    const int mask_id = f.masks[static_cast<std::size_t>(pr) * k.width + pc];
    const std::vector<float>& base =
        mask_id > 0 ? scene.object(mask_id)->feature : scene.background_feature;
    const auto feat = perturbed_unit(base, noise_sigma, rng);
    f.patch_features.insert(f.patch_features.end(), feat.begin(), feat.end());
  }
  f.validate(scene.feature_dim);
  return f;
}

SimDataset build_dataset(const Scene& scene, const SimConfig& cfg, std::uint64_t seed,
                         std::uint64_t first_frame_id, double phase) {
  SimDataset out;
  out.intrinsics = intrinsics_for(cfg);
  out.seed = seed;
  const auto poses = trajectory_poses(cfg, phase);
  SeededRng rng(SeededRng::mix(seed, 0xf7a3e5ull));
  out.frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i)
    out.frames.push_back(render_frame(scene, poses[i], out.intrinsics,
                                      first_frame_id + i, cfg.noise_sigma, rng));
  return out;
}

SimDataset build_dynamic_dataset(Scene scene, const SimConfig& cfg, std::uint64_t seed,
                                 std::vector<SceneEvent> events) {
  SimDataset out;
  out.intrinsics = intrinsics_for(cfg);
  out.seed = seed;
  std::stable_sort(events.begin(), events.end(),
                   [](const SceneEvent& a, const SceneEvent& b) { return a.frame < b.frame; });
  const auto poses = trajectory_poses(cfg);
  SeededRng rng(SeededRng::mix(seed, 0xf7a3e5ull));
  std::size_t next_event = 0;
  out.frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    while (next_event < events.size() && events[next_event].frame == i)
      apply_event(scene, events[next_event++]);
    out.frames.push_back(render_frame(scene, poses[i], out.intrinsics, i, cfg.noise_sigma, rng));
  }
  if (next_event != events.size())
    throw std::invalid_argument("build_dynamic_dataset: event frame beyond the trajectory");
  out.events = std::move(events);
  return out;
}

}  // namespace scenemem
