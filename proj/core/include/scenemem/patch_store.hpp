#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "scenemem/geometry.hpp"
#include "scenemem/observation.hpp"

namespace scenemem {

using PointId = std::uint64_t;
using InstanceId = std::uint64_t;

// One patch feature point lifted to 3D: feature, world position, observed
// heading and metric footprint, plus provenance. Features are unit-norm
// (within 1e-6) with the dimension fixed per store.
struct FeaturePoint {
  std::vector<float> feature;
  Vec3 position = Vec3::Zero();
  double heading = 0.0;
  double size = 0.0;
  std::uint64_t frame_id = 0;
  std::uint16_t patch_index = 0;
  std::optional<std::int64_t> gt_instance_id;   // simulation-only ground truth
  std::optional<InstanceId> owner_instance;     // set once merged into an instance
};

struct CellKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& c) const {
    std::uint64_t h = static_cast<std::uint32_t>(c.x);
    h = h * 0x9E3779B97F4A7C15ull + static_cast<std::uint32_t>(c.y);
    h = h * 0x9E3779B97F4A7C15ull + static_cast<std::uint32_t>(c.z);
    h ^= h >> 29;
    h *= 0xBF58476D1CE4E5B9ull;
    return static_cast<std::size_t>(h ^ (h >> 32));
  }
};

// Points removed by one cull pass, grouped for instance maintenance.
// All id lists are sorted ascending.
struct RemovalReport {
  std::vector<PointId> removed;
  std::map<InstanceId, std::vector<PointId>> by_owner;
  std::vector<PointId> unowned;
};

struct FrameDiff {
  RemovalReport removals;
  std::vector<std::pair<std::uint16_t, PointId>> added;  // (patch_index, id), patch order
};

struct KnnHit {
  PointId id = 0;
  double distance = 0.0;
};

struct RayHit {
  PointId id = 0;
  double depth = 0.0;  // along-ray distance to the point's perpendicular foot
  const FeaturePoint* point = nullptr;
};

// Patch-level map memory: id-addressed feature points plus a uniform
// voxel-hash index over positions. The index is purely an accelerator;
// every query is defined by its brute-force equivalent over all points.
class PatchStore {
 public:
  explicit PatchStore(double cell_size = 0.5, int feature_dim = 768);

  int feature_dim() const { return dim_; }
  double cell_size() const { return cell_size_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const std::unordered_map<PointId, FeaturePoint>& points() const { return points_; }
  const FeaturePoint* find(PointId id) const;
  std::vector<PointId> all_ids_sorted() const;

  // Monotone id assignment; ids are never reused.
  PointId insert_point(FeaturePoint point);
  // Snapshot-load path: inserts with a fixed id and keeps next_point_id
  // ahead of it. Throws on duplicate ids.
  void restore_point(PointId id, FeaturePoint point);
  void set_owner(PointId id, std::optional<InstanceId> owner);

  // Ids of stored points that the observation culls (frustum test against
  // the new depth image). Pure query; sorted ascending.
  std::vector<PointId> cull_candidates(DepthView depth, const Pose& pose,
                                       const CameraIntrinsics& k, double delta,
                                       double max_distance) const;
  // Removes the culled points and reports them grouped by owner instance.
  RemovalReport cull_frame(DepthView depth, const Pose& pose, const CameraIntrinsics& k,
                           double delta, double max_distance);

  // Adds one point per patch whose centre depth d satisfies
  // 0 < d < max_distance. Farther patches are skipped so that
  // re-observation can always cull what integration added. Returns
  // (patch_index, id) pairs and bumps the integrated-frame counter.
  std::vector<std::pair<std::uint16_t, PointId>> add_frame_points(const ObservationFrame& frame,
                                                                  double max_distance);

  // Cull-then-add under one observation.
  FrameDiff integrate_frame(const ObservationFrame& frame, double delta, double max_distance);

  // k nearest stored points by Euclidean distance, ties by ascending id.
  std::vector<KnnHit> knn(const Vec3& query, int k) const;

  // Nearest point along a unit ray: smallest along-ray distance t in
  // (0, max_range] among points with perpendicular distance <= radius.
  // Ties by ascending id. Throws unless |dir| = 1 within 1e-9.
  std::optional<RayHit> ray_query(const Vec3& origin, const Vec3& dir, double radius,
                                  double max_range) const;

  std::uint64_t frame_counter() const { return frame_counter_; }
  void set_frame_counter(std::uint64_t v) { frame_counter_ = v; }
  std::uint64_t next_point_id() const { return next_id_; }
  void set_next_point_id(std::uint64_t v);

  CellKey cell_of(const Vec3& p) const;
  // Full-scan invariant check: index cells and stored points agree.
  bool check_index_consistency() const;

 private:
  void index_insert(PointId id, const Vec3& p);
  void index_erase(PointId id, const Vec3& p);

  double cell_size_;
  int dim_;
  std::uint64_t next_id_ = 1;
  std::uint64_t frame_counter_ = 0;
  std::unordered_map<PointId, FeaturePoint> points_;
  std::unordered_map<CellKey, std::vector<PointId>, CellKeyHash> index_;
};

}  // namespace scenemem
