#include "scenemem/patch_store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace scenemem {

namespace {

std::int32_t cell_coord(double p, double cell_size) {
  return static_cast<std::int32_t>(std::floor(p / cell_size));
}

// Camera-frame frustum halfspaces for 0 < u < H, 0 < v < W, z < far.
// Each plane is n_w . p + d > 0 in world coordinates.
struct Halfspace {
  Vec3 n;
  double d;
};

std::array<Halfspace, 5> frustum_halfspaces(const Pose& pose, const CameraIntrinsics& k,
                                            double far) {
  const auto make = [&](const Vec3& n_cam, double extra) {
    return Halfspace{pose.rotation().transpose() * n_cam, n_cam.dot(pose.translation()) + extra};
  };
  return {
      make(Vec3(0.0, k.fy, k.cy), 0.0),                 // u > 0
      make(Vec3(0.0, -k.fy, k.height - k.cy), 0.0),     // u < H
      make(Vec3(k.fx, 0.0, k.cx), 0.0),                 // v > 0
      make(Vec3(-k.fx, 0.0, k.width - k.cx), 0.0),      // v < W
      make(Vec3(0.0, 0.0, -1.0), far),                  // z_c < far
  };
}

bool cell_intersects(const Halfspace& h, const Vec3& lo, const Vec3& hi) {
  double support = h.d;
  for (int a = 0; a < 3; ++a) support += h.n[a] * (h.n[a] > 0.0 ? hi[a] : lo[a]);
  return support > 0.0;
}

}  // namespace

PatchStore::PatchStore(double cell_size, int feature_dim)
    : cell_size_(cell_size), dim_(feature_dim) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("patch store: cell size must be > 0");
  if (feature_dim <= 0) throw std::invalid_argument("patch store: feature dim must be > 0");
}

CellKey PatchStore::cell_of(const Vec3& p) const {
  return {cell_coord(p.x(), cell_size_), cell_coord(p.y(), cell_size_),
          cell_coord(p.z(), cell_size_)};
}

const FeaturePoint* PatchStore::find(PointId id) const {
  auto it = points_.find(id);
  return it == points_.end() ? nullptr : &it->second;
}

std::vector<PointId> PatchStore::all_ids_sorted() const {
  std::vector<PointId> ids;
  ids.reserve(points_.size());
  for (const auto& [id, p] : points_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void PatchStore::index_insert(PointId id, const Vec3& p) { index_[cell_of(p)].push_back(id); }

void PatchStore::index_erase(PointId id, const Vec3& p) {
  const CellKey key = cell_of(p);
  auto it = index_.find(key);
  if (it == index_.end()) return;
  auto& ids = it->second;
  auto pos = std::find(ids.begin(), ids.end(), id);
  if (pos != ids.end()) {
    *pos = ids.back();
    ids.pop_back();
  }
  if (ids.empty()) index_.erase(it);
}

PointId PatchStore::insert_point(FeaturePoint point) {
  if (static_cast<int>(point.feature.size()) != dim_)
    throw std::invalid_argument("patch store: feature dimension mismatch on insert");
  const PointId id = next_id_++;
  index_insert(id, point.position);
  points_.emplace(id, std::move(point));
  return id;
}

void PatchStore::restore_point(PointId id, FeaturePoint point) {
  if (static_cast<int>(point.feature.size()) != dim_)
    throw std::invalid_argument("patch store: feature dimension mismatch on restore");
  if (points_.contains(id)) throw std::invalid_argument("patch store: duplicate point id");
  index_insert(id, point.position);
  points_.emplace(id, std::move(point));
  if (id >= next_id_) next_id_ = id + 1;
}

void PatchStore::set_owner(PointId id, std::optional<InstanceId> owner) {
  auto it = points_.find(id);
  if (it == points_.end()) throw std::invalid_argument("patch store: unknown point id");
  it->second.owner_instance = owner;
}

void PatchStore::set_next_point_id(std::uint64_t v) {
  if (v < next_id_) throw std::invalid_argument("patch store: next id may not move backwards");
  next_id_ = v;
}

std::vector<PointId> PatchStore::cull_candidates(DepthView depth, const Pose& pose,
                                                 const CameraIntrinsics& k, double delta,
                                                 double max_distance) const {
  k.validate();
  if (!(delta > 0.0) || !(max_distance > 0.0))
    throw std::invalid_argument("cull: delta and max_distance must be > 0");
  if (depth.data == nullptr || depth.height != k.height || depth.width != k.width)
    throw std::invalid_argument("cull: depth image does not match intrinsics");

  std::vector<PointId> culled;
  if (points_.empty()) return culled;

  // World AABB of the view pyramid truncated at max_distance: camera
  // centre plus the four far-plane corners.
  const Vec3 c = pose.camera_center();
  Vec3 lo = c;
  Vec3 hi = c;
  const double corner_u[2] = {0.0, static_cast<double>(k.height)};
  const double corner_v[2] = {0.0, static_cast<double>(k.width)};
  for (double uu : corner_u)
    for (double vv : corner_v) {
      const Vec3 p = unproject(uu, vv, max_distance, pose, k);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }

  const auto planes = frustum_halfspaces(pose, k, max_distance);
  const CellKey cell_lo{cell_coord(lo.x(), cell_size_), cell_coord(lo.y(), cell_size_),
                        cell_coord(lo.z(), cell_size_)};
  const CellKey cell_hi{cell_coord(hi.x(), cell_size_), cell_coord(hi.y(), cell_size_),
                        cell_coord(hi.z(), cell_size_)};
  const auto lattice_volume = static_cast<std::uint64_t>(cell_hi.x - cell_lo.x + 1) *
                              static_cast<std::uint64_t>(cell_hi.y - cell_lo.y + 1) *
                              static_cast<std::uint64_t>(cell_hi.z - cell_lo.z + 1);

  const auto test_cell_points = [&](const std::vector<PointId>& ids) {
    for (const PointId id : ids) {
      const FeaturePoint& fp = points_.at(id);
      if (cull_predicate(fp.position, depth, pose, k, delta, max_distance)) culled.push_back(id);
    }
  };
  const auto cell_bounds = [&](const CellKey& key, Vec3& clo, Vec3& chi) {
    clo = Vec3(key.x * cell_size_, key.y * cell_size_, key.z * cell_size_);
    chi = clo + Vec3(cell_size_, cell_size_, cell_size_);
  };
  const auto cell_passes = [&](const CellKey& key) {
    Vec3 clo, chi;
    cell_bounds(key, clo, chi);
    for (const auto& plane : planes)
      if (!cell_intersects(plane, clo, chi)) return false;
    return true;
  };

  if (lattice_volume <= index_.size()) {
    CellKey key;
    for (key.x = cell_lo.x; key.x <= cell_hi.x; ++key.x)
      for (key.y = cell_lo.y; key.y <= cell_hi.y; ++key.y)
        for (key.z = cell_lo.z; key.z <= cell_hi.z; ++key.z) {
          if (!cell_passes(key)) continue;
          auto it = index_.find(key);
          if (it != index_.end()) test_cell_points(it->second);
        }
  } else {
    for (const auto& [key, ids] : index_) {
      if (key.x < cell_lo.x || key.x > cell_hi.x || key.y < cell_lo.y || key.y > cell_hi.y ||
          key.z < cell_lo.z || key.z > cell_hi.z)
        continue;
      if (!cell_passes(key)) continue;
      test_cell_points(ids);
    }
  }

  std::sort(culled.begin(), culled.end());
  return culled;
}

RemovalReport PatchStore::cull_frame(DepthView depth, const Pose& pose, const CameraIntrinsics& k,
                                     double delta, double max_distance) {
  RemovalReport report;
  report.removed = cull_candidates(depth, pose, k, delta, max_distance);
  for (const PointId id : report.removed) {
    auto it = points_.find(id);
    if (it->second.owner_instance)
      report.by_owner[*it->second.owner_instance].push_back(id);
    else
      report.unowned.push_back(id);
    index_erase(id, it->second.position);
    points_.erase(it);
  }
  return report;
}

std::vector<std::pair<std::uint16_t, PointId>> PatchStore::add_frame_points(
    const ObservationFrame& frame, double max_distance) {
  frame.validate(dim_);
  std::vector<std::pair<std::uint16_t, PointId>> added;
  for (int i = 0; i < kPatchCount; ++i) {
    const float d = frame.patch_depth(i);
    if (!(d > 0.0f) || !(static_cast<double>(d) < max_distance)) continue;
    const auto feat = frame.patch_feature(i);
    double norm_sq = 0.0;
    for (const float f : feat) norm_sq += static_cast<double>(f) * f;
    if (!(norm_sq > 1e-12))
      throw std::invalid_argument("frame: zero patch feature at a valid-depth patch");
    const double inv = 1.0 / std::sqrt(norm_sq);

    const PatchGeometry g = patch_geometry(frame.pose, frame.intrinsics, i / kPatchGridSize,
                                           i % kPatchGridSize, static_cast<double>(d));
    FeaturePoint fp;
    fp.feature.resize(feat.size());
    for (std::size_t j = 0; j < feat.size(); ++j)
      fp.feature[j] = static_cast<float>(feat[j] * inv);
    fp.position = g.position;
    fp.heading = g.heading;
    fp.size = g.size;
    fp.frame_id = frame.frame_id;
    fp.patch_index = static_cast<std::uint16_t>(i);
    const std::int32_t mask = frame.patch_mask(i);
    if (frame.masks_are_ground_truth && mask > 0) fp.gt_instance_id = mask;
    added.emplace_back(static_cast<std::uint16_t>(i), insert_point(std::move(fp)));
  }
  ++frame_counter_;
  return added;
}

FrameDiff PatchStore::integrate_frame(const ObservationFrame& frame, double delta,
                                      double max_distance) {
  frame.validate(dim_);
  FrameDiff diff;
  diff.removals =
      cull_frame(frame.depth_view(), frame.pose, frame.intrinsics, delta, max_distance);
  diff.added = add_frame_points(frame, max_distance);
  return diff;
}

std::vector<KnnHit> PatchStore::knn(const Vec3& query, int k) const {
  if (k <= 0) throw std::invalid_argument("knn: k must be > 0");
  std::vector<KnnHit> out;
  if (points_.empty()) return out;

  // Max-heap of the best k (distance, id) pairs seen so far.
  using Entry = std::pair<double, PointId>;
  std::priority_queue<Entry> heap;
  const auto consider = [&](PointId id, const Vec3& pos) {
    const double d2 = (pos - query).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace(d2, id);
    } else if (Entry(d2, id) < heap.top()) {
      heap.pop();
      heap.emplace(d2, id);
    }
  };

  const CellKey center = cell_of(query);
  const std::size_t want = std::min(static_cast<std::size_t>(k), points_.size());
  std::size_t nonempty_seen = 0;
  for (std::int32_t ring = 0;; ++ring) {
    // Shell of cells at Chebyshev distance `ring`.
    for (std::int32_t dx = -ring; dx <= ring; ++dx)
      for (std::int32_t dy = -ring; dy <= ring; ++dy)
        for (std::int32_t dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          auto it = index_.find({center.x + dx, center.y + dy, center.z + dz});
          if (it == index_.end()) continue;
          ++nonempty_seen;
          for (const PointId id : it->second) consider(id, points_.at(id).position);
        }
    if (nonempty_seen == index_.size()) break;
    // Any point in ring r+1 or beyond lies strictly farther than
    // ring * cell_size from the query.
    if (heap.size() >= want && heap.size() == static_cast<std::size_t>(k)) {
      const double bound = static_cast<double>(ring) * cell_size_;
      if (heap.top().first <= bound * bound) break;
    }
  }

  out.resize(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().second, std::sqrt(heap.top().first)};
    heap.pop();
  }
  return out;
}

std::optional<RayHit> PatchStore::ray_query(const Vec3& origin, const Vec3& dir, double radius,
                                            double max_range) const {
  if (std::abs(dir.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("ray_query: direction must be unit length");
  if (!(radius > 0.0) || !(max_range > 0.0))
    throw std::invalid_argument("ray_query: radius and max_range must be > 0");
  if (points_.empty()) return std::nullopt;

  const std::int32_t reach = static_cast<std::int32_t>(std::ceil(radius / cell_size_));
  std::unordered_set<CellKey, CellKeyHash> visited;
  std::optional<RayHit> best;

  const auto consider_cell = [&](const CellKey& key) {
    auto it = index_.find(key);
    if (it == index_.end()) return;
    for (const PointId id : it->second) {
      const FeaturePoint& fp = points_.at(id);
      const Vec3 rel = fp.position - origin;
      const double t = rel.dot(dir);
      if (!(t > 0.0 && t <= max_range)) continue;
      if ((rel - t * dir).norm() > radius) continue;
      if (!best || t < best->depth || (t == best->depth && id < best->id))
        best = RayHit{id, t, &fp};
    }
  };
  const auto visit_neighbourhood = [&](const CellKey& c) {
    for (std::int32_t dx = -reach; dx <= reach; ++dx)
      for (std::int32_t dy = -reach; dy <= reach; ++dy)
        for (std::int32_t dz = -reach; dz <= reach; ++dz) {
          const CellKey key{c.x + dx, c.y + dy, c.z + dz};
          if (visited.insert(key).second) consider_cell(key);
        }
  };

  // Amanatides-Woo traversal of the segment [0, max_range] along dir.
  CellKey cell = cell_of(origin);
  Vec3 t_max, t_delta;
  std::int32_t step[3];
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 1e-15) {
      step[a] = 1;
      t_max[a] = ((cell_coord(origin[a], cell_size_) + 1) * cell_size_ - origin[a]) / dir[a];
      t_delta[a] = cell_size_ / dir[a];
    } else if (dir[a] < -1e-15) {
      step[a] = -1;
      t_max[a] = (cell_coord(origin[a], cell_size_) * cell_size_ - origin[a]) / dir[a];
      t_delta[a] = -cell_size_ / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  const double slack = (reach + 1) * cell_size_ * 1.7320508075688772;  // sqrt(3)
  double t_entry = 0.0;
  while (t_entry <= max_range) {
    if (best && t_entry > best->depth + slack) break;
    visit_neighbourhood(cell);
    const int axis = t_max.x() <= t_max.y() ? (t_max.x() <= t_max.z() ? 0 : 2)
                                            : (t_max.y() <= t_max.z() ? 1 : 2);
    t_entry = t_max[axis];
    if (step[axis] == 0) break;
    t_max[axis] += t_delta[axis];
    switch (axis) {
      case 0: cell.x += step[axis]; break;
      case 1: cell.y += step[axis]; break;
      default: cell.z += step[axis]; break;
    }
  }
  return best;
}

bool PatchStore::check_index_consistency() const {
  std::size_t indexed = 0;
  for (const auto& [key, ids] : index_) {
    if (ids.empty()) return false;
    for (const PointId id : ids) {
      auto it = points_.find(id);
      if (it == points_.end()) return false;
      if (cell_of(it->second.position) != key) return false;
      ++indexed;
    }
  }
  return indexed == points_.size();
}

}  // namespace scenemem
