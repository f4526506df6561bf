#include "scenemem/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace scenemem {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr char kSnapshotMagic[4] = {'D', 'Y', 'N', '3'};
constexpr std::uint16_t kSnapshotVersion = 1;

void write_point(std::ostream& os, PointId id, const FeaturePoint& p) {
  using detail::write_array;
  using detail::write_pod;
  write_pod(os, static_cast<std::uint64_t>(id));
  write_array(os, p.feature.data(), p.feature.size());
  for (int i = 0; i < 3; ++i) write_pod(os, p.position[i]);
  write_pod(os, p.heading);
  write_pod(os, p.size);
  write_pod(os, static_cast<std::uint64_t>(p.frame_id));
  write_pod(os, p.patch_index);
  write_pod(os, static_cast<std::int64_t>(p.gt_instance_id ? *p.gt_instance_id : -1));
  write_pod(os, p.owner_instance ? static_cast<std::int64_t>(*p.owner_instance) : -1);
}

}  // namespace

MapEngine::MapEngine(EngineConfig config, std::shared_ptr<const Aggregator> aggregator,
                     std::shared_ptr<const MergingDiscriminator> discriminator)
    : config_(std::move(config)),
      aggregator_(std::move(aggregator)),
      discriminator_(std::move(discriminator)),
      store_(config_.cell_size, config_.feature_dim),
      instances_(aggregator_),
      zones_(config_.zone_size, aggregator_) {
  config_.validate();
  if (!aggregator_) throw std::invalid_argument("MapEngine: null aggregator");
  if (!discriminator_) throw std::invalid_argument("MapEngine: null discriminator");
  if (aggregator_->feature_dim() != config_.feature_dim)
    throw std::invalid_argument("MapEngine: aggregator dimension disagrees with config");
}

FrameStats MapEngine::integrate(const ObservationFrame& frame,
                                std::vector<LabeledPair>* harvest) {
  std::lock_guard lock(mutex_);
  frame.validate(config_.feature_dim);

  FrameStats stats;
  stats.frame_id = frame.frame_id;
  std::set<CellKey> touched;
  const auto note_zone = [&](InstanceId id) {
    if (const CellKey* key = zones_.zone_of_instance(id)) touched.insert(*key);
  };

  // 1. cull stale geometry in front of the new depth surface
  auto t0 = Clock::now();
  const RemovalReport removals = store_.cull_frame(frame.depth_view(), frame.pose,
                                                   frame.intrinsics, config_.cull_delta,
                                                   config_.cull_max_distance);
  stats.points_culled = removals.removed.size();

  // instance/zone maintenance for whatever the cull took away
  const InstanceUpdateReport update = instances_.handle_removals(store_, removals);
  stats.instances_discarded = update.deleted.size();
  for (const InstanceId id : update.deleted) {
    note_zone(id);
    zones_.remove_instance(instances_, id);
  }
  for (const InstanceId id : update.modified) {
    note_zone(id);
    zones_.update_for_instance(instances_, id);
    note_zone(id);
  }
  stats.cull_ms = ms_since(t0);

  // 2. lift the new frame's patches into the store
  t0 = Clock::now();
  FrameDiff diff;
  diff.added = store_.add_frame_points(frame, config_.cull_max_distance);
  stats.points_added = diff.added.size();
  stats.add_ms = ms_since(t0);

  // 3. group by mask and merge-or-create
  t0 = Clock::now();
  const auto groups = group_patches_by_mask(store_, frame, diff);
  const auto decisions = instances_.merge_step(store_, groups, *discriminator_,
                                               config_.merge_top_k, config_.merge_threshold,
                                               harvest);
  for (const auto& d : decisions) {
    if (d.created)
      ++stats.instances_created;
    else
      ++stats.instances_merged;
  }
  stats.merge_ms = ms_since(t0);

  // 4. sync zones for every instance the merge step touched
  t0 = Clock::now();
  for (const auto& d : decisions) {
    note_zone(d.target);
    zones_.update_for_instance(instances_, d.target);
    note_zone(d.target);
  }
  stats.zone_ms = ms_since(t0);
  stats.zones_touched = touched.size();
  return stats;
}

MapSnapshot MapEngine::snapshot() const {
  std::lock_guard lock(mutex_);
  return MapSnapshot{store_, instances_, zones_};
}

std::vector<std::uint8_t> MapEngine::serialize_locked() const {
  std::ostringstream os(std::ios::binary);
  os.write(kSnapshotMagic, 4);
  detail::write_pod(os, kSnapshotVersion);
  detail::write_pod(os, static_cast<std::uint16_t>(config_.feature_dim));
  detail::write_pod(os, static_cast<std::uint64_t>(store_.size()));
  detail::write_pod(os, store_.next_point_id());
  detail::write_pod(os, instances_.next_instance_id());
  detail::write_pod(os, store_.frame_counter());
  for (const PointId id : store_.all_ids_sorted()) write_point(os, id, *store_.find(id));
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

void MapEngine::save_snapshot(const std::string& path) const {
  std::lock_guard lock(mutex_);
  const auto bytes = serialize_locked();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open snapshot for writing: " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("snapshot write failed: " + path);
}

void MapEngine::load_snapshot(const std::string& path) {
  using detail::read_array;
  using detail::read_pod;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open snapshot: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kSnapshotMagic, 4) != 0)
    throw std::runtime_error("not a map snapshot (bad magic): " + path);
  const auto version = read_pod<std::uint16_t>(is, "snapshot version");
  if (version != kSnapshotVersion)
    throw std::runtime_error("unsupported snapshot version " + std::to_string(version) +
                             " in " + path);
  const auto dim = read_pod<std::uint16_t>(is, "snapshot feature_dim");
  if (dim != config_.feature_dim)
    throw std::runtime_error("snapshot feature_dim " + std::to_string(dim) +
                             " disagrees with the engine's " +
                             std::to_string(config_.feature_dim));
  const auto count = read_pod<std::uint64_t>(is, "snapshot point count");
  const auto next_point = read_pod<std::uint64_t>(is, "snapshot next point id");
  const auto next_instance = read_pod<std::uint64_t>(is, "snapshot next instance id");
  const auto frames = read_pod<std::uint64_t>(is, "snapshot frame counter");

  std::lock_guard lock(mutex_);
  store_ = PatchStore(config_.cell_size, config_.feature_dim);
  instances_.clear();
  zones_.clear();

  std::map<InstanceId, std::vector<PointId>> members;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id = read_pod<std::uint64_t>(is, "point id");
    FeaturePoint p;
    p.feature.resize(static_cast<std::size_t>(dim));
    read_array(is, p.feature.data(), p.feature.size(), "point feature");
    for (int k = 0; k < 3; ++k) p.position[k] = read_pod<double>(is, "point position");
    p.heading = read_pod<double>(is, "point heading");
    p.size = read_pod<double>(is, "point size");
    p.frame_id = read_pod<std::uint64_t>(is, "point frame id");
    p.patch_index = read_pod<std::uint16_t>(is, "point patch index");
    const auto gt = read_pod<std::int64_t>(is, "point ground truth");
    if (gt >= 0) p.gt_instance_id = gt;
    const auto owner = read_pod<std::int64_t>(is, "point owner");
    if (owner >= 0) {
      p.owner_instance = static_cast<InstanceId>(owner);
      members[static_cast<InstanceId>(owner)].push_back(id);
    }
    store_.restore_point(id, std::move(p));
  }
  char extra;
  if (is.read(&extra, 1)) throw std::runtime_error("trailing bytes after snapshot: " + path);

  store_.set_next_point_id(next_point);
  store_.set_frame_counter(frames);
  for (auto& [owner, ids] : members)
    instances_.restore_instance(owner, std::move(ids), store_);
  instances_.set_next_instance_id(next_instance);
  zones_.rebuild(instances_);
}

std::uint64_t MapEngine::map_hash() const {
  std::lock_guard lock(mutex_);
  const auto bytes = serialize_locked();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

PointId MapEngine::preload_point(FeaturePoint point) {
  const std::scoped_lock lock(mutex_);
  return store_.insert_point(std::move(point));
}

void MapEngine::clear() {
  std::lock_guard lock(mutex_);
  store_ = PatchStore(config_.cell_size, config_.feature_dim);
  instances_.clear();
  zones_.clear();
}

}  // namespace scenemem
