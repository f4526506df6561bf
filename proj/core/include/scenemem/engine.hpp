#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "scenemem/config.hpp"
#include "scenemem/discriminator.hpp"
#include "scenemem/instance_layer.hpp"
#include "scenemem/patch_store.hpp"
#include "scenemem/zone_layer.hpp"

namespace scenemem {

// Per-frame bookkeeping from one integrate() call. Counts reconcile: the
// live point total changes by exactly points_added - points_culled.
struct FrameStats {
  std::uint64_t frame_id = 0;
  std::size_t points_added = 0;
  std::size_t points_culled = 0;
  std::size_t instances_created = 0;
  std::size_t instances_merged = 0;     // groups absorbed into existing instances
  std::size_t instances_discarded = 0;  // emptied by culling
  std::size_t zones_touched = 0;        // distinct zones re-encoded or deleted
  double cull_ms = 0.0;
  double add_ms = 0.0;
  double merge_ms = 0.0;
  double zone_ms = 0.0;
};

// Deep copy of the full three-layer map state, detached from the engine.
// Safe to read while the engine keeps integrating.
struct MapSnapshot {
  PatchStore store;
  InstanceTable instances;
  ZoneTable zones;
};

// The three-layer map under a single writer. integrate() runs the pipeline
// cull -> instance/zone maintenance -> add -> group -> merge -> zone sync
// under the engine mutex; snapshot() hands readers an isolated copy.
class MapEngine {
 public:
  MapEngine(EngineConfig config, std::shared_ptr<const Aggregator> aggregator,
            std::shared_ptr<const MergingDiscriminator> discriminator);

  const EngineConfig& config() const { return config_; }

  // Integrates one observation. When harvest is non-null, every scored
  // merge pair with ground truth on both sides is appended.
  FrameStats integrate(const ObservationFrame& frame,
                       std::vector<LabeledPair>* harvest = nullptr);

  MapSnapshot snapshot() const;

  // Direct views for single-threaded callers (tools, tests). Not
  // synchronised against a concurrent integrate().
  const PatchStore& store() const { return store_; }
  const InstanceTable& instances() const { return instances_; }
  const ZoneTable& zones() const { return zones_; }

  // Versioned binary persistence. The layout is fixed and documented in
  // docs/formats.md; points are written in ascending id order, so
  // save -> load -> save reproduces the file byte for byte.
  void save_snapshot(const std::string& path) const;
  // Replaces the whole map state. Instances are rebuilt from the points'
  // owner fields and zones from the instances. Throws std::runtime_error
  // on bad magic, version or dimension mismatch, or truncation.
  void load_snapshot(const std::string& path);

  // FNV-1a 64 over the canonical snapshot byte stream; equal hashes mean
  // equal maps (up to hash collisions) without touching the filesystem.
  std::uint64_t map_hash() const;

  // Bulk-load path for map content that does not arrive through the
  // observation pipeline (geometry carried over from other rooms or prior
  // sessions). The point joins the index unowned; instances and zones are
  // untouched until observations group it.
  PointId preload_point(FeaturePoint point);

  void clear();

 private:
  std::vector<std::uint8_t> serialize_locked() const;

  EngineConfig config_;
  std::shared_ptr<const Aggregator> aggregator_;
  std::shared_ptr<const MergingDiscriminator> discriminator_;
  PatchStore store_;
  InstanceTable instances_;
  ZoneTable zones_;
  mutable std::mutex mutex_;
};

}  // namespace scenemem
