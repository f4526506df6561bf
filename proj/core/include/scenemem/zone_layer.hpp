#pragma once

#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include "scenemem/instance_layer.hpp"
#include "scenemem/patch_store.hpp"

namespace scenemem {

// One uniform cubic region of the map. Members are the instances whose
// centroids fall inside the cube; the zone feature pools their instance
// features with neutral geometry (zero positional input), so it depends
// only on membership and the member features.
struct ZoneRecord {
  CellKey key;
  std::vector<InstanceId> members;  // sorted ascending
  std::vector<float> feature;       // unit norm
};

// Coarse layer over the instance table. Assignment is by centroid:
// zone_of(p) = floor(p / zone_size) per axis, half-open cells. The table
// re-encodes a zone whenever its membership or a member feature changes
// and deletes zones that empty out.
class ZoneTable {
 public:
  ZoneTable(double zone_size, std::shared_ptr<const Aggregator> aggregator);

  double zone_size() const { return zone_size_; }
  std::size_t size() const { return zones_.size(); }
  bool empty() const { return zones_.empty(); }
  CellKey zone_of(const Vec3& position) const;
  const ZoneRecord* find(const CellKey& key) const;
  const std::map<CellKey, ZoneRecord>& zones() const { return zones_; }
  // zone currently holding an instance, or nullptr if untracked
  const CellKey* zone_of_instance(InstanceId id) const;

  // Syncs one instance after it was created or re-encoded: moves it
  // between zones when its centroid crossed a boundary and re-encodes
  // every zone it touched.
  void update_for_instance(const InstanceTable& instances, InstanceId id);

  // Call after the instance left the instance table; the surviving zone
  // members are re-pooled from their current features.
  void remove_instance(const InstanceTable& instances, InstanceId id);

  // Batch form for a frame that deleted several instances at once. All
  // departures are applied before any zone is re-encoded, so a zone that
  // lost two members in the same frame never pools a half-removed set.
  void remove_instances(const InstanceTable& instances, const std::vector<InstanceId>& ids);

  // Drops everything and re-adds all instances in ascending id order.
  // Produces bit-identical state to the incremental path because zone
  // features only depend on the sorted member set.
  void rebuild(const InstanceTable& instances);

  void clear();

  // Mean over text tokens of the best member-instance cosine. Tokens are
  // unit-norm feature vectors; the zone must exist and have members.
  double text_affinity(const CellKey& key, const std::vector<std::vector<float>>& text_tokens,
                       const InstanceTable& instances) const;

  // every member instance exists and lives in the zone its centroid names
  bool check_consistency(const InstanceTable& instances) const;

 private:
  void re_encode(ZoneRecord& rec, const InstanceTable& instances);

  double zone_size_;
  std::shared_ptr<const Aggregator> aggregator_;
  std::map<CellKey, ZoneRecord> zones_;
  std::unordered_map<InstanceId, CellKey> assignment_;
};

}  // namespace scenemem
