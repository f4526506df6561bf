#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "scenemem/discriminator.hpp"
#include "scenemem/observation.hpp"
#include "scenemem/patch_store.hpp"

namespace scenemem {

// Geometric context of one member point relative to its instance:
// [position - member mean (3), footprint size, cos(heading), sin(heading)].
std::array<double, 6> positional_feature(const FeaturePoint& point, const Vec3& member_mean);

// Pools the patch features of an instance's member points into one
// unit-norm instance feature. Callers pass members sorted by ascending
// point id; every implementation is permutation invariant in exact
// arithmetic and the fixed order makes the output bit-stable too.
class Aggregator {
 public:
  virtual ~Aggregator() = default;
  virtual std::vector<float> encode(const std::vector<const FeaturePoint*>& points) const = 0;
  virtual int feature_dim() const = 0;
};

// Reference pooling: L2-normalised arithmetic mean, accumulated in f64.
class MeanAggregator final : public Aggregator {
 public:
  explicit MeanAggregator(int feature_dim);
  std::vector<float> encode(const std::vector<const FeaturePoint*>& points) const override;
  int feature_dim() const override { return feature_dim_; }

 private:
  int feature_dim_;
};

// Single-query softmax attention over members. Each member feature is
// shifted by a lift of its positional feature (6 -> hidden tanh -> D)
// before pooling, so geometry can reweight the pool. Weights are fixed at
// construction from the seed; nothing here trains.
class AttentionAggregator final : public Aggregator {
 public:
  AttentionAggregator(int feature_dim, int hidden, std::uint64_t seed);
  std::vector<float> encode(const std::vector<const FeaturePoint*>& points) const override;
  int feature_dim() const override { return feature_dim_; }

 private:
  int feature_dim_;
  int hidden_;
  std::vector<double> w1_;     // hidden x 6
  std::vector<double> b1_;     // hidden
  std::vector<double> w2_;     // feature_dim x hidden
  std::vector<double> b2_;     // feature_dim
  std::vector<double> query_;  // feature_dim
};

struct InstanceRecord {
  InstanceId id = 0;
  std::vector<PointId> members;  // sorted ascending
  std::vector<float> feature;    // unit norm
  Vec3 centroid = Vec3::Zero();
  std::optional<std::int64_t> majority_gt;  // most frequent member label
};

// Patches of one mask id freshly integrated from a frame, pooled into a
// single query against the stored instances. Mask id 0 is background and
// never forms a group.
struct PatchGroup {
  int mask_id = 0;
  std::vector<PointId> points;  // sorted ascending
  std::vector<float> feature;   // unit-norm mean of the new patch features
  Vec3 centroid = Vec3::Zero();
  std::optional<std::int64_t> gt;  // mask id when masks are ground truth
};

std::vector<PatchGroup> group_patches_by_mask(const PatchStore& store,
                                              const ObservationFrame& frame,
                                              const FrameDiff& diff);

// Pools instance features with an aggregator, presenting each instance as a
// member point with neutral geometry so only the features matter. Instances
// are ordered by ascending id for bit-stable output. Zone features and
// region-level distillation targets both come from here.
std::vector<float> pool_instance_features(std::vector<const InstanceRecord*> instances,
                                          const Aggregator& aggregator);

struct MergeDecision {
  int mask_id = 0;
  InstanceId target = 0;
  bool created = false;
  // (instance id, merge probability) for every candidate scored, in the
  // centroid-distance order they were scored in
  std::vector<std::pair<InstanceId, double>> candidates;
};

struct InstanceUpdateReport {
  std::vector<InstanceId> modified;  // sorted
  std::vector<InstanceId> deleted;   // sorted
};

// Instance memory: merge-or-create over patch groups plus bookkeeping when
// culling removes member points. The table never reads pixels, only the
// store's points, so rebuilding from a snapshot reproduces it exactly.
class InstanceTable {
 public:
  explicit InstanceTable(std::shared_ptr<const Aggregator> aggregator);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const InstanceRecord* find(InstanceId id) const;
  const std::unordered_map<InstanceId, InstanceRecord>& records() const { return records_; }
  std::vector<InstanceId> all_ids_sorted() const;
  const Aggregator& aggregator() const { return *aggregator_; }

  // For each group: score the top_k nearest instances by centroid
  // distance (ties toward smaller id), merge into the highest-probability
  // candidate above merge_threshold (ties again toward smaller id), or
  // create a new instance when none clears the bar. Newly created
  // instances are immediately eligible candidates for later groups of the
  // same frame. When harvest is non-null every scored pair with ground
  // truth on both sides is appended as a labelled example.
  std::vector<MergeDecision> merge_step(PatchStore& store, const std::vector<PatchGroup>& groups,
                                        const MergingDiscriminator& discriminator, int top_k,
                                        double merge_threshold,
                                        std::vector<LabeledPair>* harvest = nullptr);

  // Applies a culling report: drops the removed members, re-encodes
  // instances that still have points, and deletes the ones that emptied.
  InstanceUpdateReport handle_removals(const PatchStore& store, const RemovalReport& removals);

  // Snapshot-load path: recreates a record from its member ids (owners in
  // the store must already point at id). Keeps next_instance_id ahead of
  // every restored id.
  void restore_instance(InstanceId id, std::vector<PointId> members, const PatchStore& store);

  void clear();
  std::uint64_t next_instance_id() const { return next_id_; }
  void set_next_instance_id(std::uint64_t v);

 private:
  void refresh_record(InstanceRecord& rec, const PatchStore& store);

  std::shared_ptr<const Aggregator> aggregator_;
  std::unordered_map<InstanceId, InstanceRecord> records_;
  std::uint64_t next_id_ = 1;
};

}  // namespace scenemem
