#include "scenemem/instance_layer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "scenemem/rng.hpp"

namespace scenemem {
namespace {

std::vector<float> normalised_f64_mean(const std::vector<const FeaturePoint*>& points,
                                       int feature_dim) {
  std::vector<double> acc(static_cast<std::size_t>(feature_dim), 0.0);
  for (const FeaturePoint* p : points) {
    if (p->feature.size() != static_cast<std::size_t>(feature_dim))
      throw std::invalid_argument("aggregator: member feature size mismatch");
    for (int d = 0; d < feature_dim; ++d) acc[static_cast<std::size_t>(d)] += p->feature[d];
  }
  const double inv_n = 1.0 / static_cast<double>(points.size());
  double norm_sq = 0.0;
  for (auto& v : acc) {
    v *= inv_n;
    norm_sq += v * v;
  }
  if (norm_sq < 1e-24) throw std::runtime_error("aggregator: degenerate mean feature");
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  std::vector<float> out(static_cast<std::size_t>(feature_dim));
  for (int d = 0; d < feature_dim; ++d)
    out[static_cast<std::size_t>(d)] = static_cast<float>(acc[static_cast<std::size_t>(d)] * inv_norm);
  return out;
}

Vec3 member_mean(const std::vector<const FeaturePoint*>& points) {
  Vec3 acc = Vec3::Zero();
  for (const FeaturePoint* p : points) acc += p->position;
  return acc / static_cast<double>(points.size());
}

std::optional<std::int64_t> majority_label(const std::vector<const FeaturePoint*>& points) {
  std::map<std::int64_t, std::size_t> counts;
  for (const FeaturePoint* p : points)
    if (p->gt_instance_id.has_value()) ++counts[*p->gt_instance_id];
  if (counts.empty()) return std::nullopt;
  // most frequent label, ties toward the smaller id (map iteration order)
  std::int64_t best = 0;
  std::size_t best_count = 0;
  for (const auto& [label, count] : counts)
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

}  // namespace

std::array<double, 6> positional_feature(const FeaturePoint& point, const Vec3& mean) {
  const Vec3 rel = point.position - mean;
  return {rel.x(), rel.y(), rel.z(), point.size, std::cos(point.heading), std::sin(point.heading)};
}

MeanAggregator::MeanAggregator(int feature_dim) : feature_dim_(feature_dim) {
  if (feature_dim <= 0) throw std::invalid_argument("MeanAggregator: feature_dim must be > 0");
}

std::vector<float> MeanAggregator::encode(const std::vector<const FeaturePoint*>& points) const {
  if (points.empty()) throw std::invalid_argument("MeanAggregator: no members");
  return normalised_f64_mean(points, feature_dim_);
}

AttentionAggregator::AttentionAggregator(int feature_dim, int hidden, std::uint64_t seed)
    : feature_dim_(feature_dim), hidden_(hidden) {
  if (feature_dim <= 0 || hidden <= 0)
    throw std::invalid_argument("AttentionAggregator: dimensions must be > 0");
  SeededRng rng(SeededRng::mix(seed, 0xa99ull));
  const auto init = [&](std::vector<double>& w, int fan_in, int fan_out, std::size_t n) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    w.resize(n);
    for (auto& v : w) v = rng.uniform(-a, a);
  };
  init(w1_, 6, hidden_, static_cast<std::size_t>(hidden_) * 6);
  b1_.assign(static_cast<std::size_t>(hidden_), 0.0);
  init(w2_, hidden_, feature_dim_, static_cast<std::size_t>(feature_dim_) * hidden_);
  b2_.assign(static_cast<std::size_t>(feature_dim_), 0.0);
  init(query_, feature_dim_, 1, static_cast<std::size_t>(feature_dim_));
}

std::vector<float> AttentionAggregator::encode(
    const std::vector<const FeaturePoint*>& points) const {
  if (points.empty()) throw std::invalid_argument("AttentionAggregator: no members");
  const std::size_t n = points.size();
  const Vec3 mean = member_mean(points);

  // lifted member vectors h_i = g_i + lift(positional_i)
  std::vector<std::vector<double>> lifted(n);
  std::vector<double> scores(n);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(feature_dim_));
  for (std::size_t i = 0; i < n; ++i) {
    const FeaturePoint& p = *points[i];
    if (p.feature.size() != static_cast<std::size_t>(feature_dim_))
      throw std::invalid_argument("AttentionAggregator: member feature size mismatch");
    const auto pf = positional_feature(p, mean);
    std::vector<double> hid(static_cast<std::size_t>(hidden_));
    for (int j = 0; j < hidden_; ++j) {
      double acc = b1_[static_cast<std::size_t>(j)];
      for (int d = 0; d < 6; ++d) acc += w1_[static_cast<std::size_t>(j) * 6 + d] * pf[static_cast<std::size_t>(d)];
      hid[static_cast<std::size_t>(j)] = std::tanh(acc);
    }
    auto& h = lifted[i];
    h.resize(static_cast<std::size_t>(feature_dim_));
    double score = 0.0;
    for (int d = 0; d < feature_dim_; ++d) {
      double acc = b2_[static_cast<std::size_t>(d)] + p.feature[d];
      const double* row = &w2_[static_cast<std::size_t>(d) * hidden_];
      for (int j = 0; j < hidden_; ++j) acc += row[j] * hid[static_cast<std::size_t>(j)];
      h[static_cast<std::size_t>(d)] = acc;
      score += query_[static_cast<std::size_t>(d)] * acc;
    }
    scores[i] = score * inv_sqrt_d;
  }

  const double peak = *std::max_element(scores.begin(), scores.end());
  double denom = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - peak);
    denom += s;
  }
  std::vector<double> acc(static_cast<std::size_t>(feature_dim_), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = scores[i] / denom;
    for (int d = 0; d < feature_dim_; ++d) acc[static_cast<std::size_t>(d)] += alpha * lifted[i][static_cast<std::size_t>(d)];
  }
  double norm_sq = 0.0;
  for (double v : acc) norm_sq += v * v;
  if (norm_sq < 1e-24) throw std::runtime_error("AttentionAggregator: degenerate pooled feature");
  const double inv_norm = 1.0 / std::sqrt(norm_sq);
  std::vector<float> out(static_cast<std::size_t>(feature_dim_));
  for (int d = 0; d < feature_dim_; ++d)
    out[static_cast<std::size_t>(d)] = static_cast<float>(acc[static_cast<std::size_t>(d)] * inv_norm);
  return out;
}

std::vector<PatchGroup> group_patches_by_mask(const PatchStore& store,
                                              const ObservationFrame& frame,
                                              const FrameDiff& diff) {
  std::map<int, std::vector<PointId>> by_mask;
  for (const auto& [patch_index, id] : diff.added) {
    const int mask_id = frame.patch_mask(patch_index);
    if (mask_id <= 0) continue;  // background
    by_mask[mask_id].push_back(id);
  }

  std::vector<PatchGroup> groups;
  groups.reserve(by_mask.size());
  for (auto& [mask_id, ids] : by_mask) {
    std::sort(ids.begin(), ids.end());
    PatchGroup g;
    g.mask_id = mask_id;
    g.points = std::move(ids);
    std::vector<const FeaturePoint*> pts;
    pts.reserve(g.points.size());
    for (const PointId id : g.points) {
      const FeaturePoint* p = store.find(id);
      if (!p) throw std::logic_error("group_patches_by_mask: diff references a missing point");
      pts.push_back(p);
    }
    g.feature = normalised_f64_mean(pts, static_cast<int>(pts.front()->feature.size()));
    g.centroid = member_mean(pts);
    if (frame.masks_are_ground_truth) g.gt = mask_id;
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<float> pool_instance_features(std::vector<const InstanceRecord*> instances,
                                          const Aggregator& aggregator) {
  if (instances.empty())
    throw std::invalid_argument("pool_instance_features: no instances");
  for (const auto* inst : instances)
    if (!inst) throw std::invalid_argument("pool_instance_features: null instance");
  std::sort(instances.begin(), instances.end(),
            [](const InstanceRecord* a, const InstanceRecord* b) { return a->id < b->id; });

  std::vector<FeaturePoint> proxies;
  proxies.reserve(instances.size());
  for (const auto* inst : instances) {
    FeaturePoint proxy;
    proxy.feature = inst->feature;
    proxy.position = Vec3::Zero();
    proxy.heading = 0.0;
    proxy.size = 0.0;
    proxies.push_back(std::move(proxy));
  }
  std::vector<const FeaturePoint*> ptrs;
  ptrs.reserve(proxies.size());
  for (const auto& p : proxies) ptrs.push_back(&p);
  return aggregator.encode(ptrs);
}

InstanceTable::InstanceTable(std::shared_ptr<const Aggregator> aggregator)
    : aggregator_(std::move(aggregator)) {
  if (!aggregator_) throw std::invalid_argument("InstanceTable: null aggregator");
}

const InstanceRecord* InstanceTable::find(InstanceId id) const {
  const auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<InstanceId> InstanceTable::all_ids_sorted() const {
  std::vector<InstanceId> ids;
  ids.reserve(records_.size());
  for (const auto& [id, rec] : records_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void InstanceTable::refresh_record(InstanceRecord& rec, const PatchStore& store) {
  std::vector<const FeaturePoint*> pts;
  pts.reserve(rec.members.size());
  for (const PointId id : rec.members) {
    const FeaturePoint* p = store.find(id);
    if (!p) throw std::logic_error("instance member missing from the store");
    pts.push_back(p);
  }
  rec.centroid = member_mean(pts);
  rec.feature = aggregator_->encode(pts);
  rec.majority_gt = majority_label(pts);
}

std::vector<MergeDecision> InstanceTable::merge_step(PatchStore& store,
                                                     const std::vector<PatchGroup>& groups,
                                                     const MergingDiscriminator& discriminator,
                                                     int top_k, double merge_threshold,
                                                     std::vector<LabeledPair>* harvest) {
  if (top_k <= 0) throw std::invalid_argument("merge_step: top_k must be > 0");
  std::vector<MergeDecision> decisions;
  decisions.reserve(groups.size());

  for (const PatchGroup& group : groups) {
    if (group.points.empty()) throw std::invalid_argument("merge_step: empty group");
    MergeDecision decision;
    decision.mask_id = group.mask_id;

    // nearest instances by centroid distance, ties toward smaller id
    std::vector<std::pair<double, InstanceId>> order;
    order.reserve(records_.size());
    for (const auto& [id, rec] : records_)
      order.emplace_back((rec.centroid - group.centroid).norm(), id);
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(top_k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end());
    order.resize(take);

    double best_p = -1.0;
    InstanceId best_id = 0;
    for (const auto& [dist, id] : order) {
      const InstanceRecord& rec = records_.at(id);
      MergePair pair;
      pair.group_feature = group.feature;
      pair.instance_feature = rec.feature;
      pair.distance = dist;
      pair.group_gt = group.gt;
      pair.instance_gt = rec.majority_gt;
      const double p = discriminator.merge_probability(pair);
      decision.candidates.emplace_back(id, p);
      if (harvest && pair.group_gt.has_value() && pair.instance_gt.has_value()) {
        LabeledPair lp;
        lp.group_feature = group.feature;
        lp.instance_feature = rec.feature;
        lp.distance = dist;
        lp.label = *pair.group_gt == *pair.instance_gt ? 1 : 0;
        harvest->push_back(std::move(lp));
      }
      if (p > best_p || (p == best_p && best_p >= 0.0 && id < best_id)) {
        best_p = p;
        best_id = id;
      }
    }

    if (best_p > merge_threshold) {
      InstanceRecord& rec = records_.at(best_id);
      std::vector<PointId> merged;
      merged.reserve(rec.members.size() + group.points.size());
      std::merge(rec.members.begin(), rec.members.end(), group.points.begin(),
                 group.points.end(), std::back_inserter(merged));
      rec.members = std::move(merged);
      for (const PointId id : group.points) store.set_owner(id, best_id);
      refresh_record(rec, store);
      decision.target = best_id;
      decision.created = false;
    } else {
      const InstanceId id = next_id_++;
      InstanceRecord rec;
      rec.id = id;
      rec.members = group.points;
      for (const PointId pid : group.points) store.set_owner(pid, id);
      refresh_record(rec, store);
      records_.emplace(id, std::move(rec));
      decision.target = id;
      decision.created = true;
    }
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

InstanceUpdateReport InstanceTable::handle_removals(const PatchStore& store,
                                                    const RemovalReport& removals) {
  InstanceUpdateReport report;
  for (const auto& [owner, removed] : removals.by_owner) {
    const auto it = records_.find(owner);
    if (it == records_.end())
      throw std::logic_error("handle_removals: removal report names an unknown instance");
    InstanceRecord& rec = it->second;
    std::vector<PointId> kept;
    kept.reserve(rec.members.size());
    std::set_difference(rec.members.begin(), rec.members.end(), removed.begin(), removed.end(),
                        std::back_inserter(kept));
    if (kept.empty()) {
      records_.erase(it);
      report.deleted.push_back(owner);
    } else {
      rec.members = std::move(kept);
      refresh_record(rec, store);
      report.modified.push_back(owner);
    }
  }
  std::sort(report.modified.begin(), report.modified.end());
  std::sort(report.deleted.begin(), report.deleted.end());
  return report;
}

void InstanceTable::restore_instance(InstanceId id, std::vector<PointId> members,
                                     const PatchStore& store) {
  if (id == 0) throw std::invalid_argument("restore_instance: id 0 is reserved");
  if (members.empty()) throw std::invalid_argument("restore_instance: no members");
  if (records_.count(id)) throw std::invalid_argument("restore_instance: duplicate instance id");
  std::sort(members.begin(), members.end());
  InstanceRecord rec;
  rec.id = id;
  rec.members = std::move(members);
  refresh_record(rec, store);
  records_.emplace(id, std::move(rec));
  if (id >= next_id_) next_id_ = id + 1;
}

void InstanceTable::clear() {
  records_.clear();
  next_id_ = 1;
}

void InstanceTable::set_next_instance_id(std::uint64_t v) {
  if (v == 0) throw std::invalid_argument("set_next_instance_id: must be >= 1");
  next_id_ = v;
}

}  // namespace scenemem
