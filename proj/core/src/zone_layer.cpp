#include "scenemem/zone_layer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenemem {

ZoneTable::ZoneTable(double zone_size, std::shared_ptr<const Aggregator> aggregator)
    : zone_size_(zone_size), aggregator_(std::move(aggregator)) {
  if (!(zone_size > 0.0)) throw std::invalid_argument("ZoneTable: zone_size must be > 0");
  if (!aggregator_) throw std::invalid_argument("ZoneTable: null aggregator");
}

CellKey ZoneTable::zone_of(const Vec3& p) const {
  return CellKey{static_cast<std::int32_t>(std::floor(p.x() / zone_size_)),
                 static_cast<std::int32_t>(std::floor(p.y() / zone_size_)),
                 static_cast<std::int32_t>(std::floor(p.z() / zone_size_))};
}

const ZoneRecord* ZoneTable::find(const CellKey& key) const {
  const auto it = zones_.find(key);
  return it == zones_.end() ? nullptr : &it->second;
}

const CellKey* ZoneTable::zone_of_instance(InstanceId id) const {
  const auto it = assignment_.find(id);
  return it == assignment_.end() ? nullptr : &it->second;
}

void ZoneTable::re_encode(ZoneRecord& rec, const InstanceTable& instances) {
  std::vector<const InstanceRecord*> members;
  members.reserve(rec.members.size());
  for (const InstanceId id : rec.members) {
    const InstanceRecord* inst = instances.find(id);
    if (!inst) throw std::logic_error("zone member missing from the instance table");
    members.push_back(inst);
  }
  rec.feature = pool_instance_features(std::move(members), *aggregator_);
}

void ZoneTable::update_for_instance(const InstanceTable& instances, InstanceId id) {
  const InstanceRecord* inst = instances.find(id);
  if (!inst) throw std::invalid_argument("update_for_instance: unknown instance");
  const CellKey target = zone_of(inst->centroid);

  const auto assigned = assignment_.find(id);
  if (assigned != assignment_.end() && !(assigned->second == target)) {
    // departed its old zone
    auto& old_zone = zones_.at(assigned->second);
    old_zone.members.erase(
        std::lower_bound(old_zone.members.begin(), old_zone.members.end(), id));
    if (old_zone.members.empty())
      zones_.erase(assigned->second);
    else
      re_encode(old_zone, instances);
  }

  auto [it, inserted] = zones_.try_emplace(target);
  ZoneRecord& zone = it->second;
  if (inserted) zone.key = target;
  const auto pos = std::lower_bound(zone.members.begin(), zone.members.end(), id);
  if (pos == zone.members.end() || *pos != id) zone.members.insert(pos, id);
  re_encode(zone, instances);
  assignment_[id] = target;
}

void ZoneTable::remove_instance(const InstanceTable& instances, InstanceId id) {
  remove_instances(instances, {id});
}

void ZoneTable::remove_instances(const InstanceTable& instances,
                                 const std::vector<InstanceId>& ids) {
  std::set<CellKey> touched;
  for (const InstanceId id : ids) {
    const auto assigned = assignment_.find(id);
    if (assigned == assignment_.end()) continue;  // never tracked
    auto zit = zones_.find(assigned->second);
    if (zit != zones_.end()) {
      auto& members = zit->second.members;
      const auto pos = std::lower_bound(members.begin(), members.end(), id);
      if (pos != members.end() && *pos == id) members.erase(pos);
      if (members.empty())
        zones_.erase(zit);
      else
        touched.insert(assigned->second);
    }
    assignment_.erase(assigned);
  }
  // second pass: pool only after every departure landed
  for (const CellKey& key : touched) {
    auto zit = zones_.find(key);
    if (zit != zones_.end()) re_encode(zit->second, instances);
  }
}

void ZoneTable::rebuild(const InstanceTable& instances) {
  clear();
  for (const InstanceId id : instances.all_ids_sorted()) update_for_instance(instances, id);
}

void ZoneTable::clear() {
  zones_.clear();
  assignment_.clear();
}

double ZoneTable::text_affinity(const CellKey& key,
                                const std::vector<std::vector<float>>& text_tokens,
                                const InstanceTable& instances) const {
  const ZoneRecord* zone = find(key);
  if (!zone || zone->members.empty())
    throw std::invalid_argument("text_affinity: zone is unknown or empty");
  if (text_tokens.empty()) throw std::invalid_argument("text_affinity: no text tokens");

  double total = 0.0;
  for (const auto& token : text_tokens) {
    double best = -1.0;
    for (const InstanceId id : zone->members) {
      const InstanceRecord* inst = instances.find(id);
      if (!inst) throw std::logic_error("text_affinity: zone member missing");
      if (inst->feature.size() != token.size())
        throw std::invalid_argument("text_affinity: token dimension mismatch");
      double dot = 0.0, tn = 0.0, fn = 0.0;
      for (std::size_t d = 0; d < token.size(); ++d) {
        dot += static_cast<double>(inst->feature[d]) * token[d];
        tn += static_cast<double>(token[d]) * token[d];
        fn += static_cast<double>(inst->feature[d]) * inst->feature[d];
      }
      best = std::max(best, dot / std::sqrt(tn * fn));
    }
    total += best;
  }
  return total / static_cast<double>(text_tokens.size());
}

bool ZoneTable::check_consistency(const InstanceTable& instances) const {
  std::size_t assigned_count = 0;
  for (const auto& [key, zone] : zones_) {
    if (zone.members.empty()) return false;
    if (!std::is_sorted(zone.members.begin(), zone.members.end())) return false;
    for (const InstanceId id : zone.members) {
      const InstanceRecord* inst = instances.find(id);
      if (!inst) return false;
      if (!(zone_of(inst->centroid) == key)) return false;
      const auto it = assignment_.find(id);
      if (it == assignment_.end() || !(it->second == key)) return false;
      ++assigned_count;
    }
  }
  return assigned_count == assignment_.size() && assignment_.size() == instances.size();
}

}  // namespace scenemem
