#include "scenemem/replay.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace scenemem {
namespace {

using json = nlohmann::json;

// Distance from a point to the object's extent: zero inside, otherwise the
// gap to the bounding box (boxes) or to the surface (spheres).
double object_extent_distance(const SceneObject& o, const Vec3& p) {
  if (o.shape == SceneObject::Shape::Sphere)
    return std::max(0.0, (p - o.center).norm() - o.radius);
  const Vec3 clamped = p.cwiseMax(o.center - o.half_extents).cwiseMin(o.center + o.half_extents);
  return (p - clamped).norm();
}

int count_stale(const InstanceTable& instances, const Scene& scene, double eps) {
  int stale = 0;
  for (const auto& [id, rec] : instances.records()) {
    if (!rec.majority_gt) continue;  // nothing to compare against
    const SceneObject* obj = scene.object(static_cast<int>(*rec.majority_gt));
    if (!obj || object_extent_distance(*obj, rec.centroid) > eps) ++stale;
  }
  return stale;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

double frame_total_ms(const FrameStats& stats) {
  return stats.cull_ms + stats.add_ms + stats.merge_ms + stats.zone_ms;
}

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("percentile of an empty sample set");
  if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("percentile rank must be in (0, 1]");
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  return samples[rank - 1];
}

ReplayReport replay_dataset(MapEngine& engine, const SimDataset& dataset,
                            const Scene* initial_scene) {
  ReplayReport report;
  report.frames.reserve(dataset.frames.size());

  Scene scene;
  if (initial_scene) scene = *initial_scene;
  std::vector<SceneEvent> events = dataset.events;
  std::stable_sort(events.begin(), events.end(),
                   [](const SceneEvent& a, const SceneEvent& b) { return a.frame < b.frame; });
  std::size_t next_event = 0;

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    while (next_event < events.size() && events[next_event].frame == i) {
      if (initial_scene) apply_event(scene, events[next_event]);
      ++next_event;
    }
    report.frames.push_back(engine.integrate(dataset.frames[i]));
    if (initial_scene)
      report.stale_per_frame.push_back(
          count_stale(engine.instances(), scene, engine.config().staleness_epsilon));
  }
  report.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start)
                        .count();

  report.final_points = engine.store().size();
  report.final_instances = engine.instances().size();
  report.final_zones = engine.zones().size();
  report.map_hash = engine.map_hash();
  if (!report.stale_per_frame.empty()) report.stale_instances = report.stale_per_frame.back();
  return report;
}

std::string replay_report_json(const ReplayReport& report, bool include_timings) {
  json j;
  j["format"] = "scenemem-replay-report";
  j["version"] = 1;

  std::size_t added = 0, culled = 0, created = 0, merged = 0, discarded = 0;
  json frames = json::array();
  for (const auto& f : report.frames) {
    json e;
    e["frame"] = f.frame_id;
    e["points_added"] = f.points_added;
    e["points_culled"] = f.points_culled;
    e["instances_created"] = f.instances_created;
    e["instances_merged"] = f.instances_merged;
    e["instances_discarded"] = f.instances_discarded;
    e["zones_touched"] = f.zones_touched;
    if (include_timings) {
      e["cull_ms"] = f.cull_ms;
      e["add_ms"] = f.add_ms;
      e["merge_ms"] = f.merge_ms;
      e["zone_ms"] = f.zone_ms;
    }
    frames.push_back(std::move(e));
    added += f.points_added;
    culled += f.points_culled;
    created += f.instances_created;
    merged += f.instances_merged;
    discarded += f.instances_discarded;
  }
  j["frames"] = std::move(frames);
  j["totals"] = {{"points_added", added},
                 {"points_culled", culled},
                 {"instances_created", created},
                 {"instances_merged", merged},
                 {"instances_discarded", discarded}};
  j["final_points"] = report.final_points;
  j["final_instances"] = report.final_instances;
  j["final_zones"] = report.final_zones;
  j["map_hash"] = hash_hex(report.map_hash);
  if (report.stale_instances >= 0) {
    j["stale_instances"] = report.stale_instances;
    j["stale_per_frame"] = report.stale_per_frame;
  }
  if (include_timings) {
    j["total_ms"] = report.total_ms;
    std::vector<double> per_frame;
    per_frame.reserve(report.frames.size());
    for (const auto& f : report.frames) per_frame.push_back(frame_total_ms(f));
    if (!per_frame.empty()) {
      j["p50_frame_ms"] = percentile(per_frame, 0.5);
      j["p95_frame_ms"] = percentile(per_frame, 0.95);
    }
  }
  return j.dump(2);
}

}  // namespace scenemem
