#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "scenemem/replay.hpp"

using namespace scenemem;

namespace {

constexpr int kDim = 16;

EngineConfig engine_config() {
  EngineConfig cfg;
  cfg.feature_dim = kDim;
  cfg.zone_size = 1.5;
  // wide cull horizon so every frame that sees a region also maintains it,
  // even from across the room
  cfg.cull_max_distance = 10.0;
  return cfg;
}

SimConfig sim_config() {
  SimConfig cfg;
  cfg.object_count = 6;
  cfg.render_height = 96;
  cfg.render_width = 96;
  cfg.noise_sigma = 0.02;
  cfg.frame_count = 16;
  return cfg;
}

MapEngine make_engine() {
  return MapEngine(engine_config(), std::make_shared<MeanAggregator>(kDim),
                   std::make_shared<OracleDiscriminator>());
}

bool object_in_frame(const ObservationFrame& frame, int id) {
  return std::find(frame.masks.begin(), frame.masks.end(), id) != frame.masks.end();
}

std::vector<float> basis_feature(int axis) {
  std::vector<float> f(kDim, 0.0f);
  f[axis] = 1.0f;
  return f;
}

// Two small solids on opposite diagonals with nothing between them, so once
// either is removed the whole vacated region is re-observable from the far
// side of the orbit.
Scene two_object_scene() {
  Scene scene;
  scene.feature_dim = kDim;
  scene.room_half_x = 4.0;
  scene.room_half_z = 4.0;
  scene.room_height = 2.5;
  scene.has_room_shell = true;
  scene.background_feature = basis_feature(0);

  SceneObject box;
  box.id = 1;
  box.shape = SceneObject::Shape::Box;
  box.half_extents = Vec3(0.35, 0.3, 0.35);
  box.center = Vec3(1.2, -0.3, 1.2);
  box.feature = basis_feature(1);
  scene.objects.push_back(box);

  SceneObject sphere;
  sphere.id = 2;
  sphere.shape = SceneObject::Shape::Sphere;
  sphere.radius = 0.35;
  sphere.center = Vec3(-1.2, -0.35, -1.2);
  sphere.feature = basis_feature(2);
  scene.objects.push_back(sphere);
  return scene;
}

}  // namespace

TEST_CASE("counts reconcile and the report mirrors the final map") {
  const SimConfig sim = sim_config();
  const Scene scene = generate_scene(sim, kDim, 5);
  const SimDataset ds = build_dataset(scene, sim, 6);

  MapEngine engine = make_engine();
  const ReplayReport report = replay_dataset(engine, ds);

  REQUIRE(report.frames.size() == ds.frames.size());
  std::size_t added = 0;
  std::size_t culled = 0;
  for (const auto& f : report.frames) {
    added += f.points_added;
    culled += f.points_culled;
  }
  CHECK(report.final_points == added - culled);
  CHECK(report.final_points == engine.store().size());
  CHECK(report.final_instances == engine.instances().size());
  CHECK(report.final_zones == engine.zones().size());
  CHECK(report.map_hash == engine.map_hash());
  CHECK(report.total_ms >= 0.0);

  // no ground truth supplied, so no staleness series
  CHECK(report.stale_instances == -1);
  CHECK(report.stale_per_frame.empty());
}

TEST_CASE("repeated passes settle into a steady state") {
  const SimConfig sim = sim_config();
  const Scene scene = generate_scene(sim, kDim, 5);
  const SimDataset ds = build_dataset(scene, sim, 6);

  MapEngine engine = make_engine();
  const ReplayReport first = replay_dataset(engine, ds);
  const ReplayReport second = replay_dataset(engine, ds);
  const ReplayReport third = replay_dataset(engine, ds);

  // a full revisit replaces every surface point it can see, so the pass
  // nets out to zero and the map keeps its size
  std::size_t added = 0;
  std::size_t culled = 0;
  for (const auto& f : second.frames) {
    added += f.points_added;
    culled += f.points_culled;
  }
  CHECK(added == culled);
  CHECK(second.final_points == first.final_points);
  CHECK(second.final_instances == first.final_instances);

  // once steady, the per-frame counts repeat exactly
  REQUIRE(third.frames.size() == second.frames.size());
  for (std::size_t i = 0; i < third.frames.size(); ++i) {
    CHECK(third.frames[i].points_added == second.frames[i].points_added);
    CHECK(third.frames[i].points_culled == second.frames[i].points_culled);
  }
  CHECK(third.final_points == second.final_points);
}

TEST_CASE("staleness rises on an unseen removal and clears on re-observation") {
  const SimConfig sim = sim_config();
  const Scene scene = two_object_scene();
  const SimDataset static_ds = build_dataset(scene, sim, 22);

  // an object that is seen, then leaves the view, then comes back
  int object_id = -1;
  std::size_t event_frame = 0;
  std::size_t reobserve_frame = 0;
  for (const auto& candidate : scene.objects) {
    std::size_t first_seen = static_ds.frames.size();
    for (std::size_t i = 0; i < static_ds.frames.size(); ++i)
      if (object_in_frame(static_ds.frames[i], candidate.id)) {
        first_seen = i;
        break;
      }
    if (first_seen >= static_ds.frames.size()) continue;
    std::size_t gap = static_ds.frames.size();
    for (std::size_t i = first_seen + 1; i < static_ds.frames.size(); ++i)
      if (!object_in_frame(static_ds.frames[i], candidate.id)) {
        gap = i;
        break;
      }
    if (gap >= static_ds.frames.size()) continue;
    std::size_t back = static_ds.frames.size();
    for (std::size_t i = gap + 1; i < static_ds.frames.size(); ++i)
      if (object_in_frame(static_ds.frames[i], candidate.id)) {
        back = i;
        break;
      }
    if (back >= static_ds.frames.size()) continue;
    object_id = candidate.id;
    event_frame = gap;
    reobserve_frame = back;
    break;
  }
  REQUIRE(object_id > 0);

  SceneEvent removal;
  removal.frame = event_frame;
  removal.kind = SceneEvent::Kind::Remove;
  removal.object_id = object_id;
  const SimDataset ds = build_dynamic_dataset(scene, sim, 22, {removal});

  MapEngine engine = make_engine();
  const ReplayReport report = replay_dataset(engine, ds, &scene);

  REQUIRE(report.stale_per_frame.size() == ds.frames.size());
  CHECK(report.stale_instances == report.stale_per_frame.back());

  // placed objects match their instances before the event
  for (std::size_t i = 0; i < event_frame; ++i) CHECK(report.stale_per_frame[i] == 0);
  // the orphaned instance shows up the moment the object disappears
  CHECK(report.stale_per_frame[event_frame] >= 1);
  // and every frame that re-observes the vacated region culls it away
  CHECK(report.stale_per_frame.back() == 0);
  bool cleared = false;
  for (std::size_t i = reobserve_frame; i < report.stale_per_frame.size(); ++i)
    if (report.stale_per_frame[i] == 0) {
      cleared = true;
      break;
    }
  CHECK(cleared);
}

TEST_CASE("reports are byte-stable and timings stay opt-in") {
  const SimConfig sim = sim_config();
  const Scene scene = generate_scene(sim, kDim, 5);
  const SimDataset ds = build_dataset(scene, sim, 6);

  MapEngine a = make_engine();
  MapEngine b = make_engine();
  const ReplayReport ra = replay_dataset(a, ds, &scene);
  const ReplayReport rb = replay_dataset(b, ds, &scene);

  const std::string ja = replay_report_json(ra);
  CHECK(ja == replay_report_json(rb));

  const auto parsed = nlohmann::json::parse(ja);
  CHECK(parsed.at("format") == "scenemem-replay-report");
  CHECK(parsed.at("version") == 1);
  CHECK(parsed.at("frames").size() == ds.frames.size());
  CHECK(parsed.at("final_points").get<std::size_t>() == ra.final_points);
  CHECK(parsed.at("map_hash").get<std::string>().size() == 16);
  CHECK(parsed.at("totals").at("points_added").get<std::size_t>() > 0);
  CHECK(parsed.at("stale_per_frame").size() == ds.frames.size());
  CHECK(!parsed.contains("total_ms"));
  CHECK(!parsed.at("frames").at(0).contains("cull_ms"));

  const auto timed = nlohmann::json::parse(replay_report_json(ra, true));
  CHECK(timed.at("total_ms").get<double>() >= 0.0);
  CHECK(timed.at("frames").at(0).contains("cull_ms"));
  CHECK(timed.at("p95_frame_ms").get<double>() >= timed.at("p50_frame_ms").get<double>());
}

TEST_CASE("percentile uses nearest rank") {
  const std::vector<double> v{40.0, 10.0, 30.0, 20.0};
  CHECK(percentile(v, 0.25) == 10.0);
  CHECK(percentile(v, 0.5) == 20.0);
  CHECK(percentile(v, 0.51) == 30.0);
  CHECK(percentile(v, 0.95) == 40.0);
  CHECK(percentile(v, 1.0) == 40.0);
  CHECK(percentile({7.5}, 0.5) == 7.5);
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(percentile(v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(percentile(v, 1.5), std::invalid_argument);

  FrameStats stats;
  stats.cull_ms = 1.0;
  stats.add_ms = 2.0;
  stats.merge_ms = 3.0;
  stats.zone_ms = 4.0;
  CHECK(frame_total_ms(stats) == 10.0);
}
