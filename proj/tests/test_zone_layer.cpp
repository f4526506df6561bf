#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "scenemem/zone_layer.hpp"
#include "test_support.hpp"

using namespace scenemem;

namespace {

constexpr int kDim = 8;

struct Fixture {
  PatchStore store{0.5, kDim};
  std::shared_ptr<MeanAggregator> agg = std::make_shared<MeanAggregator>(kDim);
  InstanceTable instances{agg};
  ZoneTable zones{3.0, agg};
  OracleDiscriminator oracle;
  SeededRng rng{77};

  // one-instance group with a fixed axis feature at a position
  InstanceId add_instance(int axis, const Vec3& pos, std::int64_t gt) {
    FeaturePoint fp;
    fp.feature.assign(kDim, 0.0f);
    fp.feature[static_cast<std::size_t>(axis)] = 1.0f;
    fp.position = pos;
    fp.gt_instance_id = gt;
    const PointId pid = store.insert_point(std::move(fp));
    PatchGroup g;
    g.mask_id = static_cast<int>(gt);
    g.points = {pid};
    g.feature.assign(kDim, 0.0f);
    g.feature[static_cast<std::size_t>(axis)] = 1.0f;
    g.centroid = pos;
    g.gt = gt;
    const auto d = instances.merge_step(store, {g}, oracle, 5, 0.5);
    zones.update_for_instance(instances, d[0].target);
    return d[0].target;
  }
};

}  // namespace

TEST_CASE("zone_layer: cells are half-open floors of position over size") {
  ZoneTable zones(3.0, std::make_shared<MeanAggregator>(kDim));
  CHECK(zones.zone_of(Vec3(0, 0, 0)) == CellKey{0, 0, 0});
  CHECK(zones.zone_of(Vec3(2.999, 0, 0)) == CellKey{0, 0, 0});
  CHECK(zones.zone_of(Vec3(3.0, 0, 0)) == CellKey{1, 0, 0});
  CHECK(zones.zone_of(Vec3(-0.001, 0, 0)) == CellKey{-1, 0, 0});
  CHECK(zones.zone_of(Vec3(-3.0, 2.0, 7.5)) == CellKey{-1, 0, 2});
  CHECK_THROWS_AS(ZoneTable(0.0, std::make_shared<MeanAggregator>(kDim)),
                  std::invalid_argument);
}

TEST_CASE("zone_layer: membership follows instance centroids") {
  Fixture f;
  const InstanceId a = f.add_instance(0, Vec3(0.5, -0.5, 0.5), 1);
  const InstanceId b = f.add_instance(1, Vec3(1.5, -0.5, 1.5), 2);   // same zone (0,-1,0)
  const InstanceId c = f.add_instance(2, Vec3(4.0, -0.5, 0.5), 3);   // zone (1,-1,0)

  CHECK(f.zones.size() == 2);
  const ZoneRecord* z0 = f.zones.find(CellKey{0, -1, 0});
  REQUIRE(z0 != nullptr);
  CHECK(z0->members == std::vector<InstanceId>{a, b});
  const ZoneRecord* z1 = f.zones.find(CellKey{1, -1, 0});
  REQUIRE(z1 != nullptr);
  CHECK(z1->members == std::vector<InstanceId>{c});
  CHECK(f.zones.check_consistency(f.instances));

  // zone feature = normalised mean of the member instance features
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(z0->feature[0] == doctest::Approx(inv_sqrt2));
  CHECK(z0->feature[1] == doctest::Approx(inv_sqrt2));
  CHECK(z0->feature[2] == 0.0f);
  CHECK(z1->feature[2] == doctest::Approx(1.0));
}

TEST_CASE("zone_layer: instances migrate across zone boundaries") {
  Fixture f;
  const InstanceId a = f.add_instance(0, Vec3(2.9, -0.5, 0.5), 1);
  REQUIRE(f.zones.find(CellKey{0, -1, 0}) != nullptr);

  // grow the instance eastwards until its centroid crosses x = 3
  FeaturePoint far_point;
  far_point.feature.assign(kDim, 0.0f);
  far_point.feature[0] = 1.0f;
  far_point.position = Vec3(9.1, -0.5, 0.5);  // centroid -> (6.0, -0.5, 0.5)
  far_point.gt_instance_id = 1;
  const PointId pid = f.store.insert_point(std::move(far_point));
  PatchGroup g;
  g.mask_id = 1;
  g.points = {pid};
  g.feature.assign(kDim, 0.0f);
  g.feature[0] = 1.0f;
  g.centroid = far_point.position;
  g.gt = 1;
  const auto d = f.instances.merge_step(f.store, {g}, f.oracle, 5, 0.5);
  REQUIRE_FALSE(d[0].created);
  REQUIRE(d[0].target == a);
  f.zones.update_for_instance(f.instances, a);

  CHECK(f.zones.find(CellKey{0, -1, 0}) == nullptr);  // old zone emptied
  const ZoneRecord* moved = f.zones.find(CellKey{2, -1, 0});
  REQUIRE(moved != nullptr);
  CHECK(moved->members == std::vector<InstanceId>{a});
  CHECK(f.zones.check_consistency(f.instances));
}

TEST_CASE("zone_layer: removal deletes empty zones and re-pools survivors") {
  Fixture f;
  const InstanceId a = f.add_instance(0, Vec3(0.5, -0.5, 0.5), 1);
  const InstanceId b = f.add_instance(1, Vec3(1.0, -0.5, 1.0), 2);
  const InstanceId c = f.add_instance(2, Vec3(7.0, -0.5, 0.5), 3);
  REQUIRE(f.zones.size() == 2);

  // drop c: its singleton zone disappears
  f.zones.remove_instance(f.instances, c);
  CHECK(f.zones.size() == 1);
  CHECK(f.zones.zone_of_instance(c) == nullptr);

  // drop a: shared zone survives with b's feature alone
  f.zones.remove_instance(f.instances, a);
  const ZoneRecord* z = f.zones.find(CellKey{0, -1, 0});
  REQUIRE(z != nullptr);
  CHECK(z->members == std::vector<InstanceId>{b});
  CHECK(z->feature[1] == doctest::Approx(1.0));
  CHECK(z->feature[0] == doctest::Approx(0.0));

  // removing an untracked id is a no-op
  f.zones.remove_instance(f.instances, 999);
  CHECK(f.zones.size() == 1);
}

TEST_CASE("zone_layer: rebuild reproduces incremental state bit-exactly") {
  Fixture f;
  f.add_instance(0, Vec3(0.5, -0.5, 0.5), 1);
  f.add_instance(1, Vec3(1.5, -0.5, 1.5), 2);
  f.add_instance(2, Vec3(4.0, -0.5, 0.5), 3);
  f.add_instance(3, Vec3(-2.0, -0.5, -2.0), 4);

  ZoneTable rebuilt(3.0, f.agg);
  rebuilt.rebuild(f.instances);
  REQUIRE(rebuilt.size() == f.zones.size());
  for (const auto& [key, zone] : f.zones.zones()) {
    const ZoneRecord* other = rebuilt.find(key);
    REQUIRE(other != nullptr);
    CHECK(other->members == zone.members);
    CHECK(other->feature == zone.feature);  // bit identical
  }
  CHECK(rebuilt.check_consistency(f.instances));
}

TEST_CASE("zone_layer: text affinity is mean over tokens of best member cosine") {
  Fixture f;
  f.add_instance(0, Vec3(0.5, -0.5, 0.5), 1);  // feature e0
  f.add_instance(1, Vec3(1.0, -0.5, 1.0), 2);  // feature e1, same zone
  const CellKey key{0, -1, 0};

  std::vector<float> e0(kDim, 0.0f), e1(kDim, 0.0f), e2(kDim, 0.0f);
  e0[0] = 1.0f;
  e1[1] = 1.0f;
  e2[2] = 1.0f;

  CHECK(f.zones.text_affinity(key, {e0}, f.instances) == doctest::Approx(1.0));
  CHECK(f.zones.text_affinity(key, {e0, e1}, f.instances) == doctest::Approx(1.0));
  CHECK(f.zones.text_affinity(key, {e2}, f.instances) == doctest::Approx(0.0));
  CHECK(f.zones.text_affinity(key, {e0, e2}, f.instances) == doctest::Approx(0.5));

  CHECK_THROWS_AS(f.zones.text_affinity(CellKey{9, 9, 9}, {e0}, f.instances),
                  std::invalid_argument);
  CHECK_THROWS_AS(f.zones.text_affinity(key, {}, f.instances), std::invalid_argument);
}
