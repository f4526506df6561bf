#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include "scenemem/dataset_io.hpp"
#include "scenemem/patch_store.hpp"
#include "scenemem/scene_sim.hpp"

using namespace scenemem;

namespace {

constexpr int kDim = 16;

SimConfig small_sim() {
  SimConfig cfg;
  cfg.object_count = 4;
  cfg.render_height = 48;
  cfg.render_width = 48;
  cfg.frame_count = 12;
  return cfg;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// one-object scene with hand-picked geometry for analytic depth checks
Scene fixed_scene() {
  SeededRng rng(99);
  Scene scene;
  scene.feature_dim = kDim;
  scene.room_half_x = 4.0;
  scene.room_half_z = 4.0;
  scene.room_height = 2.5;
  scene.has_room_shell = true;
  scene.background_feature = rng.unit_vector(kDim);
  SceneObject obj;
  obj.id = 1;
  obj.center = Vec3(0.0, -0.8, 2.0);
  obj.half_extents = Vec3(0.5, 0.8, 0.5);
  obj.feature = rng.unit_vector(kDim);
  scene.objects.push_back(obj);
  return scene;
}

}  // namespace

TEST_CASE("scene_sim: generation is deterministic and well separated") {
  const auto cfg = small_sim();
  const Scene a = generate_scene(cfg, kDim, 7);
  const Scene b = generate_scene(cfg, kDim, 7);
  const Scene c = generate_scene(cfg, kDim, 8);

  REQUIRE(a.objects.size() == 4);
  CHECK(a.background_feature == b.background_feature);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    CHECK(a.objects[i].feature == b.objects[i].feature);
    CHECK((a.objects[i].center - b.objects[i].center).norm() == 0.0);
    if ((a.objects[i].center - c.objects[i].center).norm() > 1e-12) any_diff = true;
  }
  CHECK(any_diff);

  // pairwise separation including the background
  std::vector<const std::vector<float>*> all = {&a.background_feature};
  for (const auto& o : a.objects) all.push_back(&o.feature);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      CHECK(std::abs(cosine(*all[i], *all[j])) <= 0.5);

  CHECK(a.has_room_shell);
  for (const auto& o : a.objects) {
    const bool ball = o.shape == SceneObject::Shape::Sphere;
    const double fy = ball ? o.radius : o.half_extents.y();
    const double fx = ball ? o.radius : o.half_extents.x();
    const double fz = ball ? o.radius : o.half_extents.z();
    CHECK(o.center.y() == doctest::Approx(-fy));  // rests on the floor
    CHECK(std::abs(o.center.x()) + fx < cfg.room_half_x);
    CHECK(std::abs(o.center.z()) + fz < cfg.room_half_z);
  }
  CHECK(a.object(1) != nullptr);
  CHECK(a.object(99) == nullptr);
}

TEST_CASE("scene_sim: rendered depth matches analytic ray-box hits") {
  const Scene scene = fixed_scene();
  auto cfg = small_sim();
  const CameraIntrinsics k = intrinsics_for(cfg);
  const Pose pose = Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.0);
  SeededRng rng(3);
  const ObservationFrame f = render_frame(scene, pose, k, 0, 0.05, rng);

  const auto depth_at = [&](int r, int c) { return f.depth[static_cast<std::size_t>(r) * k.width + c]; };
  const auto mask_at = [&](int r, int c) { return f.masks[static_cast<std::size_t>(r) * k.width + c]; };

  // centre pixel: box near face at z = 1.5 in front of the camera
  CHECK(depth_at(24, 24) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(mask_at(24, 24) == 1);

  // bottom-left pixel ray clears the box and lands on the floor
  {
    const int r = 47, c = 0;
    const double y_dir = (r - k.cy) / k.fy;
    const double s_floor = 1.4 / y_dir;
    CHECK(depth_at(r, c) == doctest::Approx(s_floor).epsilon(1e-6));
    CHECK(mask_at(r, c) == 0);
  }

  // top row looks at the ceiling
  {
    const int r = 0, c = 24;
    const double y_dir = (r - k.cy) / k.fy;  // negative: up
    const double s_ceiling = (-2.5 + 1.4) / y_dir;
    CHECK(depth_at(r, c) == doctest::Approx(s_ceiling).epsilon(1e-6));
    CHECK(mask_at(r, c) == 0);
  }

  // every pixel hits something inside the room shell
  for (float d : f.depth) CHECK(d > 0.0f);
}

TEST_CASE("scene_sim: patch features are noisy copies of the visible object") {
  const Scene scene = fixed_scene();
  auto cfg = small_sim();
  const CameraIntrinsics k = intrinsics_for(cfg);
  const Pose pose = Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.0);

  const double sigma = 0.05;
  SeededRng rng(4);
  const ObservationFrame f = render_frame(scene, pose, k, 0, sigma, rng);
  const double min_cos = std::sqrt(1.0 - sigma * sigma) - 1e-9;

  int object_patches = 0;
  for (int i = 0; i < kPatchCount; ++i) {
    const auto feat_span = f.patch_feature(i);
    const std::vector<float> feat(feat_span.begin(), feat_span.end());
    const int m = f.patch_mask(i);
    const auto& base = m > 0 ? scene.object(m)->feature : scene.background_feature;
    CHECK(cosine(feat, base) >= min_cos);
    if (m > 0) ++object_patches;
  }
  CHECK(object_patches > 4);  // the box is actually visible

  // zero noise reproduces the base feature bitwise
  SeededRng rng2(4);
  const ObservationFrame g = render_frame(scene, pose, k, 0, 0.0, rng2);
  for (int i = 0; i < kPatchCount; ++i) {
    const auto feat = g.patch_feature(i);
    const auto& base = g.patch_mask(i) > 0 ? scene.object(g.patch_mask(i))->feature
                            : scene.background_feature;
    for (int d = 0; d < kDim; ++d) CHECK(feat[d] == base[static_cast<std::size_t>(d)]);
  }
}

TEST_CASE("scene_sim: trajectories stay in the room and face sensibly") {
  auto cfg = small_sim();
  cfg.frame_count = 16;

  for (const char* kind : {"orbit", "lawnmower", "survey"}) {
    cfg.trajectory = kind;
    const auto poses = trajectory_poses(cfg);
    REQUIRE(poses.size() == 16);
    for (const auto& p : poses) {
      const Vec3 c = p.camera_center();
      CHECK(c.y() == doctest::Approx(-cfg.camera_height));
      CHECK(std::abs(c.x()) <= cfg.room_half_x);
      CHECK(std::abs(c.z()) <= cfg.room_half_z);
    }
  }

  cfg.trajectory = "orbit";
  const auto orbit = trajectory_poses(cfg);
  for (const auto& p : orbit) {
    const Vec3 c = p.camera_center();
    CHECK(std::hypot(c.x(), c.z()) == doctest::Approx(cfg.orbit_radius));
    // the origin projects near the optical axis: x_c ~ 0 in camera frame
    const Vec3 origin_cam = p.to_camera(Vec3(0.0, -1.4, 0.0));
    CHECK(std::abs(origin_cam.x()) < 1e-9);
    CHECK(origin_cam.z() > 0.0);
  }

  // phase rotates the orbit start
  const auto shifted = trajectory_poses(cfg, 0.25);
  CHECK((shifted[0].camera_center() - orbit[4].camera_center()).norm() < 1e-9);
}

TEST_CASE("scene_sim: build_dataset is deterministic with sequential ids") {
  const auto cfg = small_sim();
  const Scene scene = generate_scene(cfg, kDim, 7);
  const SimDataset a = build_dataset(scene, cfg, 21, 100);
  const SimDataset b = build_dataset(scene, cfg, 21, 100);
  const SimDataset c = build_dataset(scene, cfg, 22, 100);

  REQUIRE(a.frames.size() == static_cast<std::size_t>(cfg.frame_count));
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].frame_id == 100 + i);
    CHECK(a.frames[i].patch_features == b.frames[i].patch_features);
    CHECK(a.frames[i].depth == b.frames[i].depth);
    CHECK(a.frames[i].masks == c.frames[i].masks);  // same geometry, different noise
  }
  CHECK(a.frames[0].patch_features != c.frames[0].patch_features);
  CHECK(a.frames[0].masks_are_ground_truth);
}

TEST_CASE("scene_sim: dataset round-trips through disk bit-exactly") {
  namespace fs = std::filesystem;
  const auto cfg = small_sim();
  const Scene scene = generate_scene(cfg, kDim, 7);
  SimConfig short_cfg = cfg;
  short_cfg.frame_count = 3;
  const SimDataset ds = build_dataset(scene, short_cfg, 5);

  const fs::path dir = fs::temp_directory_path() / "scenemem_ds_test";
  fs::remove_all(dir);
  write_dataset(dir.string(), ds);
  const SimDataset back = load_dataset(dir.string());

  CHECK(back.intrinsics.fx == ds.intrinsics.fx);
  CHECK(back.intrinsics.cy == ds.intrinsics.cy);
  REQUIRE(back.frames.size() == ds.frames.size());
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const auto& x = ds.frames[i];
    const auto& y = back.frames[i];
    CHECK(y.frame_id == x.frame_id);
    CHECK(y.patch_features == x.patch_features);
    CHECK(y.depth == x.depth);
    CHECK(y.masks == x.masks);
    CHECK(y.masks_are_ground_truth == x.masks_are_ground_truth);
    CHECK((y.pose.rotation() - x.pose.rotation()).norm() == 0.0);
    CHECK((y.pose.translation() - x.pose.translation()).norm() == 0.0);
  }

  // corruption is detected
  CHECK_THROWS_AS(load_dataset((dir / "nope").string()), std::runtime_error);
  {
    std::ofstream os(dir / "frame_000001.bin", std::ios::binary | std::ios::trunc);
    os << "DYNX";
  }
  CHECK_THROWS_AS(load_dataset(dir.string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("scene_sim: empty scene renders no surface at all") {
  SeededRng rng(12);
  Scene scene;
  scene.feature_dim = kDim;
  scene.background_feature = rng.unit_vector(kDim);

  const CameraIntrinsics k = intrinsics_for(small_sim());
  SeededRng noise(1);
  const ObservationFrame f =
      render_frame(scene, Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.3), k, 0, 0.0, noise);

  for (float d : f.depth) CHECK(d == 0.0f);
  for (int m : f.masks) CHECK(m == 0);
  for (int i = 0; i < kPatchCount; ++i) {
    const auto feat = f.patch_feature(i);
    for (int d = 0; d < kDim; ++d) CHECK(feat[d] == scene.background_feature[static_cast<std::size_t>(d)]);
  }
}

TEST_CASE("scene_sim: sphere depth matches the analytic entry point") {
  SeededRng rng(13);
  Scene scene;
  scene.feature_dim = kDim;
  scene.background_feature = rng.unit_vector(kDim);
  SceneObject ball;
  ball.id = 1;
  ball.shape = SceneObject::Shape::Sphere;
  ball.center = Vec3(0.0, -1.4, 3.0);
  ball.radius = 0.5;
  ball.feature = rng.unit_vector(kDim);
  scene.objects.push_back(ball);

  // odd image size puts the principal point on an exact pixel, so the
  // centre-pixel ray runs straight down the optical axis
  auto cfg = small_sim();
  cfg.render_height = 49;
  cfg.render_width = 49;
  const CameraIntrinsics k = intrinsics_for(cfg);
  REQUIRE(k.cx == 24.0);
  REQUIRE(k.cy == 24.0);

  SeededRng noise(2);
  const ObservationFrame f =
      render_frame(scene, Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.0), k, 0, 0.0, noise);
  const std::size_t mid = 24 * static_cast<std::size_t>(k.width) + 24;
  CHECK(f.depth[mid] == 2.5f);  // 3 m to the centre minus the 0.5 m radius
  CHECK(f.masks[mid] == 1);
  CHECK(f.depth[0] == 0.0f);  // corner ray misses, and there is no shell
  CHECK(f.masks[0] == 0);
}

namespace {

// Independent per-pixel intersection check: enumerates box faces instead of
// slab intervals and uses the projection form for spheres.
double face_enum_box_entry(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  // first positive face crossing: the entry from outside, the exit from inside
  double best = -1.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) continue;
    for (double bound : {lo[axis], hi[axis]}) {
      const double s = (bound - o[axis]) / d[axis];
      if (s <= 1e-9) continue;
      bool on_face = true;
      for (int other = 0; other < 3; ++other) {
        if (other == axis) continue;
        const double q = o[other] + s * d[other];
        if (q < lo[other] || q > hi[other]) on_face = false;
      }
      if (on_face && (best < 0.0 || s < best)) best = s;
    }
  }
  return best;
}

double projection_sphere_entry(const Vec3& o, const Vec3& d, const Vec3& c, double radius) {
  const Vec3 oc = c - o;
  const double dd = d.squaredNorm();
  const double tca = oc.dot(d) / dd;
  const double d2 = oc.squaredNorm() - tca * tca * dd;
  const double r2 = radius * radius;
  if (d2 > r2) return -1.0;
  const double thc = std::sqrt((r2 - d2) / dd);
  const double s1 = tca - thc;
  if (s1 > 1e-9) return s1;
  const double s2 = tca + thc;
  if (s2 > 1e-9) return s2;
  return -1.0;
}

}  // namespace

TEST_CASE("scene_sim: masks and depth agree with a brute-force intersector") {
  auto cfg = small_sim();
  const Scene scene = generate_scene(cfg, kDim, 19);
  const auto poses = trajectory_poses(cfg);
  const CameraIntrinsics k = intrinsics_for(cfg);
  const Vec3 room_lo(-scene.room_half_x, -scene.room_height, -scene.room_half_z);
  const Vec3 room_hi(scene.room_half_x, 0.0, scene.room_half_z);

  for (std::size_t pi : {std::size_t{0}, std::size_t{5}}) {
    SeededRng noise(7);
    const ObservationFrame f = render_frame(scene, poses[pi], k, 0, 0.0, noise);
    const Mat3 cam_to_world = poses[pi].rotation().transpose();
    const Vec3 center = poses[pi].camera_center();

    for (int r = 0; r < k.height; ++r) {
      for (int c = 0; c < k.width; ++c) {
        const Vec3 dir = cam_to_world * Vec3((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
        double best = face_enum_box_entry(center, dir, room_lo, room_hi);
        int best_id = best > 0.0 ? 0 : -1;
        for (const auto& obj : scene.objects) {
          const double s =
              obj.shape == SceneObject::Shape::Sphere
                  ? projection_sphere_entry(center, dir, obj.center, obj.radius)
                  : face_enum_box_entry(center, dir, obj.center - obj.half_extents,
                                        obj.center + obj.half_extents);
          if (s > 0.0 && (best_id < 0 || s < best)) {
            best = s;
            best_id = obj.id;
          }
        }
        const std::size_t idx = static_cast<std::size_t>(r) * k.width + c;
        REQUIRE(f.masks[idx] == (best_id < 0 ? 0 : best_id));
        if (best_id < 0) {
          REQUIRE(f.depth[idx] == 0.0f);
        } else {
          REQUIRE(f.depth[idx] == doctest::Approx(best).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("scene_sim: events mutate the scene between frames") {
  auto cfg = small_sim();
  cfg.frame_count = 6;
  const Scene scene = generate_scene(cfg, kDim, 7);

  SUBCASE("apply_event moves and removes, unknown ids throw") {
    Scene s = scene;
    SceneEvent mv;
    mv.kind = SceneEvent::Kind::Move;
    mv.object_id = 1;
    mv.new_center = scene.object(1)->center + Vec3(0.5, 0.0, 0.0);
    apply_event(s, mv);
    CHECK((s.object(1)->center - mv.new_center).norm() == 0.0);

    SceneEvent rm;
    rm.kind = SceneEvent::Kind::Remove;
    rm.object_id = 2;
    apply_event(s, rm);
    CHECK(s.object(2) == nullptr);
    CHECK(s.objects.size() == scene.objects.size() - 1);

    SceneEvent bad = rm;
    bad.object_id = 99;
    CHECK_THROWS_AS(apply_event(s, bad), std::invalid_argument);
    bad.kind = SceneEvent::Kind::Move;
    CHECK_THROWS_AS(apply_event(s, bad), std::invalid_argument);
  }

  SUBCASE("build_dynamic_dataset fires events before their trigger frame") {
    SceneEvent rm;
    rm.frame = 3;
    rm.kind = SceneEvent::Kind::Remove;
    rm.object_id = 1;
    const SimDataset dyn = build_dynamic_dataset(scene, cfg, 21, {rm});
    const SimDataset fixed = build_dataset(scene, cfg, 21);
    REQUIRE(dyn.frames.size() == 6);
    CHECK(dyn.seed == 21);
    REQUIRE(dyn.events.size() == 1);
    CHECK(dyn.events[0].frame == 3);

    const auto count_id1 = [](const ObservationFrame& f) {
      return std::count(f.masks.begin(), f.masks.end(), 1);
    };
    // identical until the trigger, object 1 gone from the trigger on
    int seen_before = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(dyn.frames[i].masks == fixed.frames[i].masks);
      seen_before += count_id1(dyn.frames[i]);
    }
    CHECK(seen_before > 0);
    for (std::size_t i = 3; i < 6; ++i) CHECK(count_id1(dyn.frames[i]) == 0);

    // an event beyond the trajectory is an error
    SceneEvent late = rm;
    late.frame = 6;
    CHECK_THROWS_AS(build_dynamic_dataset(scene, cfg, 21, {late}), std::invalid_argument);
  }

  SUBCASE("events and seed survive the manifest round trip") {
    namespace fs = std::filesystem;
    SceneEvent mv;
    mv.frame = 2;
    mv.kind = SceneEvent::Kind::Move;
    mv.object_id = 2;
    mv.new_center = Vec3(1.25, -0.5, -2.0);
    SceneEvent rm;
    rm.frame = 4;
    rm.kind = SceneEvent::Kind::Remove;
    rm.object_id = 3;
    const SimDataset dyn = build_dynamic_dataset(scene, cfg, 33, {mv, rm});

    const fs::path dir = fs::temp_directory_path() / "scenemem_dyn_ds_test";
    fs::remove_all(dir);
    write_dataset(dir.string(), dyn);
    const SimDataset back = load_dataset(dir.string());
    fs::remove_all(dir);

    CHECK(back.seed == 33);
    REQUIRE(back.events.size() == 2);
    CHECK(back.events[0].frame == 2);
    CHECK(back.events[0].kind == SceneEvent::Kind::Move);
    CHECK(back.events[0].object_id == 2);
    CHECK((back.events[0].new_center - mv.new_center).norm() == 0.0);
    CHECK(back.events[1].kind == SceneEvent::Kind::Remove);
    CHECK(back.events[1].object_id == 3);
  }
}

TEST_CASE("scene_sim: rendered frames integrate and replay idempotently") {
  const auto cfg = small_sim();
  Scene scene = generate_scene(cfg, kDim, 11);
  SimConfig one = cfg;
  one.frame_count = 4;
  const SimDataset ds = build_dataset(scene, one, 9);

  PatchStore store(0.5, kDim);
  for (const auto& f : ds.frames) store.integrate_frame(f, 0.05, 5.0);
  const std::size_t after_pass = store.size();
  CHECK(after_pass > 0);
  CHECK(store.check_index_consistency());

  // replaying the final frame changes nothing
  const auto ids_before = store.all_ids_sorted();
  std::vector<Vec3> pos_before;
  for (auto id : ids_before) pos_before.push_back(store.find(id)->position);
  std::sort(pos_before.begin(), pos_before.end(), [](const Vec3& a, const Vec3& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  });

  store.integrate_frame(ds.frames.back(), 0.05, 5.0);
  CHECK(store.size() == after_pass);
  std::vector<Vec3> pos_after;
  for (auto id : store.all_ids_sorted()) pos_after.push_back(store.find(id)->position);
  std::sort(pos_after.begin(), pos_after.end(), [](const Vec3& a, const Vec3& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  });
  REQUIRE(pos_after.size() == pos_before.size());
  for (std::size_t i = 0; i < pos_before.size(); ++i)
    CHECK((pos_after[i] - pos_before[i]).norm() <= 1e-9);

  // ground-truth labels recorded from masks
  bool saw_object_label = false;
  for (auto id : store.all_ids_sorted()) {
    const auto* fp = store.find(id);
    if (fp->gt_instance_id.has_value() && *fp->gt_instance_id > 0) saw_object_label = true;
  }
  CHECK(saw_object_label);

  CHECK_THROWS_AS(move_object(scene, 99, Vec3::Zero()), std::invalid_argument);
}
