#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "scenemem/rng.hpp"
#include "scenemem/token_assembly.hpp"

using namespace scenemem;

namespace {

constexpr int kDim = 8;

FeaturePoint point_at(const Vec3& pos, std::vector<float> feature) {
  FeaturePoint p;
  p.position = pos;
  p.feature = std::move(feature);
  p.size = 0.1;
  return p;
}

std::vector<float> axis_feature(int k) {
  std::vector<float> f(kDim, 0.0f);
  f[static_cast<std::size_t>(k)] = 1.0f;
  return f;
}

// (row, col) pairs of the valid tokens
std::set<std::pair<int, int>> valid_cells(const std::vector<PatchToken>& tokens) {
  std::set<std::pair<int, int>> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].valid)
      out.insert({static_cast<int>(i) / kPanoramaCols, static_cast<int>(i) % kPanoramaCols});
  return out;
}

}  // namespace

TEST_CASE("token_assembly: all 576 ray directions match the rotation oracle") {
  for (int row = 0; row < kPanoramaRows; ++row) {
    for (int col = 0; col < kPanoramaCols; ++col) {
      const Vec3 d = panorama_direction(row, col);
      CHECK(std::abs(d.norm() - 1.0) <= 1e-9);
      const Eigen::Vector3d ref = oracles::panorama_direction_reference(row, col);
      CHECK((d - ref).norm() <= 1e-12);
    }
  }

  // landmarks: column 0 behind, column 24 ahead, row 0 above the horizon
  const Vec3 behind = panorama_direction(5, 0);
  CHECK(behind.z() < 0.0);
  const Vec3 ahead = panorama_direction(5, 24);
  CHECK(ahead.z() > 0.0);
  CHECK(std::abs(ahead.x()) < 1e-12);
  CHECK(panorama_direction(0, 24).y() < 0.0);   // +41.25 deg looks up, and up is -y
  CHECK(panorama_direction(11, 24).y() > 0.0);  // -41.25 deg looks down

  CHECK_THROWS_AS(panorama_direction(-1, 0), std::invalid_argument);
  CHECK_THROWS_AS(panorama_direction(12, 0), std::invalid_argument);
  CHECK_THROWS_AS(panorama_direction(0, 48), std::invalid_argument);
}

TEST_CASE("token_assembly: relative position features") {
  const Pose agent = Pose::from_heading(Vec3(1.0, -1.4, 2.0), 0.0);

  SUBCASE("straight ahead") {
    const RelPosFeature r = relative_position_features(Vec3(1.0, -1.4, 4.0), agent);
    CHECK(r.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.z == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.distance == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.cos_theta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.sin_theta == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("at the agent the convention is theta = 0") {
    const RelPosFeature r = relative_position_features(Vec3(1.0, -1.4, 2.0), agent);
    CHECK(r.x == 0.0);
    CHECK(r.y == 0.0);
    CHECK(r.z == 0.0);
    CHECK(r.distance == 0.0);
    CHECK(r.cos_theta == 1.0);
    CHECK(r.sin_theta == 0.0);
  }

  SUBCASE("to the right of the heading means positive sin") {
    const RelPosFeature r = relative_position_features(Vec3(2.0, -1.4, 2.0), agent);
    CHECK(r.sin_theta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.cos_theta == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("random points: distance oracle and unit circle") {
    SeededRng rng(31);
    for (int t = 0; t < 200; ++t) {
      const Pose pose = Pose::from_heading(
          Vec3(rng.uniform(-4, 4), rng.uniform(-2, 0), rng.uniform(-4, 4)),
          rng.uniform(-3.2, 3.2));
      const Vec3 p(rng.uniform(-6, 6), rng.uniform(-3, 1), rng.uniform(-6, 6));
      const RelPosFeature r = relative_position_features(p, pose);
      // rotations preserve length, so the agent-frame distance equals the
      // world-frame distance computed without any rotation at all
      CHECK(r.distance == doctest::Approx((p - pose.camera_center()).norm()).epsilon(1e-9));
      CHECK(r.cos_theta * r.cos_theta + r.sin_theta * r.sin_theta ==
            doctest::Approx(1.0).epsilon(1e-9));
      const Vec3 pc = pose.to_camera(p);
      CHECK(r.x == pc.x());
      CHECK(r.y == pc.y());
      CHECK(r.z == pc.z());
    }
  }
}

TEST_CASE("token_assembly: empty store renders 576 invalid tokens") {
  const PatchStore store(0.5, kDim);
  const Pose agent = Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.7);
  const auto tokens = render_patch_tokens(store, agent);

  REQUIRE(tokens.size() == 576);
  for (const auto& t : tokens) {
    CHECK_FALSE(t.valid);
    CHECK(t.point_id == 0);
    REQUIRE(t.feature.size() == kDim);
    for (float v : t.feature) CHECK(v == 0.0f);
    CHECK(t.rel.distance == 0.0);
    CHECK(t.rel.cos_theta == 1.0);
    CHECK(t.rel.sin_theta == 0.0);
  }
}

TEST_CASE("token_assembly: a point straight ahead lands in column 24") {
  PatchStore store(0.5, kDim);
  const Pose agent = Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.0);
  store.insert_point(point_at(Vec3(0.0, -1.4, 3.0), axis_feature(0)));

  const auto tokens = render_patch_tokens(store, agent);
  const auto cells = valid_cells(tokens);
  REQUIRE(!cells.empty());
  for (const auto& [row, col] : cells) {
    CHECK(col == 24);
    // agent height is elevation zero, exactly between the two middle rows;
    // at 3 m both middle rays pass within the 0.25 m capture radius
    CHECK((row == 5 || row == 6));
    const auto& t = tokens[static_cast<std::size_t>(row * kPanoramaCols + col)];
    CHECK(t.rel.distance == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(t.rel.cos_theta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.feature == axis_feature(0));
  }

  // beyond max_range the ray gives up
  RayQueryConfig near;
  near.max_range = 2.0;
  CHECK(valid_cells(render_patch_tokens(store, agent, near)).empty());
}

TEST_CASE("token_assembly: rotating the agent 90 degrees clockwise shifts columns by -12") {
  PatchStore store(0.5, kDim);
  const Pose base = Pose::from_heading(Vec3(0.5, -1.2, -0.5), 0.4);
  const Mat3 to_world = base.rotation().transpose();
  const Vec3 origin = base.camera_center();

  // one point at the exact center of a handful of rays, 3 m out; adjacent
  // rays are 7.5 deg away, which at 3 m is ~0.39 m > the 0.25 m radius,
  // so each point resolves in exactly one token
  const std::vector<std::pair<int, int>> seeded = {{2, 5}, {7, 30}, {11, 0}, {0, 47}, {6, 24}};
  for (std::size_t i = 0; i < seeded.size(); ++i) {
    const auto [row, col] = seeded[i];
    const Vec3 p = origin + 3.0 * (to_world * panorama_direction(row, col));
    store.insert_point(point_at(p, axis_feature(static_cast<int>(i))));
  }

  const auto before = valid_cells(render_patch_tokens(store, base));
  REQUIRE(before.size() == seeded.size());
  for (const auto& [row, col] : seeded) CHECK(before.count({row, col}) == 1);

  const Pose turned =
      Pose::from_heading(base.camera_center(), 0.4 + std::numbers::pi / 2.0);
  const auto after = valid_cells(render_patch_tokens(store, turned));
  REQUIRE(after.size() == before.size());
  for (const auto& [row, col] : before) CHECK(after.count({row, (col - 12 + 48) % 48}) == 1);
}

TEST_CASE("token_assembly: action codec") {
  SUBCASE("canonical forms round-trip") {
    CHECK(format_action({Action::Kind::Forward, 25.0}) == "Forward 25 cm.");
    CHECK(format_action({Action::Kind::Stop, 0.0}) == "Stop.");
    CHECK(format_action({Action::Kind::TurnLeft, 30.0}) == "Turn left 30 degree.");
    CHECK(format_action({Action::Kind::TurnRight, 0.5}) == "Turn right 0.5 degree.");

    CHECK(parse_action("Forward 25 cm.") == Action{Action::Kind::Forward, 25.0});
    CHECK(parse_action("Stop.") == Action{Action::Kind::Stop, 0.0});
    CHECK(parse_action("Turn left 180 degree.") == Action{Action::Kind::TurnLeft, 180.0});
    CHECK(parse_action("Turn right 22.5 degree.") == Action{Action::Kind::TurnRight, 22.5});
  }

  SUBCASE("parse accepts non-canonical spellings and format canonicalises them") {
    CHECK(format_action(parse_action("Forward 25.0 cm.")) == "Forward 25 cm.");
    CHECK(format_action(parse_action("Turn left 030 degree.")) == "Turn left 30 degree.");
  }

  SUBCASE("off-grammar and out-of-range text is rejected") {
    for (const char* bad :
         {"Jump 3 m.", "", "Stop", "stop.", "Forward 25 cm", "forward 25 cm.",
          "Forward 25 m.", "Forward  25 cm.", "Forward 2.55 cm.", "Forward .5 cm.",
          "Forward 25. cm.", "Forward -25 cm.", "Forward 0 cm.", "Forward 501 cm.",
          "Turn left 0 degree.", "Turn left 180.5 degree.", "Turn left 30 degrees.",
          "Turn left 30 degree. ", "Turn around 30 degree."})
      CHECK_THROWS_AS(parse_action(bad), std::invalid_argument);
  }

  SUBCASE("format rejects invariant violations") {
    CHECK_THROWS_AS(format_action({Action::Kind::TurnLeft, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(format_action({Action::Kind::TurnLeft, 180.5}), std::invalid_argument);
    CHECK_THROWS_AS(format_action({Action::Kind::Forward, 500.1}), std::invalid_argument);
    CHECK_THROWS_AS(format_action({Action::Kind::Forward, 33.1234}), std::invalid_argument);
  }

  SUBCASE("fuzz: parse then format is the identity on 1000 on-grid actions") {
    SeededRng rng(55);
    for (int i = 0; i < 1000; ++i) {
      Action a;
      const int kind = rng.uniform_int(0, 3);
      if (kind == 0) {
        a = {Action::Kind::Stop, 0.0};
      } else if (kind == 1) {
        a = {Action::Kind::Forward, rng.uniform_int(1, 5000) / 10.0};
      } else {
        a = {kind == 2 ? Action::Kind::TurnLeft : Action::Kind::TurnRight,
             rng.uniform_int(1, 1800) / 10.0};
      }
      const std::string s = format_action(a);
      const Action back = parse_action(s);
      CHECK(back.kind == a.kind);
      CHECK(back.value == a.value);
      CHECK(format_action(back) == s);
    }
  }
}

TEST_CASE("token_assembly: prompt assembly and serialization") {
  PatchStore store(0.5, kDim);
  const Pose agent = Pose::from_heading(Vec3(0.0, -1.4, 0.0), 0.0);
  store.insert_point(point_at(Vec3(0.0, -1.4, 3.0), axis_feature(0)));
  auto patches = render_patch_tokens(store, agent);

  ContextToken near;
  near.id = 7;
  near.feature = axis_feature(1);
  near.rel = relative_position_features(Vec3(0.0, -1.4, 1.0), agent);
  ContextToken far = near;
  far.id = 3;
  far.rel = relative_position_features(Vec3(0.0, -1.4, 5.0), agent);
  ContextToken tied = near;  // same distance as `near`, smaller id
  tied.id = 2;

  SUBCASE("context tokens sort by distance then id") {
    const auto p = build_prompt(patches, {far, near, tied}, {}, "go", {});
    REQUIRE(p.instances.size() == 3);
    CHECK(p.instances[0].id == 2);
    CHECK(p.instances[1].id == 7);
    CHECK(p.instances[2].id == 3);
  }

  SUBCASE("history pads right with <none>, most recent last") {
    const auto p0 = build_prompt(patches, {}, {}, "go", {});
    CHECK(p0.history == std::array<std::string, 4>{"<none>", "<none>", "<none>", "<none>"});

    const auto p2 = build_prompt(patches, {}, {}, "go",
                                 {{Action::Kind::Forward, 25.0}, {Action::Kind::TurnLeft, 30.0}});
    CHECK(p2.history ==
          std::array<std::string, 4>{"Forward 25 cm.", "Turn left 30 degree.", "<none>",
                                     "<none>"});
  }

  SUBCASE("shape violations throw") {
    auto short_patches = patches;
    short_patches.pop_back();
    CHECK_THROWS_AS(build_prompt(short_patches, {}, {}, "go", {}), std::invalid_argument);

    const std::vector<Action> five(5, Action{Action::Kind::Stop, 0.0});
    CHECK_THROWS_AS(build_prompt(patches, {}, {}, "go", five), std::invalid_argument);

    auto bad_dim = near;
    bad_dim.feature.push_back(0.0f);
    CHECK_THROWS_AS(build_prompt(patches, {bad_dim}, {}, "go", {}), std::invalid_argument);
  }

  SUBCASE("text form is exact and deterministic") {
    const auto p = build_prompt(patches, {near}, {}, "find the chair",
                                {{Action::Kind::Forward, 25.0}});
    std::size_t valid = 0;
    for (const auto& t : p.patches) valid += t.valid ? 1 : 0;
    const std::string expected =
        "<user><patches:576:valid=" + std::to_string(valid) +
        "><instances:1><zones:0><instruction:find the chair>"
        "<history:Forward 25 cm.|<none>|<none>|<none>><end><assistant>";
    CHECK(p.text() == expected);
    CHECK(build_prompt(patches, {near}, {}, "find the chair",
                       {{Action::Kind::Forward, 25.0}})
              .text() == expected);
  }

  SUBCASE("sidecar layout") {
    namespace fs = std::filesystem;
    const auto p = build_prompt(patches, {near, far}, {}, "go", {});
    const fs::path base = fs::temp_directory_path() / "scenemem_prompt_test";
    write_prompt_payload(base.string(), p);

    std::ifstream txt(base.string() + ".txt", std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(txt)), std::istreambuf_iterator<char>());
    CHECK(text == p.text());

    std::ifstream js(base.string() + ".json");
    nlohmann::json header;
    js >> header;
    CHECK(header.at("feature_dim") == kDim);
    CHECK(header.at("patch_tokens") == 576);
    CHECK(header.at("instance_tokens") == 2);
    CHECK(header.at("zone_tokens") == 0);
    const std::size_t row_bytes = kDim * 4 + 24 + 1;
    CHECK(header.at("bytes_per_token") == row_bytes);

    std::ifstream bin(base.string() + ".bin", std::ios::binary);
    std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    REQUIRE(blob.size() == row_bytes * (576 + 2));

    // row of the first valid patch token
    std::size_t first_valid = 0;
    while (!p.patches[first_valid].valid) ++first_valid;
    const char* row = blob.data() + first_valid * row_bytes;
    std::vector<float> feat(kDim);
    std::memcpy(feat.data(), row, kDim * 4);
    CHECK(feat == p.patches[first_valid].feature);
    float rel[6];
    std::memcpy(rel, row + kDim * 4, 24);
    CHECK(rel[3] == doctest::Approx(3.0f));
    CHECK(static_cast<unsigned char>(row[row_bytes - 1]) == 1);

    // an invalid row is a zero feature, the degenerate relpos, flag 0
    std::size_t first_invalid = 0;
    while (p.patches[first_invalid].valid) ++first_invalid;
    const char* row0 = blob.data() + first_invalid * row_bytes;
    std::memcpy(feat.data(), row0, kDim * 4);
    for (float v : feat) CHECK(v == 0.0f);
    std::memcpy(rel, row0 + kDim * 4, 24);
    CHECK(rel[0] == 0.0f);
    CHECK(rel[3] == 0.0f);
    CHECK(rel[4] == 1.0f);
    CHECK(static_cast<unsigned char>(row0[row_bytes - 1]) == 0);

    fs::remove(base.string() + ".txt");
    fs::remove(base.string() + ".json");
    fs::remove(base.string() + ".bin");
  }
}
