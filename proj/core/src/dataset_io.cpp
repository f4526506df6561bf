#include "scenemem/dataset_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "binary_io.hpp"

namespace scenemem {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::read_array;
using detail::read_pod;
using detail::write_array;
using detail::write_pod;

constexpr char kFrameMagic[4] = {'D', 'Y', 'N', 'F'};
constexpr std::uint16_t kFrameVersion = 1;

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.bin", index);
  return buf;
}

}  // namespace

void write_frame_file(const std::string& path, const ObservationFrame& frame) {
  frame.validate(frame.feature_dim);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open frame file for writing: " + path);

  os.write(kFrameMagic, 4);
  write_pod(os, kFrameVersion);
  write_pod(os, static_cast<std::uint16_t>(frame.feature_dim));
  write_pod(os, static_cast<std::uint32_t>(frame.intrinsics.height));
  write_pod(os, static_cast<std::uint32_t>(frame.intrinsics.width));
  write_pod(os, static_cast<std::uint64_t>(frame.frame_id));
  const Mat3& r = frame.pose.rotation();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) write_pod(os, r(i, j));
  const Vec3& t = frame.pose.translation();
  for (int i = 0; i < 3; ++i) write_pod(os, t[i]);
  write_array(os, frame.patch_features.data(), frame.patch_features.size());
  write_array(os, frame.depth.data(), frame.depth.size());
  write_array(os, frame.masks.data(), frame.masks.size());
  if (!os) throw std::runtime_error("write failed: " + path);
}

ObservationFrame load_frame_file(const std::string& path, const CameraIntrinsics& intrinsics) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open frame file: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFrameMagic, 4) != 0)
    throw std::runtime_error("not a frame file (bad magic): " + path);
  const auto version = read_pod<std::uint16_t>(is, "frame version");
  if (version != kFrameVersion)
    throw std::runtime_error("unsupported frame version in " + path);
  const auto dim = read_pod<std::uint16_t>(is, "frame feature_dim");
  const auto height = read_pod<std::uint32_t>(is, "frame height");
  const auto width = read_pod<std::uint32_t>(is, "frame width");
  if (static_cast<int>(height) != intrinsics.height ||
      static_cast<int>(width) != intrinsics.width)
    throw std::runtime_error("frame image size disagrees with manifest: " + path);

  ObservationFrame frame;
  frame.frame_id = read_pod<std::uint64_t>(is, "frame id");
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = read_pod<double>(is, "frame rotation");
  Vec3 t;
  for (int i = 0; i < 3; ++i) t[i] = read_pod<double>(is, "frame translation");
  frame.pose = Pose(r, t);
  frame.intrinsics = intrinsics;
  frame.feature_dim = dim;

  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  frame.patch_features.resize(static_cast<std::size_t>(kPatchCount) * dim);
  frame.depth.resize(pixels);
  frame.masks.resize(pixels);
  read_array(is, frame.patch_features.data(), frame.patch_features.size(), "frame features");
  read_array(is, frame.depth.data(), frame.depth.size(), "frame depth");
  read_array(is, frame.masks.data(), frame.masks.size(), "frame masks");
  frame.validate(dim);
  return frame;
}

void write_dataset(const std::string& dir, const SimDataset& dataset) {
  if (dataset.frames.empty()) throw std::invalid_argument("write_dataset: no frames");
  dataset.intrinsics.validate();
  fs::create_directories(dir);

  json manifest;
  manifest["format"] = "scenemem-dataset";
  manifest["version"] = 1;
  manifest["feature_dim"] = dataset.frames.front().feature_dim;
  manifest["height"] = dataset.intrinsics.height;
  manifest["width"] = dataset.intrinsics.width;
  manifest["intrinsics"] = {{"fx", dataset.intrinsics.fx},
                            {"fy", dataset.intrinsics.fy},
                            {"cx", dataset.intrinsics.cx},
                            {"cy", dataset.intrinsics.cy}};
  manifest["masks_are_ground_truth"] = dataset.frames.front().masks_are_ground_truth;
  manifest["seed"] = dataset.seed;
  json events = json::array();
  for (const auto& ev : dataset.events) {
    json e;
    e["frame"] = ev.frame;
    e["kind"] = ev.kind == SceneEvent::Kind::Move ? "move" : "remove";
    e["object_id"] = ev.object_id;
    if (ev.kind == SceneEvent::Kind::Move)
      e["new_center"] = {ev.new_center.x(), ev.new_center.y(), ev.new_center.z()};
    events.push_back(std::move(e));
  }
  manifest["events"] = std::move(events);
  json files = json::array();

  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    const auto& frame = dataset.frames[i];
    if (frame.feature_dim != dataset.frames.front().feature_dim)
      throw std::invalid_argument("write_dataset: mixed feature dims");
    if (frame.masks_are_ground_truth != dataset.frames.front().masks_are_ground_truth)
      throw std::invalid_argument("write_dataset: mixed mask semantics");
    const std::string name = frame_name(i);
    write_frame_file((fs::path(dir) / name).string(), frame);
    files.push_back(name);
  }
  manifest["frames"] = std::move(files);

  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + dir);
  os << manifest.dump(2) << '\n';
}

void write_scene(const std::string& path, const Scene& scene) {
  json j;
  j["format"] = "scenemem-scene";
  j["version"] = 1;
  j["feature_dim"] = scene.feature_dim;
  j["room_half_x"] = scene.room_half_x;
  j["room_half_z"] = scene.room_half_z;
  j["room_height"] = scene.room_height;
  j["has_room_shell"] = scene.has_room_shell;
  j["background_feature"] = scene.background_feature;
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json e;
    e["id"] = o.id;
    e["shape"] = o.shape == SceneObject::Shape::Sphere ? "sphere" : "box";
    e["center"] = {o.center.x(), o.center.y(), o.center.z()};
    if (o.shape == SceneObject::Shape::Sphere)
      e["radius"] = o.radius;
    else
      e["half_extents"] = {o.half_extents.x(), o.half_extents.y(), o.half_extents.z()};
    e["feature"] = o.feature;
    objects.push_back(std::move(e));
  }
  j["objects"] = std::move(objects);

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write scene file: " + path);
  os << j.dump(2) << '\n';
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed scene file " + path + ": " + e.what());
  }
  if (j.value("format", "") != "scenemem-scene")
    throw std::runtime_error("not a scene file: " + path);
  if (j.value("version", 0) != 1)
    throw std::runtime_error("unsupported scene version in " + path);

  Scene scene;
  scene.feature_dim = j.at("feature_dim").get<int>();
  scene.room_half_x = j.at("room_half_x").get<double>();
  scene.room_half_z = j.at("room_half_z").get<double>();
  scene.room_height = j.at("room_height").get<double>();
  scene.has_room_shell = j.at("has_room_shell").get<bool>();
  scene.background_feature = j.at("background_feature").get<std::vector<float>>();
  for (const auto& e : j.at("objects")) {
    SceneObject o;
    o.id = e.at("id").get<int>();
    const std::string shape = e.at("shape").get<std::string>();
    if (shape == "sphere") {
      o.shape = SceneObject::Shape::Sphere;
      o.radius = e.at("radius").get<double>();
    } else if (shape == "box") {
      o.shape = SceneObject::Shape::Box;
      const auto& h = e.at("half_extents");
      o.half_extents = Vec3(h.at(0).get<double>(), h.at(1).get<double>(), h.at(2).get<double>());
    } else {
      throw std::runtime_error("unknown object shape in scene file: " + shape);
    }
    const auto& c = e.at("center");
    o.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    o.feature = e.at("feature").get<std::vector<float>>();
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

SimDataset load_dataset(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw std::runtime_error("cannot open manifest.json in " + dir);
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest.json in " + dir + ": " + e.what());
  }
  if (manifest.value("format", "") != "scenemem-dataset")
    throw std::runtime_error("manifest.json is not a scenemem dataset: " + dir);
  if (manifest.value("version", 0) != 1)
    throw std::runtime_error("unsupported dataset version in " + dir);

  SimDataset out;
  out.intrinsics.height = manifest.at("height").get<int>();
  out.intrinsics.width = manifest.at("width").get<int>();
  const auto& intr = manifest.at("intrinsics");
  out.intrinsics.fx = intr.at("fx").get<double>();
  out.intrinsics.fy = intr.at("fy").get<double>();
  out.intrinsics.cx = intr.at("cx").get<double>();
  out.intrinsics.cy = intr.at("cy").get<double>();
  out.intrinsics.validate();

  out.seed = manifest.value("seed", std::uint64_t{0});
  if (manifest.contains("events")) {
    for (const auto& e : manifest.at("events")) {
      SceneEvent ev;
      ev.frame = e.at("frame").get<std::uint64_t>();
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "move")
        ev.kind = SceneEvent::Kind::Move;
      else if (kind == "remove")
        ev.kind = SceneEvent::Kind::Remove;
      else
        throw std::runtime_error("unknown event kind in manifest: " + kind);
      ev.object_id = e.at("object_id").get<int>();
      if (ev.kind == SceneEvent::Kind::Move) {
        const auto& c = e.at("new_center");
        ev.new_center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
      }
      out.events.push_back(ev);
    }
  }

  const int dim = manifest.at("feature_dim").get<int>();
  const bool gt_masks = manifest.value("masks_are_ground_truth", false);
  for (const auto& name : manifest.at("frames")) {
    auto frame =
        load_frame_file((fs::path(dir) / name.get<std::string>()).string(), out.intrinsics);
    if (frame.feature_dim != dim)
      throw std::runtime_error("frame feature_dim disagrees with manifest in " + dir);
    frame.masks_are_ground_truth = gt_masks;
    out.frames.push_back(std::move(frame));
  }
  return out;
}

}  // namespace scenemem
