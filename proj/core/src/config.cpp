#include "scenemem/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace scenemem {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key or value");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

double config_get_double(const ConfigMap& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number: " + it->second);
  }
}

int config_get_int(const ConfigMap& m, const std::string& key, int fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    std::size_t pos = 0;
    const long v = std::stol(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not an integer: " + it->second);
  }
}

bool config_get_bool(const ConfigMap& m, const std::string& key, bool fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw std::invalid_argument("config: key '" + key + "' is not a boolean: " + it->second);
}

std::string config_get_string(const ConfigMap& m, const std::string& key,
                              const std::string& fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

void EngineConfig::validate() const {
  if (feature_dim <= 0) throw std::invalid_argument("config: features.dim must be > 0");
  if (!(cull_delta > 0.0)) throw std::invalid_argument("config: culling.delta must be > 0");
  if (!(cull_max_distance > 0.0))
    throw std::invalid_argument("config: culling.max_distance must be > 0");
  if (!(cell_size > 0.0)) throw std::invalid_argument("config: index.cell_size must be > 0");
  if (merge_top_k <= 0) throw std::invalid_argument("config: instances.top_k must be > 0");
  if (!(merge_threshold > 0.0 && merge_threshold < 1.0))
    throw std::invalid_argument("config: instances.merge_threshold must be in (0, 1)");
  if (!(zone_size > 0.0)) throw std::invalid_argument("config: zones.size must be > 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("config: alignment.temperature must be > 0");
  if (!(ray_radius > 0.0)) throw std::invalid_argument("config: rays.radius must be > 0");
  if (!(ray_max_range > 0.0)) throw std::invalid_argument("config: rays.max_range must be > 0");
  if (!(staleness_epsilon > 0.0))
    throw std::invalid_argument("config: replay.staleness_epsilon must be > 0");
  if (discriminator_hidden <= 0)
    throw std::invalid_argument("config: discriminator.hidden must be > 0");
}

EngineConfig EngineConfig::from_map(const ConfigMap& m) {
  EngineConfig c;
  c.feature_dim = config_get_int(m, "features.dim", c.feature_dim);
  c.cull_delta = config_get_double(m, "culling.delta", c.cull_delta);
  c.cull_max_distance = config_get_double(m, "culling.max_distance", c.cull_max_distance);
  c.cell_size = config_get_double(m, "index.cell_size", c.cell_size);
  c.merge_top_k = config_get_int(m, "instances.top_k", c.merge_top_k);
  c.merge_threshold = config_get_double(m, "instances.merge_threshold", c.merge_threshold);
  c.zone_size = config_get_double(m, "zones.size", c.zone_size);
  c.temperature = config_get_double(m, "alignment.temperature", c.temperature);
  c.ray_radius = config_get_double(m, "rays.radius", c.ray_radius);
  c.ray_max_range = config_get_double(m, "rays.max_range", c.ray_max_range);
  c.staleness_epsilon = config_get_double(m, "replay.staleness_epsilon", c.staleness_epsilon);
  c.discriminator_hidden = config_get_int(m, "discriminator.hidden", c.discriminator_hidden);
  c.heuristic.cos_threshold =
      config_get_double(m, "discriminator.cos_threshold", c.heuristic.cos_threshold);
  c.heuristic.cos_scale = config_get_double(m, "discriminator.cos_scale", c.heuristic.cos_scale);
  c.heuristic.dist_gate = config_get_double(m, "discriminator.dist_gate", c.heuristic.dist_gate);
  c.heuristic.dist_scale = config_get_double(m, "discriminator.dist_scale", c.heuristic.dist_scale);
  c.validate();
  return c;
}

void SimConfig::validate() const {
  if (object_count <= 0) throw std::invalid_argument("config: scene.objects must be > 0");
  if (!(room_half_x > 0.0 && room_half_z > 0.0 && room_height > 0.0))
    throw std::invalid_argument("config: scene room dimensions must be > 0");
  if (!(min_extent > 0.0 && max_extent >= min_extent))
    throw std::invalid_argument("config: scene extents must satisfy 0 < min <= max");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("config: scene.noise_sigma must be >= 0");
  if (render_height <= 0 || render_width <= 0)
    throw std::invalid_argument("config: render dimensions must be > 0");
  if (!(focal_scale > 0.0)) throw std::invalid_argument("config: render.focal_scale must be > 0");
  if (trajectory != "orbit" && trajectory != "lawnmower" && trajectory != "survey")
    throw std::invalid_argument("config: trajectory.kind must be orbit, lawnmower, or survey");
  if (frame_count <= 0) throw std::invalid_argument("config: trajectory.frames must be > 0");
  if (!(orbit_radius > 0.0)) throw std::invalid_argument("config: trajectory.radius must be > 0");
  if (!(camera_height > 0.0)) throw std::invalid_argument("config: trajectory.height must be > 0");
}

SimConfig SimConfig::from_map(const ConfigMap& m) {
  SimConfig c;
  c.object_count = config_get_int(m, "scene.objects", c.object_count);
  c.room_half_x = config_get_double(m, "scene.room_half_x", c.room_half_x);
  c.room_half_z = config_get_double(m, "scene.room_half_z", c.room_half_z);
  c.room_height = config_get_double(m, "scene.room_height", c.room_height);
  c.min_extent = config_get_double(m, "scene.min_extent", c.min_extent);
  c.max_extent = config_get_double(m, "scene.max_extent", c.max_extent);
  c.noise_sigma = config_get_double(m, "scene.noise_sigma", c.noise_sigma);
  c.render_height = config_get_int(m, "render.height", c.render_height);
  c.render_width = config_get_int(m, "render.width", c.render_width);
  c.focal_scale = config_get_double(m, "render.focal_scale", c.focal_scale);
  c.trajectory = config_get_string(m, "trajectory.kind", c.trajectory);
  c.frame_count = config_get_int(m, "trajectory.frames", c.frame_count);
  c.orbit_radius = config_get_double(m, "trajectory.radius", c.orbit_radius);
  c.camera_height = config_get_double(m, "trajectory.height", c.camera_height);
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("config: train.epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: train.lr must be > 0");
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
    throw std::invalid_argument("config: train.heldout_fraction must be in (0, 1)");
}

TrainConfig TrainConfig::from_map(const ConfigMap& m) {
  TrainConfig c;
  c.epochs = config_get_int(m, "train.epochs", c.epochs);
  c.learning_rate = config_get_double(m, "train.lr", c.learning_rate);
  c.heldout_fraction = config_get_double(m, "train.heldout_fraction", c.heldout_fraction);
  c.balance = config_get_bool(m, "train.balance", c.balance);
  c.validate();
  return c;
}

ToolConfig ToolConfig::from_map(const ConfigMap& m) {
  static const std::set<std::string> known = {
      "features.dim",
      "culling.delta",
      "culling.max_distance",
      "index.cell_size",
      "instances.top_k",
      "instances.merge_threshold",
      "zones.size",
      "alignment.temperature",
      "rays.radius",
      "rays.max_range",
      "replay.staleness_epsilon",
      "discriminator.hidden",
      "discriminator.cos_threshold",
      "discriminator.cos_scale",
      "discriminator.dist_gate",
      "discriminator.dist_scale",
      "scene.objects",
      "scene.room_half_x",
      "scene.room_half_z",
      "scene.room_height",
      "scene.min_extent",
      "scene.max_extent",
      "scene.noise_sigma",
      "render.height",
      "render.width",
      "render.focal_scale",
      "trajectory.kind",
      "trajectory.frames",
      "trajectory.radius",
      "trajectory.height",
      "train.epochs",
      "train.lr",
      "train.heldout_fraction",
      "train.balance",
  };
  for (const auto& [key, value] : m) {
    (void)value;
    if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  ToolConfig c;
  c.engine = EngineConfig::from_map(m);
  c.sim = SimConfig::from_map(m);
  c.train = TrainConfig::from_map(m);
  return c;
}

ToolConfig ToolConfig::from_file(const std::string& path) {
  return from_map(parse_config_file(path));
}

}  // namespace scenemem
