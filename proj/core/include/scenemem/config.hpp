#pragma once

#include <map>
#include <string>

namespace scenemem {

// Flat "section.key" -> raw value map parsed from a TOML-style file.
// Supported subset: [section] headers, key = value lines, '#' comments,
// bare numbers, booleans, and double-quoted strings.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

double config_get_double(const ConfigMap& m, const std::string& key, double fallback);
int config_get_int(const ConfigMap& m, const std::string& key, int fallback);
bool config_get_bool(const ConfigMap& m, const std::string& key, bool fallback);
std::string config_get_string(const ConfigMap& m, const std::string& key,
                              const std::string& fallback);

struct HeuristicDiscriminatorParams {
  double cos_threshold = 0.75;
  double cos_scale = 10.0;
  double dist_gate = 1.0;   // metres before the distance penalty engages
  double dist_scale = 5.0;  // penalty per metre beyond the gate
};

// Runtime knobs for the map engine. Every tolerance that shapes engine
// behaviour lives here and can be loaded from a config file with
// per-flag overrides in the CLI.
struct EngineConfig {
  int feature_dim = 768;          // features.dim
  double cull_delta = 0.05;       // culling.delta (metres of depth slack)
  double cull_max_distance = 5.0; // culling.max_distance (far cull bound)
  double cell_size = 0.5;         // index.cell_size (voxel hash pitch)
  int merge_top_k = 5;            // instances.top_k
  double merge_threshold = 0.5;   // instances.merge_threshold
  double zone_size = 3.0;         // zones.size (cubic zone edge)
  double temperature = 0.07;      // alignment.temperature
  double ray_radius = 0.25;       // rays.radius
  double ray_max_range = 10.0;    // rays.max_range
  double staleness_epsilon = 0.5; // replay.staleness_epsilon
  int discriminator_hidden = 32;  // discriminator.hidden
  HeuristicDiscriminatorParams heuristic;

  void validate() const;  // throws std::invalid_argument
  static EngineConfig from_map(const ConfigMap& m);
};

// Synthetic scene + rendering defaults consumed by gen-scene and the
// built-in benchmark workload.
struct SimConfig {
  int object_count = 6;        // scene.objects
  double room_half_x = 4.0;    // scene.room_half_x (metres)
  double room_half_z = 4.0;    // scene.room_half_z
  double room_height = 2.5;    // scene.room_height (objects span y in [-h, 0])
  double min_extent = 0.25;    // scene.min_extent
  double max_extent = 0.8;     // scene.max_extent
  double noise_sigma = 0.05;   // scene.noise_sigma (feature noise)
  int render_height = 224;     // render.height
  int render_width = 224;      // render.width
  double focal_scale = 1.0;    // render.focal_scale (fx = fy = scale * width)
  std::string trajectory = "orbit";  // trajectory.kind: orbit | lawnmower | survey
  int frame_count = 60;        // trajectory.frames
  double orbit_radius = 3.0;   // trajectory.radius
  double camera_height = 1.4;  // trajectory.height above the floor

  void validate() const;
  static SimConfig from_map(const ConfigMap& m);
};

struct TrainConfig {
  int epochs = 300;            // train.epochs
  double learning_rate = 1.0;  // train.lr
  double heldout_fraction = 0.2;  // train.heldout_fraction
  bool balance = true;         // train.balance (equalise class counts)

  void validate() const;
  static TrainConfig from_map(const ConfigMap& m);
};

struct ToolConfig {
  EngineConfig engine;
  SimConfig sim;
  TrainConfig train;

  static ToolConfig from_map(const ConfigMap& m);  // rejects unknown keys
  static ToolConfig from_file(const std::string& path);
};

}  // namespace scenemem
