#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenemem/engine.hpp"
#include "scenemem/scene_sim.hpp"

namespace scenemem {

// Everything a replay run produces: the per-frame pipeline counts and
// timings, the final map summary, and (when ground truth was supplied) a
// per-frame staleness series. Counts reconcile: the final point total
// equals the sum of added minus the sum of culled.
struct ReplayReport {
  std::vector<FrameStats> frames;
  // Instances whose centroid lies farther than the configured epsilon from
  // the ground-truth object of their majority id, evaluated after each
  // frame against the scene as mutated by the dataset's events so far.
  // Empty when no scene was supplied.
  std::vector<int> stale_per_frame;
  std::size_t final_points = 0;
  std::size_t final_instances = 0;
  std::size_t final_zones = 0;
  std::uint64_t map_hash = 0;
  int stale_instances = -1;  // final frame's stale count, -1 when unevaluated
  double total_ms = 0.0;
};

// Sum of the four stage timings of one frame.
double frame_total_ms(const FrameStats& stats);

// Nearest-rank percentile (q in (0, 1]) of the given samples.
// Throws std::invalid_argument on an empty sample set or q out of range.
double percentile(std::vector<double> samples, double q);

// Integrates every frame of the dataset in order. When initial_scene is
// non-null the scene is copied, the dataset's events are applied before
// the frame whose position they name (the same timing the simulator used),
// and staleness is measured after every frame with the engine's
// staleness_epsilon. An instance counts as stale when its majority-id
// object is absent from the current scene or its centroid sits farther
// than epsilon from that object's extent.
ReplayReport replay_dataset(MapEngine& engine, const SimDataset& dataset,
                            const Scene* initial_scene = nullptr);

// Serializes a report as indented JSON. Timings are only included when
// requested so that default reports are byte-stable across runs.
std::string replay_report_json(const ReplayReport& report, bool include_timings = false);

}  // namespace scenemem
