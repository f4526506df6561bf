#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenemem/config.hpp"
#include "scenemem/dataset_io.hpp"
#include "scenemem/discriminator.hpp"
#include "scenemem/engine.hpp"
#include "scenemem/instance_layer.hpp"
#include "scenemem/patch_store.hpp"
#include "scenemem/replay.hpp"
#include "scenemem/rng.hpp"
#include "scenemem/scene_sim.hpp"
#include "scenemem/token_assembly.hpp"
#include "scenemem/training.hpp"
#include "scenemem/verify.hpp"

namespace {

using namespace scenemem;

ToolConfig load_tool_config(const std::string& path) {
  return path.empty() ? ToolConfig{} : ToolConfig::from_file(path);
}

// stdout when no path is given, so commands compose in pipelines
void emit_text(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + out_path);
  f << text;
}

// "move:FRAME:ID:X,Y,Z" or "remove:FRAME:ID"
SceneEvent parse_event_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = spec.find(':', start);
    parts.push_back(spec.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  const auto fail = [&spec]() -> SceneEvent {
    throw std::invalid_argument(
        "bad event spec \"" + spec +
        "\" (want move:FRAME:ID:X,Y,Z or remove:FRAME:ID)");
  };
  try {
    SceneEvent ev;
    if (parts.size() == 4 && parts[0] == "move") {
      ev.kind = SceneEvent::Kind::Move;
      ev.frame = std::stoull(parts[1]);
      ev.object_id = std::stoi(parts[2]);
      const std::string& xyz = parts[3];
      const std::size_t c1 = xyz.find(',');
      const std::size_t c2 = xyz.find(',', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos) return fail();
      ev.new_center = Vec3(std::stod(xyz.substr(0, c1)), std::stod(xyz.substr(c1 + 1, c2 - c1 - 1)),
                           std::stod(xyz.substr(c2 + 1)));
      return ev;
    }
    if (parts.size() == 3 && parts[0] == "remove") {
      ev.kind = SceneEvent::Kind::Remove;
      ev.frame = std::stoull(parts[1]);
      ev.object_id = std::stoi(parts[2]);
      return ev;
    }
  } catch (const std::invalid_argument&) {
    return fail();
  } catch (const std::out_of_range&) {
    return fail();
  }
  return fail();
}

MapEngine make_engine(const EngineConfig& ec, const std::string& model_path) {
  auto aggregator = std::make_shared<MeanAggregator>(ec.feature_dim);
  std::shared_ptr<const MergingDiscriminator> discriminator;
  if (model_path.empty()) {
    discriminator = std::make_shared<OracleDiscriminator>();
  } else {
    auto net = std::make_shared<MlpDiscriminator>(MlpDiscriminator::load(model_path));
    if (net->feature_dim() != ec.feature_dim)
      throw std::runtime_error("model feature dimension " + std::to_string(net->feature_dim()) +
                               " does not match engine dimension " +
                               std::to_string(ec.feature_dim));
    discriminator = std::move(net);
  }
  return MapEngine(ec, std::move(aggregator), std::move(discriminator));
}

int run_gen_scene(const std::string& out_dir, const std::string& config_path, std::uint64_t seed,
                  const std::vector<std::string>& event_specs) {
  const ToolConfig tc = load_tool_config(config_path);
  const Scene scene = generate_scene(tc.sim, tc.engine.feature_dim, SeededRng::mix(seed, 1));

  std::vector<SceneEvent> events;
  for (const std::string& spec : event_specs) events.push_back(parse_event_spec(spec));

  const SimDataset dataset =
      events.empty() ? build_dataset(scene, tc.sim, SeededRng::mix(seed, 2))
                     : build_dynamic_dataset(scene, tc.sim, SeededRng::mix(seed, 2), events);

  std::filesystem::create_directories(out_dir);
  write_dataset(out_dir, dataset);
  // the pre-event scene; replay applies the recorded events itself
  write_scene((std::filesystem::path(out_dir) / "scene.json").string(), scene);

  nlohmann::json summary;
  summary["dir"] = out_dir;
  summary["frames"] = dataset.frames.size();
  summary["objects"] = scene.objects.size();
  summary["events"] = events.size();
  summary["seed"] = seed;
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_replay(const std::string& data_dir, const std::string& config_path,
               const std::string& model_path, const std::string& snapshot_in,
               const std::string& snapshot_out, bool timings, const std::string& out_path) {
  const ToolConfig tc = load_tool_config(config_path);
  const SimDataset dataset = load_dataset(data_dir);

  std::optional<Scene> scene;
  const auto scene_path = std::filesystem::path(data_dir) / "scene.json";
  if (std::filesystem::exists(scene_path)) scene = load_scene(scene_path.string());

  MapEngine engine = make_engine(tc.engine, model_path);
  if (!snapshot_in.empty()) engine.load_snapshot(snapshot_in);

  const ReplayReport report = replay_dataset(engine, dataset, scene ? &*scene : nullptr);
  if (!snapshot_out.empty()) engine.save_snapshot(snapshot_out);

  emit_text(replay_report_json(report, timings), out_path);
  return 0;
}

int run_verify(const std::string& config_path, std::uint64_t seed, bool inject_fault,
               const std::string& out_path) {
  const ToolConfig tc = load_tool_config(config_path);
  const VerifyReport report = run_verify_suites(tc.engine, seed, inject_fault);
  emit_text(verify_report_json(report), out_path);
  return report.passed ? 0 : 1;
}

int run_bench(const std::string& config_path, std::uint64_t seed, std::size_t target_points,
              const std::string& out_path) {
  const ToolConfig tc = load_tool_config(config_path);
  const Scene scene = generate_scene(tc.sim, tc.engine.feature_dim, SeededRng::mix(seed, 1));
  const SimDataset dataset = build_dataset(scene, tc.sim, SeededRng::mix(seed, 2));

  MapEngine engine = make_engine(tc.engine, "");
  for (const ObservationFrame& frame : dataset.frames) engine.integrate(frame);

  // Pad the map to the target live size with points behind the room shell:
  // they stay in the index (and in every frustum scan) but are never
  // culled, which is exactly how stale geometry from other rooms behaves.
  {
    SeededRng rng(SeededRng::mix(seed, 3));
    const int dim = tc.engine.feature_dim;
    std::size_t live = engine.store().size();
    std::size_t k = 0;
    while (live < target_points) {
      FeaturePoint p;
      p.feature.assign(static_cast<std::size_t>(dim), 0.0f);
      p.feature[k++ % static_cast<std::size_t>(dim)] = 1.0f;
      const double side = (k % 2 == 0) ? 1.0 : -1.0;
      p.position = Vec3(side * rng.uniform(tc.sim.room_half_x + 1.0, tc.sim.room_half_x + 6.0),
                        rng.uniform(-tc.sim.room_height, 0.0),
                        rng.uniform(-tc.sim.room_half_z - 6.0, tc.sim.room_half_z + 6.0));
      p.size = 0.05;
      engine.preload_point(std::move(p));
      ++live;
    }
  }

  const std::size_t live_at_start = engine.store().size();
  std::vector<double> frame_ms;
  FrameStats last{};
  for (const ObservationFrame& frame : dataset.frames) {
    last = engine.integrate(frame);
    frame_ms.push_back(frame_total_ms(last));
  }

  double total = 0.0;
  for (double v : frame_ms) total += v;
  nlohmann::json doc;
  doc["format"] = "scenemem-bench-report";
  doc["version"] = 1;
  doc["live_points_at_start"] = live_at_start;
  doc["live_points_at_end"] = engine.store().size();
  doc["frames"] = frame_ms.size();
  doc["p50_ms"] = percentile(frame_ms, 0.50);
  doc["p95_ms"] = percentile(frame_ms, 0.95);
  doc["max_ms"] = *std::max_element(frame_ms.begin(), frame_ms.end());
  doc["mean_ms"] = total / static_cast<double>(frame_ms.size());
  emit_text(doc.dump(2) + "\n", out_path);
  return 0;
}

int run_train(const std::string& data_dir, const std::string& config_path, std::uint64_t seed,
              const std::string& model_out, const std::string& out_path) {
  const ToolConfig tc = load_tool_config(config_path);
  const SimDataset dataset = load_dataset(data_dir);
  const TrainOutcome outcome = train_discriminator(dataset, tc.engine, tc.train, seed);
  if (!model_out.empty()) outcome.model.save(model_out);

  nlohmann::json doc;
  doc["format"] = "scenemem-train-report";
  doc["version"] = 1;
  doc["harvested_pairs"] = outcome.harvested_pairs;
  doc["train_pairs"] = outcome.train_pairs;
  doc["heldout_pairs"] = outcome.heldout_pairs;
  doc["final_loss"] = outcome.final_loss;
  doc["train_accuracy"] = outcome.train_accuracy;
  doc["heldout_accuracy"] = outcome.heldout_accuracy;
  if (!model_out.empty()) doc["model"] = model_out;
  emit_text(doc.dump(2) + "\n", out_path);
  return 0;
}

int run_emit_prompt(const std::string& data_dir, const std::string& config_path,
                    const std::string& model_path, const std::string& snapshot_in, int frame_index,
                    const std::string& instruction, const std::vector<std::string>& history_text,
                    const std::string& out_base) {
  const ToolConfig tc = load_tool_config(config_path);
  const SimDataset dataset = load_dataset(data_dir);
  if (dataset.frames.empty()) throw std::runtime_error("dataset has no frames");
  const int last = static_cast<int>(dataset.frames.size()) - 1;
  const int k = frame_index < 0 ? last : frame_index;
  if (k > last)
    throw std::runtime_error("frame index " + std::to_string(k) + " past the last frame " +
                             std::to_string(last));

  MapEngine engine = make_engine(tc.engine, model_path);
  if (!snapshot_in.empty()) {
    engine.load_snapshot(snapshot_in);
  } else {
    for (int i = 0; i <= k; ++i) engine.integrate(dataset.frames[static_cast<std::size_t>(i)]);
  }

  const Pose& agent = dataset.frames[static_cast<std::size_t>(k)].pose;
  RayQueryConfig ray;
  ray.radius = tc.engine.ray_radius;
  ray.max_range = tc.engine.ray_max_range;

  std::vector<Action> history;
  for (const std::string& text : history_text) history.push_back(parse_action(text));

  const PromptPayload payload =
      build_prompt(render_patch_tokens(engine.store(), agent, ray),
                   collect_instance_tokens(engine.instances(), agent),
                   collect_zone_tokens(engine.zones(), agent), instruction, history);
  write_prompt_payload(out_base, payload);
  std::cout << payload.text() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenemem: hierarchical 3D scene memory engine"};
  app.require_subcommand(1);

  // gen-scene
  std::string gen_out, gen_config;
  std::uint64_t gen_seed = 42;
  std::vector<std::string> gen_events;
  auto* gen = app.add_subcommand("gen-scene", "Generate a synthetic scene and rendered dataset");
  gen->add_option("--out", gen_out, "dataset output directory")->required();
  gen->add_option("--config", gen_config, "key = value config file");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--event", gen_events,
                  "dynamic event, move:FRAME:ID:X,Y,Z or remove:FRAME:ID (repeatable)");

  // replay
  std::string rp_data, rp_config, rp_model, rp_snap_in, rp_snap_out, rp_out;
  bool rp_timings = false;
  auto* rp = app.add_subcommand("replay", "Integrate a dataset into the map and report");
  rp->add_option("--data", rp_data, "dataset directory from gen-scene")->required();
  rp->add_option("--config", rp_config, "key = value config file");
  rp->add_option("--model", rp_model, "trained discriminator (default: ground-truth oracle)");
  rp->add_option("--snapshot-in", rp_snap_in, "resume from a map snapshot");
  rp->add_option("--snapshot-out", rp_snap_out, "write the final map snapshot");
  rp->add_flag("--timings", rp_timings, "include per-frame timings in the report");
  rp->add_option("--out", rp_out, "report path (default: stdout)");

  // verify
  std::string vf_config, vf_out;
  std::uint64_t vf_seed = 42;
  bool vf_fault = false;
  auto* vf = app.add_subcommand("verify", "Run the built-in consistency suites");
  vf->add_option("--config", vf_config, "key = value config file");
  vf->add_option("--seed", vf_seed, "suite seed");
  vf->add_flag("--inject-fault", vf_fault,
               "flip the reference cull inequality; the run must then fail");
  vf->add_option("--out", vf_out, "report path (default: stdout)");

  // bench
  std::string bn_config, bn_out;
  std::uint64_t bn_seed = 42;
  std::size_t bn_points = 50000;
  auto* bn = app.add_subcommand("bench", "Measure per-frame integration latency");
  bn->add_option("--config", bn_config, "key = value config file");
  bn->add_option("--seed", bn_seed, "workload seed");
  bn->add_option("--points", bn_points, "live map size to measure at");
  bn->add_option("--out", bn_out, "report path (default: stdout)");

  // train
  std::string tr_data, tr_config, tr_model_out, tr_out;
  std::uint64_t tr_seed = 42;
  auto* tr = app.add_subcommand("train", "Train the merge discriminator on a replay harvest");
  tr->add_option("--data", tr_data, "dataset directory with ground-truth masks")->required();
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--seed", tr_seed, "shuffle and init seed");
  tr->add_option("--model-out", tr_model_out, "trained model path");
  tr->add_option("--out", tr_out, "report path (default: stdout)");

  // emit-prompt
  std::string ep_data, ep_config, ep_model, ep_snap_in, ep_out, ep_instruction = "Explore the room.";
  std::vector<std::string> ep_history;
  int ep_frame = -1;
  auto* ep = app.add_subcommand("emit-prompt", "Assemble the policy prompt at a frame");
  ep->add_option("--data", ep_data, "dataset directory")->required();
  ep->add_option("--config", ep_config, "key = value config file");
  ep->add_option("--model", ep_model, "trained discriminator for the replay");
  ep->add_option("--snapshot-in", ep_snap_in, "use this map instead of replaying");
  ep->add_option("--frame", ep_frame, "agent frame index (default: last)");
  ep->add_option("--instruction", ep_instruction, "navigation instruction text");
  ep->add_option("--history", ep_history, "previous action in canonical text (repeatable, max 4)");
  ep->add_option("--out", ep_out, "prompt basename (.txt/.json/.bin)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen_scene(gen_out, gen_config, gen_seed, gen_events);
    if (*rp)
      return run_replay(rp_data, rp_config, rp_model, rp_snap_in, rp_snap_out, rp_timings, rp_out);
    if (*vf) return run_verify(vf_config, vf_seed, vf_fault, vf_out);
    if (*bn) return run_bench(bn_config, bn_seed, bn_points, bn_out);
    if (*tr) return run_train(tr_data, tr_config, tr_seed, tr_model_out, tr_out);
    if (*ep)
      return run_emit_prompt(ep_data, ep_config, ep_model, ep_snap_in, ep_frame, ep_instruction,
                             ep_history, ep_out);
  } catch (const std::exception& e) {
    std::cerr << "scenemem: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
