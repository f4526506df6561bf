#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "scenemem/instance_layer.hpp"
#include "scenemem/patch_store.hpp"
#include "scenemem/zone_layer.hpp"

namespace scenemem {

// Panorama ray grid around the agent: 12 elevation rows by 48 azimuth
// columns. Row 0 is the top row (elevation +41.25 degrees), rows step down
// by 7.5 degrees; column 0 points directly behind the agent and columns
// advance clockwise by 7.5 degrees, so column 24 is straight ahead. Token
// index = row * 48 + column.
inline constexpr int kPanoramaRows = 12;
inline constexpr int kPanoramaCols = 48;
static_assert(kPanoramaRows * kPanoramaCols == kPatchCount);

// Unit agent-frame direction of ray (row, col); throws on out-of-range
// indices. Agent frame matches the camera frame: +z forward, +x right,
// +y down.
Vec3 panorama_direction(int row, int col);

// Geometric context of a world point as the agent sees it: agent-frame
// coordinates, Euclidean distance, and the horizontal bearing theta
// (0 = straight ahead, clockwise positive) as cos/sin. A point exactly at
// the agent keeps the convention theta = 0, so the feature is
// [0, 0, 0, 0, 1, 0].
struct RelPosFeature {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double distance = 0.0;
  double cos_theta = 1.0;
  double sin_theta = 0.0;

  std::array<float, 6> as_f32() const;
};

RelPosFeature relative_position_features(const Vec3& point_world, const Pose& agent);

// One panorama ray's rendering. Unresolved rays keep a zero feature, the
// degenerate at-agent RelPosFeature, and valid = false, so the 576-token
// layout never changes shape.
struct PatchToken {
  std::vector<float> feature;
  RelPosFeature rel;
  bool valid = false;
  PointId point_id = 0;  // 0 when invalid; not serialized
};

struct RayQueryConfig {
  double radius = 0.25;    // m, perpendicular capture distance
  double max_range = 10.0;  // m, along the ray
};

// Resolves every panorama ray against the store with ray_query and returns
// the 576 tokens row-major, row 0 first.
std::vector<PatchToken> render_patch_tokens(const PatchStore& store, const Pose& agent,
                                            const RayQueryConfig& cfg = {});

// Instance or zone entry in the prompt.
struct ContextToken {
  std::uint64_t id = 0;
  std::vector<float> feature;
  RelPosFeature rel;
};

// Tokens for every instance (positioned at its centroid), sorted by
// distance ascending, ties by id ascending.
std::vector<ContextToken> collect_instance_tokens(const InstanceTable& instances,
                                                  const Pose& agent);

// Tokens for every zone, positioned at the zone cube's center. Zone ids are
// ordinals in the table's key order, which is deterministic for a given set
// of zones. Same sort order as instances.
std::vector<ContextToken> collect_zone_tokens(const ZoneTable& zones, const Pose& agent);

// Discrete action grammar. Values live on a 0.1 grid; turns are degrees in
// (0, 180], forward distances are centimetres in (0, 500].
struct Action {
  enum class Kind { TurnLeft, TurnRight, Forward, Stop };

  Kind kind = Kind::Stop;
  double value = 0.0;  // unused for Stop

  friend bool operator==(const Action&, const Action&) = default;
};

// Canonical text forms: "Turn left {v} degree.", "Turn right {v} degree.",
// "Forward {v} cm.", "Stop.". Integral values print without a decimal
// point, everything else with exactly one decimal digit. Throws
// std::invalid_argument when the action violates its invariants.
std::string format_action(const Action& action);

// Strict inverse: accepts the four canonical forms with an integer or
// one-decimal number and rejects everything else (off-grammar output from
// the policy model is a protocol violation). format(parse(s)) canonicalises
// accepted spellings such as "25.0" -> "25".
Action parse_action(const std::string& text);

// Everything a policy model gets for one step. The text form is
//   <user><patches:576:valid=V><instances:N><zones:M>
//   <instruction:TEXT><history:H1|H2|H3|H4><end><assistant>
// (one line, no whitespace between markers); the numeric payload rides in
// the binary sidecar, not the text.
struct PromptPayload {
  std::vector<PatchToken> patches;       // exactly 576
  std::vector<ContextToken> instances;   // sorted by (distance, id)
  std::vector<ContextToken> zones;       // sorted by (distance, id)
  std::string instruction;
  std::array<std::string, 4> history;    // most recent last, "<none>" padded

  std::string text() const;
};

// Validates shapes, sorts the context tokens, formats and right-pads the
// history. Throws std::invalid_argument on a patch count other than 576,
// more than four history actions, or mixed feature dimensions.
PromptPayload build_prompt(std::vector<PatchToken> patches,
                           std::vector<ContextToken> instances,
                           std::vector<ContextToken> zones, std::string instruction,
                           const std::vector<Action>& history);

// Writes basename.txt (the exact template text), basename.json (counts and
// layout header), and basename.bin (per token: f32 feature vector, f32 x 6
// RelPosFeature, u8 validity; patches first, then instances, then zones).
void write_prompt_payload(const std::string& basename, const PromptPayload& payload);

}  // namespace scenemem
