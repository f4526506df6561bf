#include "scenemem/token_assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "binary_io.hpp"

namespace scenemem {
namespace {

constexpr double kDegStep = 7.5;
constexpr double kTopElevationDeg = 41.25;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

void sort_context_tokens(std::vector<ContextToken>& tokens) {
  std::sort(tokens.begin(), tokens.end(), [](const ContextToken& a, const ContextToken& b) {
    if (a.rel.distance != b.rel.distance) return a.rel.distance < b.rel.distance;
    return a.id < b.id;
  });
}

std::string format_value(double v) {
  char buf[32];
  if (std::abs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(v)));
  else
    std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// NUMBER := [0-9]+ ('.' [0-9])?  parsed exactly from digits
bool parse_number(const std::string& s, std::size_t& pos, double& out) {
  const std::size_t start = pos;
  double whole = 0.0;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
    whole = whole * 10.0 + (s[pos] - '0');
    ++pos;
  }
  if (pos == start) return false;
  out = whole;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    if (pos >= s.size() || s[pos] < '0' || s[pos] > '9') return false;
    out += (s[pos] - '0') / 10.0;
    ++pos;
    if (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') return false;  // one decimal only
  }
  return true;
}

bool consume(const std::string& s, std::size_t& pos, const char* literal) {
  const std::size_t len = std::char_traits<char>::length(literal);
  if (s.compare(pos, len, literal) != 0) return false;
  pos += len;
  return true;
}

[[noreturn]] void reject(const std::string& text) {
  throw std::invalid_argument("parse_action: off-grammar action text: \"" + text + "\"");
}

void check_grid_and_range(double v, double hi, const char* what) {
  if (!(v > 0.0) || v > hi)
    throw std::invalid_argument(std::string("action ") + what + " out of range");
  if (std::abs(v * 10.0 - std::round(v * 10.0)) > 1e-6)
    throw std::invalid_argument(std::string("action ") + what + " is finer than the 0.1 grid");
}

}  // namespace

Vec3 panorama_direction(int row, int col) {
  if (row < 0 || row >= kPanoramaRows || col < 0 || col >= kPanoramaCols)
    throw std::invalid_argument("panorama_direction: index out of range");
  const double elev = deg2rad(kTopElevationDeg - kDegStep * row);
  const double az = deg2rad(180.0 + kDegStep * col);
  const double ce = std::cos(elev);
  return Vec3(ce * std::sin(az), -std::sin(elev), ce * std::cos(az));
}

std::array<float, 6> RelPosFeature::as_f32() const {
  return {static_cast<float>(x),        static_cast<float>(y),
          static_cast<float>(z),        static_cast<float>(distance),
          static_cast<float>(cos_theta), static_cast<float>(sin_theta)};
}

RelPosFeature relative_position_features(const Vec3& point_world, const Pose& agent) {
  const Vec3 pc = agent.to_camera(point_world);
  RelPosFeature rel;
  rel.x = pc.x();
  rel.y = pc.y();
  rel.z = pc.z();
  rel.distance = pc.norm();
  // atan2(0, 0) = 0, which realises the at-agent convention theta = 0
  const double theta = std::atan2(pc.x(), pc.z());
  rel.cos_theta = std::cos(theta);
  rel.sin_theta = std::sin(theta);
  return rel;
}

std::vector<PatchToken> render_patch_tokens(const PatchStore& store, const Pose& agent,
                                            const RayQueryConfig& cfg) {
  if (!(cfg.radius > 0.0) || !(cfg.max_range > 0.0))
    throw std::invalid_argument("render_patch_tokens: radius and max_range must be > 0");
  const Mat3 to_world = agent.rotation().transpose();
  const Vec3 origin = agent.camera_center();

  std::vector<PatchToken> tokens;
  tokens.reserve(static_cast<std::size_t>(kPatchCount));
  for (int row = 0; row < kPanoramaRows; ++row) {
    for (int col = 0; col < kPanoramaCols; ++col) {
      const Vec3 dir = to_world * panorama_direction(row, col);
      PatchToken token;
      if (const auto hit = store.ray_query(origin, dir, cfg.radius, cfg.max_range)) {
        token.feature = hit->point->feature;
        token.rel = relative_position_features(hit->point->position, agent);
        token.valid = true;
        token.point_id = hit->id;
      } else {
        token.feature.assign(static_cast<std::size_t>(store.feature_dim()), 0.0f);
      }
      tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

std::vector<ContextToken> collect_instance_tokens(const InstanceTable& instances,
                                                  const Pose& agent) {
  std::vector<ContextToken> tokens;
  tokens.reserve(instances.size());
  for (const InstanceId id : instances.all_ids_sorted()) {
    const InstanceRecord* rec = instances.find(id);
    ContextToken t;
    t.id = id;
    t.feature = rec->feature;
    t.rel = relative_position_features(rec->centroid, agent);
    tokens.push_back(std::move(t));
  }
  sort_context_tokens(tokens);
  return tokens;
}

std::vector<ContextToken> collect_zone_tokens(const ZoneTable& zones, const Pose& agent) {
  std::vector<ContextToken> tokens;
  tokens.reserve(zones.size());
  const double s = zones.zone_size();
  std::uint64_t ordinal = 0;
  for (const auto& [key, rec] : zones.zones()) {
    ContextToken t;
    t.id = ordinal++;
    t.feature = rec.feature;
    t.rel = relative_position_features(
        Vec3((key.x + 0.5) * s, (key.y + 0.5) * s, (key.z + 0.5) * s), agent);
    tokens.push_back(std::move(t));
  }
  sort_context_tokens(tokens);
  return tokens;
}

std::string format_action(const Action& action) {
  switch (action.kind) {
    case Action::Kind::Stop:
      return "Stop.";
    case Action::Kind::TurnLeft:
      check_grid_and_range(action.value, 180.0, "turn angle");
      return "Turn left " + format_value(action.value) + " degree.";
    case Action::Kind::TurnRight:
      check_grid_and_range(action.value, 180.0, "turn angle");
      return "Turn right " + format_value(action.value) + " degree.";
    case Action::Kind::Forward:
      check_grid_and_range(action.value, 500.0, "distance");
      return "Forward " + format_value(action.value) + " cm.";
  }
  throw std::invalid_argument("format_action: unknown action kind");
}

Action parse_action(const std::string& text) {
  if (text == "Stop.") return Action{Action::Kind::Stop, 0.0};

  std::size_t pos = 0;
  Action a;
  const char* tail = nullptr;
  double hi = 0.0;
  const char* what = nullptr;
  if (consume(text, pos, "Turn left ")) {
    a.kind = Action::Kind::TurnLeft;
    tail = " degree.";
    hi = 180.0;
    what = "turn angle";
  } else if (consume(text, pos, "Turn right ")) {
    a.kind = Action::Kind::TurnRight;
    tail = " degree.";
    hi = 180.0;
    what = "turn angle";
  } else if (consume(text, pos, "Forward ")) {
    a.kind = Action::Kind::Forward;
    tail = " cm.";
    hi = 500.0;
    what = "distance";
  } else {
    reject(text);
  }

  if (!parse_number(text, pos, a.value)) reject(text);
  if (!consume(text, pos, tail) || pos != text.size()) reject(text);
  check_grid_and_range(a.value, hi, what);
  return a;
}

std::string PromptPayload::text() const {
  std::size_t valid = 0;
  for (const auto& t : patches) valid += t.valid ? 1 : 0;
  std::string out = "<user>";
  out += "<patches:" + std::to_string(patches.size()) + ":valid=" + std::to_string(valid) + ">";
  out += "<instances:" + std::to_string(instances.size()) + ">";
  out += "<zones:" + std::to_string(zones.size()) + ">";
  out += "<instruction:" + instruction + ">";
  out += "<history:" + history[0] + "|" + history[1] + "|" + history[2] + "|" + history[3] + ">";
  out += "<end><assistant>";
  return out;
}

PromptPayload build_prompt(std::vector<PatchToken> patches,
                           std::vector<ContextToken> instances,
                           std::vector<ContextToken> zones, std::string instruction,
                           const std::vector<Action>& history) {
  if (patches.size() != static_cast<std::size_t>(kPatchCount))
    throw std::invalid_argument("build_prompt: expected " + std::to_string(kPatchCount) +
                                " patch tokens, got " + std::to_string(patches.size()));
  if (history.size() > 4)
    throw std::invalid_argument("build_prompt: history holds at most 4 actions");

  const std::size_t dim = patches.front().feature.size();
  for (const auto& t : patches)
    if (t.feature.size() != dim)
      throw std::invalid_argument("build_prompt: mixed patch feature dimensions");
  for (const auto& t : instances)
    if (t.feature.size() != dim)
      throw std::invalid_argument("build_prompt: instance feature dimension mismatch");
  for (const auto& t : zones)
    if (t.feature.size() != dim)
      throw std::invalid_argument("build_prompt: zone feature dimension mismatch");

  PromptPayload p;
  p.patches = std::move(patches);
  p.instances = std::move(instances);
  p.zones = std::move(zones);
  p.instruction = std::move(instruction);
  sort_context_tokens(p.instances);
  sort_context_tokens(p.zones);
  for (std::size_t i = 0; i < 4; ++i)
    p.history[i] = i < history.size() ? format_action(history[i]) : "<none>";
  return p;
}

void write_prompt_payload(const std::string& basename, const PromptPayload& payload) {
  if (payload.patches.size() != static_cast<std::size_t>(kPatchCount))
    throw std::invalid_argument("write_prompt_payload: payload not built by build_prompt");
  const std::size_t dim = payload.patches.front().feature.size();

  {
    std::ofstream os(basename + ".txt", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + basename + ".txt");
    os << payload.text();
  }

  std::size_t valid = 0;
  for (const auto& t : payload.patches) valid += t.valid ? 1 : 0;
  nlohmann::json header;
  header["format"] = "scenemem-prompt";
  header["version"] = 1;
  header["feature_dim"] = dim;
  header["patch_tokens"] = payload.patches.size();
  header["valid_patch_tokens"] = valid;
  header["instance_tokens"] = payload.instances.size();
  header["zone_tokens"] = payload.zones.size();
  header["bytes_per_token"] = dim * 4 + 6 * 4 + 1;
  {
    std::ofstream os(basename + ".json", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + basename + ".json");
    os << header.dump(2) << '\n';
  }

  std::ofstream os(basename + ".bin", std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + basename + ".bin");
  const auto put = [&](const std::vector<float>& feature, const RelPosFeature& rel,
                       bool is_valid) {
    if (feature.size() != dim)
      throw std::invalid_argument("write_prompt_payload: mixed feature dimensions");
    detail::write_array(os, feature.data(), feature.size());
    const auto rel32 = rel.as_f32();
    detail::write_array(os, rel32.data(), rel32.size());
    detail::write_pod(os, static_cast<std::uint8_t>(is_valid ? 1 : 0));
  };
  for (const auto& t : payload.patches) put(t.feature, t.rel, t.valid);
  for (const auto& t : payload.instances) put(t.feature, t.rel, true);
  for (const auto& t : payload.zones) put(t.feature, t.rel, true);
  if (!os) throw std::runtime_error("write failed: " + basename + ".bin");
}

}  // namespace scenemem
