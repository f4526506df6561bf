#include "scenemem/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <json.hpp>

#include "scenemem/alignment.hpp"
#include "scenemem/discriminator.hpp"
#include "scenemem/engine.hpp"
#include "scenemem/geometry.hpp"
#include "scenemem/instance_layer.hpp"
#include "scenemem/patch_store.hpp"
#include "scenemem/rng.hpp"
#include "scenemem/scene_sim.hpp"
#include "scenemem/token_assembly.hpp"
#include "scenemem/zone_layer.hpp"

namespace scenemem {
namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// cull_equality: the indexed cull query against a brute-force scan that
// redoes the projection arithmetic locally (rotate, divide, round, clamp)
// instead of calling the shared geometry helpers. `flip` inverts the
// distance inequality here, in the reference only.

bool reference_cull(const Vec3& world, const ObservationFrame& f, double delta,
                    double max_distance, bool flip) {
  const Eigen::Matrix3d rot = f.pose.rotation();
  const Vec3 pc = rot * world + f.pose.translation();
  const double z = pc.z();
  if (!(z > 0.0)) return false;
  const double u = f.intrinsics.fy * pc.y() / z + f.intrinsics.cy;
  const double v = f.intrinsics.fx * pc.x() / z + f.intrinsics.cx;
  if (!(u > 0.0 && u < static_cast<double>(f.intrinsics.height))) return false;
  if (!(v > 0.0 && v < static_cast<double>(f.intrinsics.width))) return false;
  const int row = std::clamp(static_cast<int>(std::lround(u)), 0, f.intrinsics.height - 1);
  const int col = std::clamp(static_cast<int>(std::lround(v)), 0, f.intrinsics.width - 1);
  const float d = f.depth[static_cast<std::size_t>(row) * static_cast<std::size_t>(f.intrinsics.width) +
                          static_cast<std::size_t>(col)];
  double bound = max_distance;
  if (std::isfinite(d) && d > 0.0f) bound = std::min(bound, static_cast<double>(d) + delta);
  return flip ? z >= bound : z < bound;
}

VerifySuiteResult check_cull_equality(const EngineConfig& cfg, std::uint64_t seed, bool flip) {
  VerifySuiteResult out{"cull_equality", false, ""};

  const int kDim = 8;
  SimConfig sim;
  sim.object_count = 5;
  sim.render_height = 96;
  sim.render_width = 96;
  sim.frame_count = 10;
  sim.noise_sigma = 0.02;
  const Scene scene = generate_scene(sim, kDim, SeededRng::mix(seed, 0xc1));
  const SimDataset ds = build_dataset(scene, sim, SeededRng::mix(seed, 0xc2));

  PatchStore store(cfg.cell_size, kDim);
  SeededRng rng(SeededRng::mix(seed, 0xc3));
  const int kPoints = 20000;
  for (int i = 0; i < kPoints; ++i) {
    FeaturePoint p;
    p.feature.assign(kDim, 0.0f);
    p.feature[static_cast<std::size_t>(i % kDim)] = 1.0f;
    p.position = Vec3(rng.uniform(-sim.room_half_x, sim.room_half_x),
                      rng.uniform(-sim.room_height, 0.5),
                      rng.uniform(-sim.room_half_z, sim.room_half_z));
    p.size = 0.05;
    store.insert_point(std::move(p));
  }

  const std::vector<PointId> ids = store.all_ids_sorted();
  std::size_t flagged = 0;
  for (const ObservationFrame& f : ds.frames) {
    std::vector<PointId> impl = store.cull_candidates(f.depth_view(), f.pose, f.intrinsics,
                                                      cfg.cull_delta, cfg.cull_max_distance);
    std::sort(impl.begin(), impl.end());
    std::vector<PointId> ref;
    for (PointId id : ids) {
      const FeaturePoint* p = store.find(id);
      if (reference_cull(p->position, f, cfg.cull_delta, cfg.cull_max_distance, flip))
        ref.push_back(id);
    }
    if (impl != ref) {
      std::ostringstream os;
      os << "frame " << f.frame_id << ": indexed query flags " << impl.size()
         << " points, brute-force scan flags " << ref.size();
      for (std::size_t i = 0; i < std::max(impl.size(), ref.size()); ++i) {
        const bool same = i < impl.size() && i < ref.size() && impl[i] == ref[i];
        if (!same) {
          os << ", first divergence at rank " << i;
          break;
        }
      }
      out.detail = os.str();
      return out;
    }
    flagged += ref.size();
  }

  std::ostringstream os;
  os << ds.frames.size() << " frames x " << kPoints << " points, id sets identical, " << flagged
     << " total flags";
  out.passed = true;
  out.detail = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// replay_idempotence: integrating the same observation twice must leave the
// point multiset unchanged. Rows carry everything except the owner instance
// (merge routing may legitimately differ on the refresh pass).

VerifySuiteResult check_replay_idempotence(const EngineConfig& cfg, std::uint64_t seed) {
  VerifySuiteResult out{"replay_idempotence", false, ""};

  const int kDim = 16;
  EngineConfig ec = cfg;
  ec.feature_dim = kDim;
  ec.validate();

  SimConfig sim;
  sim.object_count = 6;
  sim.render_height = 96;
  sim.render_width = 96;
  sim.frame_count = 12;
  sim.noise_sigma = 0.02;
  const Scene scene = generate_scene(sim, kDim, SeededRng::mix(seed, 0x1d1));
  const SimDataset ds = build_dataset(scene, sim, SeededRng::mix(seed, 0x1d2));

  MapEngine engine(ec, std::make_shared<MeanAggregator>(kDim),
                   std::make_shared<OracleDiscriminator>());

  using Row = std::vector<double>;
  const auto collect = [&engine]() {
    std::vector<Row> rows;
    const PatchStore& store = engine.store();
    for (PointId id : store.all_ids_sorted()) {
      const FeaturePoint* p = store.find(id);
      Row r;
      r.reserve(8 + p->feature.size());
      r.push_back(p->position.x());
      r.push_back(p->position.y());
      r.push_back(p->position.z());
      r.push_back(p->heading);
      r.push_back(p->size);
      r.push_back(static_cast<double>(p->frame_id));
      r.push_back(static_cast<double>(p->patch_index));
      r.push_back(p->gt_instance_id ? static_cast<double>(*p->gt_instance_id) : -1.0);
      for (float v : p->feature) r.push_back(static_cast<double>(v));
      rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };

  const double kTol = 1e-9;
  double worst = 0.0;
  int cases = 0;
  for (const ObservationFrame& frame : ds.frames) {
    engine.integrate(frame);
    const std::vector<Row> before = collect();
    engine.integrate(frame);
    const std::vector<Row> after = collect();
    if (before.size() != after.size()) {
      std::ostringstream os;
      os << "frame " << frame.frame_id << ": live point count " << before.size() << " -> "
         << after.size() << " after re-integration";
      out.detail = os.str();
      return out;
    }
    for (std::size_t i = 0; i < before.size(); ++i) {
      for (std::size_t j = 0; j < before[i].size(); ++j) {
        const double err = std::abs(before[i][j] - after[i][j]);
        worst = std::max(worst, err);
        if (err > kTol) {
          std::ostringstream os;
          os << "frame " << frame.frame_id << ": sorted point row " << i << " component " << j
             << " moved by " << fmt_double(err);
          out.detail = os.str();
          return out;
        }
      }
    }
    ++cases;
  }

  std::ostringstream os;
  os << cases << " double-integration cases, max multiset drift " << fmt_double(worst)
     << " (tol 1e-9)";
  out.passed = true;
  out.detail = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// incremental_equals_rebuild: after a dynamic replay (one move, one
// removal), every instance feature must equal a hand-rolled normalised mean
// of its members, every centroid the member mean, and the zone table must
// match both a hand-rolled pooling and a from-scratch rebuild.

VerifySuiteResult check_incremental_equals_rebuild(const EngineConfig& cfg, std::uint64_t seed) {
  VerifySuiteResult out{"incremental_equals_rebuild", false, ""};

  const int kDim = 16;
  EngineConfig ec = cfg;
  ec.feature_dim = kDim;
  ec.validate();

  SimConfig sim;
  sim.object_count = 6;
  sim.render_height = 96;
  sim.render_width = 96;
  sim.frame_count = 20;
  sim.noise_sigma = 0.02;
  Scene scene = generate_scene(sim, kDim, SeededRng::mix(seed, 0x4e1));

  std::vector<SceneEvent> events;
  {
    SceneEvent move;
    move.frame = 8;
    move.kind = SceneEvent::Kind::Move;
    move.object_id = scene.objects.front().id;
    move.new_center = Vec3(-sim.room_half_x * 0.5, -0.4, sim.room_half_z * 0.5);
    events.push_back(move);
    SceneEvent remove;
    remove.frame = 14;
    remove.kind = SceneEvent::Kind::Remove;
    remove.object_id = scene.objects.back().id;
    events.push_back(remove);
  }
  const SimDataset ds =
      build_dynamic_dataset(scene, sim, SeededRng::mix(seed, 0x4e2), std::move(events));

  const auto aggregator = std::make_shared<MeanAggregator>(kDim);
  MapEngine engine(ec, aggregator, std::make_shared<OracleDiscriminator>());
  for (const ObservationFrame& frame : ds.frames) engine.integrate(frame);

  const double kFeatTol = 1e-6;
  const double kGeoTol = 1e-9;
  double worst_feat = 0.0;
  double worst_geo = 0.0;

  const auto normalised_mean = [kDim](const std::vector<const std::vector<float>*>& feats) {
    std::vector<double> acc(static_cast<std::size_t>(kDim), 0.0);
    for (const auto* f : feats)
      for (int d = 0; d < kDim; ++d) acc[static_cast<std::size_t>(d)] += (*f)[static_cast<std::size_t>(d)];
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    std::vector<float> outv(static_cast<std::size_t>(kDim), 0.0f);
    if (norm > 0.0)
      for (int d = 0; d < kDim; ++d)
        outv[static_cast<std::size_t>(d)] = static_cast<float>(acc[static_cast<std::size_t>(d)] / norm);
    return outv;
  };

  const PatchStore& store = engine.store();
  const InstanceTable& instances = engine.instances();
  std::size_t checked_instances = 0;
  for (InstanceId id : instances.all_ids_sorted()) {
    const InstanceRecord* rec = instances.find(id);
    if (rec->members.empty()) {
      out.detail = "instance " + std::to_string(id) + " has no members";
      return out;
    }
    std::vector<const std::vector<float>*> feats;
    Vec3 centroid = Vec3::Zero();
    for (PointId pid : rec->members) {
      const FeaturePoint* p = store.find(pid);
      if (p == nullptr) {
        out.detail = "instance " + std::to_string(id) + " references missing point " +
                     std::to_string(pid);
        return out;
      }
      feats.push_back(&p->feature);
      centroid += p->position;
    }
    centroid /= static_cast<double>(rec->members.size());
    const std::vector<float> expect = normalised_mean(feats);
    for (int d = 0; d < kDim; ++d) {
      const double err = std::abs(static_cast<double>(expect[static_cast<std::size_t>(d)]) -
                                  static_cast<double>(rec->feature[static_cast<std::size_t>(d)]));
      worst_feat = std::max(worst_feat, err);
      if (err > kFeatTol) {
        out.detail = "instance " + std::to_string(id) + " feature[" + std::to_string(d) +
                     "] off re-aggregation by " + fmt_double(err);
        return out;
      }
    }
    const double cerr = (centroid - rec->centroid).lpNorm<Eigen::Infinity>();
    worst_geo = std::max(worst_geo, cerr);
    if (cerr > kGeoTol) {
      out.detail = "instance " + std::to_string(id) + " centroid off member mean by " +
                   fmt_double(cerr);
      return out;
    }
    ++checked_instances;
  }

  // Zone layer: structural equality against a from-scratch rebuild, then
  // feature equality against the hand-rolled pooling.
  ZoneTable rebuilt(ec.zone_size, aggregator);
  rebuilt.rebuild(instances);
  const auto& live = engine.zones().zones();
  const auto& fresh = rebuilt.zones();
  if (live.size() != fresh.size()) {
    out.detail = "zone count " + std::to_string(live.size()) + " vs rebuilt " +
                 std::to_string(fresh.size());
    return out;
  }
  auto it_live = live.begin();
  auto it_fresh = fresh.begin();
  for (; it_live != live.end(); ++it_live, ++it_fresh) {
    if (!(it_live->first == it_fresh->first) || it_live->second.members != it_fresh->second.members) {
      out.detail = "zone membership diverges from rebuild";
      return out;
    }
    std::vector<const std::vector<float>*> feats;
    for (InstanceId iid : it_live->second.members) feats.push_back(&instances.find(iid)->feature);
    const std::vector<float> expect = normalised_mean(feats);
    for (int d = 0; d < kDim; ++d) {
      const double err =
          std::abs(static_cast<double>(expect[static_cast<std::size_t>(d)]) -
                   static_cast<double>(it_live->second.feature[static_cast<std::size_t>(d)]));
      worst_feat = std::max(worst_feat, err);
      if (err > kFeatTol) {
        out.detail = "zone feature[" + std::to_string(d) + "] off re-aggregation by " +
                     fmt_double(err);
        return out;
      }
    }
  }

  std::ostringstream os;
  os << ds.frames.size() << "-frame dynamic replay, " << checked_instances << " instances and "
     << live.size() << " zones re-aggregated, max feature error " << fmt_double(worst_feat)
     << " (tol 1e-6), max centroid error " << fmt_double(worst_geo) << " (tol 1e-9)";
  out.passed = true;
  out.detail = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// gradient_checks: analytic gradients vs central finite differences, for the
// three contrastive losses (w.r.t. candidate vectors) and the merge network
// (w.r.t. every parameter). Differences are computed here, not by the
// library under test.

Eigen::VectorXd random_unit(SeededRng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(dim, 0);
}

VerifySuiteResult check_gradient_checks(const EngineConfig& cfg, std::uint64_t seed) {
  VerifySuiteResult out{"gradient_checks", false, ""};

  const double kTol = 1e-4;
  const double kH = 1e-5;
  const auto rel_err = [](double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / scale;
  };

  // Contrastive losses at a reduced width; the formulas are dimension
  // agnostic, the derivative structure is not.
  double worst_loss = 0.0;
  {
    SeededRng rng(SeededRng::mix(seed, 0x9a1));
    const int kDim = 12;
    const double taus[] = {0.05, cfg.temperature, 0.2, 1.0};
    for (int rep = 0; rep < 12; ++rep) {
      const int n = rng.uniform_int(2, 5);
      ContrastiveBatch batch;
      batch.temperature = taus[rep % 4];
      for (int i = 0; i < n; ++i) {
        batch.candidates.push_back(random_unit(rng, kDim));
        batch.targets.push_back(random_unit(rng, kDim));
      }
      const int kind = rep % 3;
      if (kind == 2)
        for (int i = 0; i < n; ++i) batch.anchors.push_back(random_unit(rng, kDim));
      const auto eval = [&](const ContrastiveBatch& b) {
        switch (kind) {
          case 0: return loss_instance_text(b).value;
          case 1: return loss_instance_distill(b).value;
          default: return loss_subspace_distill(b).value;
        }
      };
      const LossResult res = [&] {
        switch (kind) {
          case 0: return loss_instance_text(batch);
          case 1: return loss_instance_distill(batch);
          default: return loss_subspace_distill(batch);
        }
      }();
      for (int i = 0; i < n; ++i) {
        for (int d = 0; d < kDim; ++d) {
          ContrastiveBatch plus = batch;
          ContrastiveBatch minus = batch;
          plus.candidates[static_cast<std::size_t>(i)][d] += kH;
          minus.candidates[static_cast<std::size_t>(i)][d] -= kH;
          const double fd = (eval(plus) - eval(minus)) / (2.0 * kH);
          const double an = res.candidate_gradients[static_cast<std::size_t>(i)][d];
          const double err = rel_err(fd, an);
          worst_loss = std::max(worst_loss, err);
          if (err > kTol) {
            std::ostringstream os;
            os << "loss kind " << kind << " batch " << rep << " candidate " << i << " dim " << d
               << ": analytic " << fmt_double(an) << " vs central difference " << fmt_double(fd);
            out.detail = os.str();
            return out;
          }
        }
      }
    }
  }

  // Merge network at a small width so the full-parameter sweep stays cheap.
  double worst_net = 0.0;
  {
    SeededRng rng(SeededRng::mix(seed, 0x9a2));
    const int kDim = 8;
    const int kHidden = 6;
    MlpDiscriminator net(kDim, kHidden, SeededRng::mix(seed, 0x9a3));
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 24; ++i) {
      LabeledPair p;
      const Eigen::VectorXd g = random_unit(rng, kDim);
      const Eigen::VectorXd q = random_unit(rng, kDim);
      p.group_feature.assign(g.data(), g.data() + kDim);
      p.instance_feature.assign(q.data(), q.data() + kDim);
      p.distance = rng.uniform(0.0, 3.0);
      p.label = i % 2;
      pairs.push_back(std::move(p));
    }
    const std::vector<double> analytic = net.loss_gradient(pairs);
    std::vector<double> params = net.parameters();
    if (analytic.size() != params.size()) {
      out.detail = "gradient length " + std::to_string(analytic.size()) + " vs parameter count " +
                   std::to_string(params.size());
      return out;
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double keep = params[k];
      params[k] = keep + kH;
      net.set_parameters(params);
      const double lp = net.loss(pairs);
      params[k] = keep - kH;
      net.set_parameters(params);
      const double lm = net.loss(pairs);
      params[k] = keep;
      net.set_parameters(params);
      const double fd = (lp - lm) / (2.0 * kH);
      const double err = rel_err(fd, analytic[k]);
      worst_net = std::max(worst_net, err);
      if (err > kTol) {
        std::ostringstream os;
        os << "network parameter " << k << ": analytic " << fmt_double(analytic[k])
           << " vs central difference " << fmt_double(fd);
        out.detail = os.str();
        return out;
      }
    }
  }

  std::ostringstream os;
  os << "12 contrastive batches (max rel err " << fmt_double(worst_loss)
     << ") and full network parameter sweep (max rel err " << fmt_double(worst_net)
     << "), tol 1e-4";
  out.passed = true;
  out.detail = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// codec_round_trip: seeded on-grid actions survive format -> parse exactly;
// a fixed list of off-grammar spellings is rejected.

VerifySuiteResult check_codec_round_trip(std::uint64_t seed) {
  VerifySuiteResult out{"codec_round_trip", false, ""};

  SeededRng rng(SeededRng::mix(seed, 0xac7));
  for (int i = 0; i < 1000; ++i) {
    Action a;
    switch (rng.uniform_int(0, 3)) {
      case 0:
        a.kind = Action::Kind::TurnLeft;
        a.value = static_cast<double>(rng.uniform_int(1, 1800)) / 10.0;
        break;
      case 1:
        a.kind = Action::Kind::TurnRight;
        a.value = static_cast<double>(rng.uniform_int(1, 1800)) / 10.0;
        break;
      case 2:
        a.kind = Action::Kind::Forward;
        a.value = static_cast<double>(rng.uniform_int(1, 5000)) / 10.0;
        break;
      default:
        a.kind = Action::Kind::Stop;
        a.value = 0.0;
        break;
    }
    const std::string text = format_action(a);
    const Action back = parse_action(text);
    if (!(back == a)) {
      out.detail = "round trip changed \"" + text + "\"";
      return out;
    }
  }

  const char* rejects[] = {
      "",
      "Stop",
      "stop.",
      "Turn left  25 degree.",
      "Turn left 25 degrees.",
      "Turn left 25.25 degree.",
      "Turn right 181 degree.",
      "Forward 0 cm.",
      "Forward 5 m.",
      "Forward 1e2 cm.",
      "Go forward 50 cm.",
      "Turn left 25 degree. ",
  };
  for (const char* text : rejects) {
    bool threw = false;
    try {
      (void)parse_action(text);
    } catch (const std::invalid_argument&) {
      threw = true;
    }
    if (!threw) {
      out.detail = std::string("accepted off-grammar text \"") + text + "\"";
      return out;
    }
  }

  out.passed = true;
  out.detail = "1000 seeded actions round-trip exactly, 12 off-grammar spellings rejected";
  return out;
}

// ---------------------------------------------------------------------------
// token_geometry: every panorama ray against direct axis-angle
// trigonometry, and relative position features against a manual camera
// transform.

VerifySuiteResult check_token_geometry(std::uint64_t seed) {
  VerifySuiteResult out{"token_geometry", false, ""};

  const double kTol = 1e-9;
  const double kDeg = 3.14159265358979323846 / 180.0;
  double worst = 0.0;
  for (int row = 0; row < kPanoramaRows; ++row) {
    for (int col = 0; col < kPanoramaCols; ++col) {
      const double elevation = (41.25 - 7.5 * row) * kDeg;
      const double azimuth = (180.0 + 7.5 * col) * kDeg;
      const Eigen::AngleAxisd yaw(azimuth, Eigen::Vector3d::UnitY());
      const Eigen::AngleAxisd pitch(elevation, Eigen::Vector3d::UnitX());
      const Vec3 ref = yaw * (pitch * Eigen::Vector3d(0.0, 0.0, 1.0));
      const Vec3 impl = panorama_direction(row, col);
      const double err = (impl - ref).lpNorm<Eigen::Infinity>();
      const double nerr = std::abs(impl.norm() - 1.0);
      worst = std::max({worst, err, nerr});
      if (err > kTol || nerr > kTol) {
        std::ostringstream os;
        os << "panorama ray (" << row << ", " << col << ") off axis-angle reference by "
           << fmt_double(std::max(err, nerr));
        out.detail = os.str();
        return out;
      }
    }
  }

  SeededRng rng(SeededRng::mix(seed, 0x7e0));
  int checked = 0;
  for (int pi = 0; pi < 5; ++pi) {
    const Vec3 center(rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 0.0), rng.uniform(-3.0, 3.0));
    const Pose pose = Pose::from_heading(center, rng.uniform(-3.1, 3.1));
    for (int i = 0; i < 40; ++i) {
      const Vec3 pw(rng.uniform(-5.0, 5.0), rng.uniform(-2.5, 0.5), rng.uniform(-5.0, 5.0));
      const RelPosFeature rel = relative_position_features(pw, pose);
      const Vec3 pc = pose.rotation() * pw + pose.translation();
      double err = std::abs(rel.x - pc.x());
      err = std::max(err, std::abs(rel.y - pc.y()));
      err = std::max(err, std::abs(rel.z - pc.z()));
      err = std::max(err, std::abs(rel.distance - pc.norm()));
      err = std::max(err, std::abs(rel.cos_theta * rel.cos_theta +
                                   rel.sin_theta * rel.sin_theta - 1.0));
      const double h = std::hypot(pc.x(), pc.z());
      if (h > 1e-12) {
        err = std::max(err, std::abs(rel.cos_theta * h - pc.z()));
        err = std::max(err, std::abs(rel.sin_theta * h - pc.x()));
      }
      worst = std::max(worst, err);
      if (err > kTol) {
        std::ostringstream os;
        os << "relative position feature off manual transform by " << fmt_double(err)
           << " (pose " << pi << ", point " << i << ")";
        out.detail = os.str();
        return out;
      }
      ++checked;
    }
  }

  std::ostringstream os;
  os << kPatchCount << " panorama rays and " << checked
     << " relative position features, max error " << fmt_double(worst) << " (tol 1e-9)";
  out.passed = true;
  out.detail = os.str();
  return out;
}

}  // namespace

VerifyReport run_verify_suites(const EngineConfig& config, std::uint64_t seed,
                               bool inject_cull_fault) {
  config.validate();
  VerifyReport report;

  const auto guard = [&report](const char* name, auto&& fn) {
    try {
      report.suites.push_back(fn());
    } catch (const std::exception& e) {
      report.suites.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };

  guard("cull_equality",
        [&] { return check_cull_equality(config, seed, inject_cull_fault); });
  guard("replay_idempotence", [&] { return check_replay_idempotence(config, seed); });
  guard("incremental_equals_rebuild",
        [&] { return check_incremental_equals_rebuild(config, seed); });
  guard("gradient_checks", [&] { return check_gradient_checks(config, seed); });
  guard("codec_round_trip", [&] { return check_codec_round_trip(seed); });
  guard("token_geometry", [&] { return check_token_geometry(seed); });

  report.passed = std::all_of(report.suites.begin(), report.suites.end(),
                              [](const VerifySuiteResult& s) { return s.passed; });
  return report;
}

std::string verify_report_json(const VerifyReport& report) {
  nlohmann::json doc;
  doc["format"] = "scenemem-verify-report";
  doc["version"] = 1;
  doc["passed"] = report.passed;
  nlohmann::json suites = nlohmann::json::array();
  for (const VerifySuiteResult& s : report.suites)
    suites.push_back({{"name", s.name}, {"passed", s.passed}, {"detail", s.detail}});
  doc["suites"] = suites;
  return doc.dump(2) + "\n";
}

}  // namespace scenemem
