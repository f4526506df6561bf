#pragma once

#include <vector>

#include <Eigen/Dense>

#include "scenemem/instance_layer.hpp"
#include "scenemem/patch_store.hpp"

namespace scenemem {

// One in-batch contrastive problem: the i-th target is the positive for the
// i-th candidate, every other target is a negative. Vectors are f64 because
// this side of the system is training math; f32 map features get promoted
// on assembly. Candidates and targets should be unit norm, but the losses
// normalise internally so finite-difference probes stay valid off the
// sphere.
struct ContrastiveBatch {
  std::vector<Eigen::VectorXd> candidates;  // O_i
  std::vector<Eigen::VectorXd> targets;     // aligned positives
  std::vector<Eigen::VectorXd> anchors;     // optional, subspace losses only
  double temperature = 0.07;
};

struct LossResult {
  double value = 0.0;
  // d value / d candidate_i; targets and anchors are constants
  std::vector<Eigen::VectorXd> candidate_gradients;
  // argmax_j of row i's logits (ties toward smaller j). Retrieval is
  // correct where predicted[i] == i, and the argmax is temperature
  // invariant because 1/tau is a positive monotone scale.
  std::vector<int> predicted;
};

// Mean over rows of cross entropy against softmax_j(cos(O_i, T_j) / tau)
// with true class i. Targets are frozen text embeddings. Anchors ignored.
// Throws std::invalid_argument on tau <= 0, size or dimension mismatches,
// and zero-norm candidates or targets.
LossResult loss_instance_text(const ContrastiveBatch& batch);

// Same objective with map-derived ground-truth features as the targets.
LossResult loss_instance_distill(const ContrastiveBatch& batch);

// Anchored variant: the j-th logit for candidate i is
// cos(O_i - V_j, T_j - V_j) / tau, so both arguments are expressed relative
// to the j-th anchor. Empty anchors behave as all-zero anchors, which makes
// the result bit-identical to loss_instance_distill. Throws on a zero-norm
// difference (degenerate anchor).
LossResult loss_subspace_distill(const ContrastiveBatch& batch);

// Distillation target for one instance: the unit-norm f64 mean of the patch
// features observed under a single mask. Throws on empty input, mixed
// dimensions, or a zero-norm mean.
Eigen::VectorXd map_ground_truth(const std::vector<const FeaturePoint*>& members);

// Region-level distillation target: pools the instance features visible in
// one view with the same aggregator the zone layer uses, so a zone that
// holds exactly those instances reproduces this vector bit for bit.
std::vector<float> zone_distill_target(const std::vector<const InstanceRecord*>& instances,
                                       const Aggregator& aggregator);

}  // namespace scenemem
