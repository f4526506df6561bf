#include "scenemem/alignment.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace scenemem {
namespace {

constexpr double kNormFloor = 1e-12;

void validate_shape(const ContrastiveBatch& b, bool with_anchors, const char* who) {
  const std::string name(who);
  if (b.candidates.empty()) throw std::invalid_argument(name + ": empty batch");
  if (b.targets.size() != b.candidates.size())
    throw std::invalid_argument(name + ": candidates and targets must be index aligned");
  if (!(b.temperature > 0.0))
    throw std::invalid_argument(name + ": temperature must be > 0");
  const Eigen::Index dim = b.candidates.front().size();
  if (dim == 0) throw std::invalid_argument(name + ": zero-dimensional features");
  for (const auto& v : b.candidates)
    if (v.size() != dim) throw std::invalid_argument(name + ": mixed candidate dimensions");
  for (const auto& v : b.targets)
    if (v.size() != dim) throw std::invalid_argument(name + ": target dimension mismatch");
  if (with_anchors && !b.anchors.empty()) {
    if (b.anchors.size() != b.candidates.size())
      throw std::invalid_argument(name + ": anchors must align with the batch");
    for (const auto& v : b.anchors)
      if (v.size() != dim) throw std::invalid_argument(name + ": anchor dimension mismatch");
  }
}

// Shared core. Without anchors V_j is the zero vector, and subtracting an
// exact zero is the identity in IEEE arithmetic, so the anchored loss with
// all-zero anchors reproduces the plain loss bit for bit through this one
// code path.
LossResult contrastive_core(const ContrastiveBatch& b, bool with_anchors, const char* who) {
  validate_shape(b, with_anchors, who);
  const std::string name(who);
  const std::size_t n = b.candidates.size();
  const Eigen::Index dim = b.candidates.front().size();
  const bool anchored = with_anchors && !b.anchors.empty();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  const auto anchor = [&](std::size_t j) -> const Eigen::VectorXd& {
    return anchored ? b.anchors[j] : zero;
  };

  // target sides depend only on j
  std::vector<Eigen::VectorXd> w_hat(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::VectorXd w = b.targets[j] - anchor(j);
    const double norm = w.norm();
    if (norm < kNormFloor)
      throw std::invalid_argument(anchored ? name + ": degenerate anchor (target side)"
                                           : name + ": zero-norm target");
    w_hat[j] = w / norm;
  }

  const double inv_tau = 1.0 / b.temperature;
  LossResult out;
  out.candidate_gradients.assign(n, Eigen::VectorXd::Zero(dim));
  out.predicted.assign(n, 0);
  double total = 0.0;

  std::vector<double> logits(n), cosines(n), u_norms(n);
  std::vector<Eigen::VectorXd> u_hats(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::VectorXd u = b.candidates[i] - anchor(j);
      const double norm = u.norm();
      if (norm < kNormFloor)
        throw std::invalid_argument(anchored ? name + ": degenerate anchor (candidate side)"
                                             : name + ": zero-norm candidate");
      u_hats[j] = u / norm;
      u_norms[j] = norm;
      cosines[j] = u_hats[j].dot(w_hat[j]);
      logits[j] = cosines[j] * inv_tau;
      if (logits[j] > logits[static_cast<std::size_t>(out.predicted[i])])
        out.predicted[i] = static_cast<int>(j);
    }

    double max_logit = logits[0];
    for (std::size_t j = 1; j < n; ++j) max_logit = std::max(max_logit, logits[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(logits[j] - max_logit);
    const double lse = max_logit + std::log(sum);
    total += lse - logits[i];

    // d cos(u, w)/du = (w_hat - cos * u_hat) / |u|, chained through softmax
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = 0; j < n; ++j) {
      const double p = std::exp(logits[j] - lse);
      const double coeff = (p - (i == j ? 1.0 : 0.0)) * inv_tau / u_norms[j];
      g += coeff * (w_hat[j] - cosines[j] * u_hats[j]);
    }
    out.candidate_gradients[i] = g / static_cast<double>(n);
  }

  out.value = total / static_cast<double>(n);
  return out;
}

}  // namespace

LossResult loss_instance_text(const ContrastiveBatch& batch) {
  return contrastive_core(batch, false, "loss_instance_text");
}

LossResult loss_instance_distill(const ContrastiveBatch& batch) {
  return contrastive_core(batch, false, "loss_instance_distill");
}

LossResult loss_subspace_distill(const ContrastiveBatch& batch) {
  return contrastive_core(batch, true, "loss_subspace_distill");
}

Eigen::VectorXd map_ground_truth(const std::vector<const FeaturePoint*>& members) {
  if (members.empty()) throw std::invalid_argument("map_ground_truth: no members");
  const std::size_t dim = members.front()->feature.size();
  if (dim == 0) throw std::invalid_argument("map_ground_truth: empty features");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto* m : members) {
    if (!m) throw std::invalid_argument("map_ground_truth: null member");
    if (m->feature.size() != dim)
      throw std::invalid_argument("map_ground_truth: mixed feature dimensions");
    for (std::size_t d = 0; d < dim; ++d)
      acc[static_cast<Eigen::Index>(d)] += static_cast<double>(m->feature[d]);
  }
  acc /= static_cast<double>(members.size());
  const double norm = acc.norm();
  if (norm < kNormFloor) throw std::invalid_argument("map_ground_truth: zero-norm mean");
  return acc / norm;
}

std::vector<float> zone_distill_target(const std::vector<const InstanceRecord*>& instances,
                                       const Aggregator& aggregator) {
  return pool_instance_features(instances, aggregator);
}

}  // namespace scenemem
