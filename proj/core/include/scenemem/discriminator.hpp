#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scenemem/config.hpp"

namespace scenemem {

// One merge-or-create query: a freshly observed patch group against one
// stored instance. Ground-truth ids ride along for the oracle and for
// harvesting labelled training pairs; learned discriminators ignore them.
struct MergePair {
  std::vector<float> group_feature;     // unit norm, current-frame group
  std::vector<float> instance_feature;  // unit norm, stored instance
  double distance = 0.0;                // centroid separation in metres
  std::optional<std::int64_t> group_gt;
  std::optional<std::int64_t> instance_gt;
};

// Two-class merge decision head. logits()[0] scores the merge class and
// logits()[1] the keep-separate class, so merge_probability is the softmax
// weight of index 0.
class MergingDiscriminator {
 public:
  virtual ~MergingDiscriminator() = default;
  virtual std::array<double, 2> logits(const MergePair& pair) const = 0;
  double merge_probability(const MergePair& pair) const;
};

// Margin rule on cosine similarity with a distance penalty:
//   m = cos_scale * (cos - cos_threshold) - dist_scale * max(0, d - dist_gate)
// mapped to logits (m/2, -m/2) so the merge probability is sigmoid(m).
class HeuristicDiscriminator final : public MergingDiscriminator {
 public:
  explicit HeuristicDiscriminator(const HeuristicDiscriminatorParams& params = {});
  std::array<double, 2> logits(const MergePair& pair) const override;

 private:
  HeuristicDiscriminatorParams params_;
};

// Answers from ground truth: merge only when both sides carry the same
// object id. Pairs with a missing id never merge. Used to bound achievable
// map purity and to label training data.
class OracleDiscriminator final : public MergingDiscriminator {
 public:
  std::array<double, 2> logits(const MergePair& pair) const override;
};

// Labelled pair harvested during a replay; label 1 means the two sides
// belong to the same object.
struct LabeledPair {
  std::vector<float> group_feature;
  std::vector<float> instance_feature;
  double distance = 0.0;
  int label = 0;
};

// One-hidden-layer tanh network over [group_feature, instance_feature,
// distance]. Trained by full-batch gradient descent on the mean softmax
// cross entropy with analytically derived gradients.
class MlpDiscriminator final : public MergingDiscriminator {
 public:
  MlpDiscriminator(int feature_dim, int hidden, std::uint64_t seed);

  std::array<double, 2> logits(const MergePair& pair) const override;

  int feature_dim() const { return feature_dim_; }
  int hidden() const { return hidden_; }
  int input_dim() const { return 2 * feature_dim_ + 1; }

  // Mean cross entropy over the batch; target index 0 for label 1.
  double loss(const std::vector<LabeledPair>& pairs) const;

  // One full-batch step; returns the pre-step loss.
  double train_step(const std::vector<LabeledPair>& pairs, double learning_rate);

  // Gradient of loss() with respect to every parameter, flattened in
  // parameter-vector order. Exposed so tests can check it against finite
  // differences.
  std::vector<double> loss_gradient(const std::vector<LabeledPair>& pairs) const;

  double accuracy(const std::vector<LabeledPair>& pairs) const;

  // Flat parameter vector in fixed order: W1 row-major, b1, W2 row-major,
  // b2. save() writes it as f32 next to a JSON sidecar recording shapes.
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::size_t parameter_count() const;

  void save(const std::string& bin_path) const;  // sidecar at bin_path + ".json"
  static MlpDiscriminator load(const std::string& bin_path);

 private:
  std::array<double, 2> forward(const float* group, const float* instance, double distance,
                                std::vector<double>* hidden_out) const;

  int feature_dim_;
  int hidden_;
  std::vector<double> w1_;  // hidden_ x input_dim, row-major
  std::vector<double> b1_;
  std::vector<double> w2_;  // 2 x hidden_, row-major
  std::vector<double> b2_;
};

// Deterministically subsamples the majority class until both labels are
// equally represented, then applies a seeded shuffle. Returns a new vector.
std::vector<LabeledPair> balance_pairs(const std::vector<LabeledPair>& pairs,
                                       std::uint64_t seed);

}  // namespace scenemem
