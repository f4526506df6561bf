#include "scenemem/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "binary_io.hpp"
#include "scenemem/rng.hpp"

namespace scenemem {
namespace {

double unit_cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("discriminator: feature size mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return dot;
}

std::array<double, 2> softmax2(const std::array<double, 2>& z) {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  const double sum = e0 + e1;
  return {e0 / sum, e1 / sum};
}

}  // namespace

double MergingDiscriminator::merge_probability(const MergePair& pair) const {
  return softmax2(logits(pair))[0];
}

HeuristicDiscriminator::HeuristicDiscriminator(const HeuristicDiscriminatorParams& params)
    : params_(params) {}

std::array<double, 2> HeuristicDiscriminator::logits(const MergePair& pair) const {
  const double cos = unit_cosine(pair.group_feature, pair.instance_feature);
  const double margin = params_.cos_scale * (cos - params_.cos_threshold) -
                        params_.dist_scale * std::max(0.0, pair.distance - params_.dist_gate);
  return {margin / 2.0, -margin / 2.0};
}

std::array<double, 2> OracleDiscriminator::logits(const MergePair& pair) const {
  constexpr double kStrong = 20.0;
  const bool merge =
      pair.group_gt.has_value() && pair.instance_gt.has_value() && *pair.group_gt == *pair.instance_gt;
  return merge ? std::array<double, 2>{kStrong, -kStrong}
               : std::array<double, 2>{-kStrong, kStrong};
}

MlpDiscriminator::MlpDiscriminator(int feature_dim, int hidden, std::uint64_t seed)
    : feature_dim_(feature_dim), hidden_(hidden) {
  if (feature_dim <= 0 || hidden <= 0)
    throw std::invalid_argument("MlpDiscriminator: dimensions must be > 0");
  const int in = input_dim();
  w1_.resize(static_cast<std::size_t>(hidden_) * in);
  b1_.assign(static_cast<std::size_t>(hidden_), 0.0);
  w2_.resize(static_cast<std::size_t>(2) * hidden_);
  b2_.assign(2, 0.0);

  SeededRng rng(SeededRng::mix(seed, 0xd15c0ull));
  const double a1 = std::sqrt(6.0 / (in + hidden_));
  for (auto& w : w1_) w = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / (hidden_ + 2));
  for (auto& w : w2_) w = rng.uniform(-a2, a2);
}

std::array<double, 2> MlpDiscriminator::forward(const float* group, const float* instance,
                                                double distance,
                                                std::vector<double>* hidden_out) const {
  const int in = input_dim();
  std::vector<double> h(static_cast<std::size_t>(hidden_));
  for (int j = 0; j < hidden_; ++j) {
    const double* row = &w1_[static_cast<std::size_t>(j) * in];
    double acc = b1_[static_cast<std::size_t>(j)];
    for (int d = 0; d < feature_dim_; ++d) acc += row[d] * group[d];
    for (int d = 0; d < feature_dim_; ++d) acc += row[feature_dim_ + d] * instance[d];
    acc += row[2 * feature_dim_] * distance;
    h[static_cast<std::size_t>(j)] = std::tanh(acc);
  }
  std::array<double, 2> z;
  for (int o = 0; o < 2; ++o) {
    double acc = b2_[static_cast<std::size_t>(o)];
    const double* row = &w2_[static_cast<std::size_t>(o) * hidden_];
    for (int j = 0; j < hidden_; ++j) acc += row[j] * h[static_cast<std::size_t>(j)];
    z[static_cast<std::size_t>(o)] = acc;
  }
  if (hidden_out) *hidden_out = std::move(h);
  return z;
}

std::array<double, 2> MlpDiscriminator::logits(const MergePair& pair) const {
  if (pair.group_feature.size() != static_cast<std::size_t>(feature_dim_) ||
      pair.instance_feature.size() != static_cast<std::size_t>(feature_dim_))
    throw std::invalid_argument("MlpDiscriminator: feature size mismatch");
  return forward(pair.group_feature.data(), pair.instance_feature.data(), pair.distance, nullptr);
}

double MlpDiscriminator::loss(const std::vector<LabeledPair>& pairs) const {
  if (pairs.empty()) throw std::invalid_argument("MlpDiscriminator: empty batch");
  double total = 0.0;
  for (const auto& p : pairs) {
    const auto z = forward(p.group_feature.data(), p.instance_feature.data(), p.distance, nullptr);
    const auto prob = softmax2(z);
    const int target = p.label == 1 ? 0 : 1;
    total += -std::log(std::max(prob[static_cast<std::size_t>(target)], 1e-300));
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<double> MlpDiscriminator::loss_gradient(const std::vector<LabeledPair>& pairs) const {
  if (pairs.empty()) throw std::invalid_argument("MlpDiscriminator: empty batch");
  const int in = input_dim();
  std::vector<double> gw1(w1_.size(), 0.0), gb1(b1_.size(), 0.0);
  std::vector<double> gw2(w2_.size(), 0.0), gb2(b2_.size(), 0.0);
  std::vector<double> h;
  std::vector<double> x(static_cast<std::size_t>(in));

  for (const auto& p : pairs) {
    if (p.group_feature.size() != static_cast<std::size_t>(feature_dim_) ||
        p.instance_feature.size() != static_cast<std::size_t>(feature_dim_))
      throw std::invalid_argument("MlpDiscriminator: feature size mismatch in batch");
    for (int d = 0; d < feature_dim_; ++d) x[static_cast<std::size_t>(d)] = p.group_feature[d];
    for (int d = 0; d < feature_dim_; ++d)
      x[static_cast<std::size_t>(feature_dim_ + d)] = p.instance_feature[d];
    x[static_cast<std::size_t>(2 * feature_dim_)] = p.distance;

    const auto z = forward(p.group_feature.data(), p.instance_feature.data(), p.distance, &h);
    const auto prob = softmax2(z);
    const int target = p.label == 1 ? 0 : 1;
    std::array<double, 2> dz = {prob[0], prob[1]};
    dz[static_cast<std::size_t>(target)] -= 1.0;

    for (int o = 0; o < 2; ++o) {
      gb2[static_cast<std::size_t>(o)] += dz[static_cast<std::size_t>(o)];
      double* grow = &gw2[static_cast<std::size_t>(o) * hidden_];
      for (int j = 0; j < hidden_; ++j)
        grow[j] += dz[static_cast<std::size_t>(o)] * h[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < hidden_; ++j) {
      const double dh = w2_[static_cast<std::size_t>(j)] * dz[0] +
                        w2_[static_cast<std::size_t>(hidden_ + j)] * dz[1];
      const double da = dh * (1.0 - h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)]);
      gb1[static_cast<std::size_t>(j)] += da;
      double* grow = &gw1[static_cast<std::size_t>(j) * in];
      for (int d = 0; d < in; ++d) grow[d] += da * x[static_cast<std::size_t>(d)];
    }
  }

  const double inv = 1.0 / static_cast<double>(pairs.size());
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (double g : gw1) flat.push_back(g * inv);
  for (double g : gb1) flat.push_back(g * inv);
  for (double g : gw2) flat.push_back(g * inv);
  for (double g : gb2) flat.push_back(g * inv);
  return flat;
}

double MlpDiscriminator::train_step(const std::vector<LabeledPair>& pairs, double learning_rate) {
  const double before = loss(pairs);
  const auto grad = loss_gradient(pairs);
  std::size_t k = 0;
  for (auto& w : w1_) w -= learning_rate * grad[k++];
  for (auto& w : b1_) w -= learning_rate * grad[k++];
  for (auto& w : w2_) w -= learning_rate * grad[k++];
  for (auto& w : b2_) w -= learning_rate * grad[k++];
  return before;
}

double MlpDiscriminator::accuracy(const std::vector<LabeledPair>& pairs) const {
  if (pairs.empty()) throw std::invalid_argument("MlpDiscriminator: empty batch");
  std::size_t correct = 0;
  MergePair mp;
  for (const auto& p : pairs) {
    mp.group_feature = p.group_feature;
    mp.instance_feature = p.instance_feature;
    mp.distance = p.distance;
    const bool merge = merge_probability(mp) > 0.5;
    if (merge == (p.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::vector<double> MlpDiscriminator::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), w1_.begin(), w1_.end());
  flat.insert(flat.end(), b1_.begin(), b1_.end());
  flat.insert(flat.end(), w2_.begin(), w2_.end());
  flat.insert(flat.end(), b2_.begin(), b2_.end());
  return flat;
}

void MlpDiscriminator::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("MlpDiscriminator: parameter vector size mismatch");
  std::size_t k = 0;
  for (auto& w : w1_) w = flat[k++];
  for (auto& w : b1_) w = flat[k++];
  for (auto& w : w2_) w = flat[k++];
  for (auto& w : b2_) w = flat[k++];
}

std::size_t MlpDiscriminator::parameter_count() const {
  return w1_.size() + b1_.size() + w2_.size() + b2_.size();
}

void MlpDiscriminator::save(const std::string& bin_path) const {
  std::ofstream os(bin_path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write discriminator parameters: " + bin_path);
  const auto flat = parameters();
  for (double v : flat) detail::write_pod(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("write failed: " + bin_path);

  nlohmann::json meta;
  meta["format"] = "scenemem-discriminator";
  meta["version"] = 1;
  meta["dtype"] = "f32";
  meta["feature_dim"] = feature_dim_;
  meta["hidden"] = hidden_;
  meta["layers"] = {{{"name", "w1"}, {"shape", {hidden_, input_dim()}}},
                    {{"name", "b1"}, {"shape", {hidden_}}},
                    {{"name", "w2"}, {"shape", {2, hidden_}}},
                    {{"name", "b2"}, {"shape", {2}}}};
  std::ofstream js(bin_path + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write discriminator sidecar: " + bin_path + ".json");
  js << meta.dump(2) << '\n';
}

MlpDiscriminator MlpDiscriminator::load(const std::string& bin_path) {
  std::ifstream js(bin_path + ".json");
  if (!js) throw std::runtime_error("missing discriminator sidecar: " + bin_path + ".json");
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed discriminator sidecar: ") + e.what());
  }
  if (meta.value("format", "") != "scenemem-discriminator" || meta.value("version", 0) != 1 ||
      meta.value("dtype", "") != "f32")
    throw std::runtime_error("unsupported discriminator sidecar: " + bin_path + ".json");

  MlpDiscriminator out(meta.at("feature_dim").get<int>(), meta.at("hidden").get<int>(), 0);
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open discriminator parameters: " + bin_path);
  std::vector<double> flat(out.parameter_count());
  for (auto& v : flat) v = detail::read_pod<float>(is, "discriminator parameter");
  char extra;
  if (is.read(&extra, 1))
    throw std::runtime_error("discriminator parameter file longer than sidecar shapes: " +
                             bin_path);
  out.set_parameters(flat);
  return out;
}

std::vector<LabeledPair> balance_pairs(const std::vector<LabeledPair>& pairs,
                                       std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    (pairs[i].label == 1 ? pos : neg).push_back(i);
  const std::size_t keep = std::min(pos.size(), neg.size());

  SeededRng rng(SeededRng::mix(seed, 0xba1a9cedull));
  const auto subsample = [&](std::vector<std::size_t>& idx) {
    // seeded Fisher-Yates, then truncate
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(idx[i - 1], idx[j]);
    }
    idx.resize(keep);
  };
  subsample(pos);
  subsample(neg);

  std::vector<std::size_t> order;
  order.insert(order.end(), pos.begin(), pos.end());
  order.insert(order.end(), neg.begin(), neg.end());
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<LabeledPair> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(pairs[i]);
  return out;
}

}  // namespace scenemem
