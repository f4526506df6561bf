#include "scenemem/training.hpp"

#include <memory>
#include <stdexcept>
#include <utility>

#include "scenemem/engine.hpp"
#include "scenemem/rng.hpp"

namespace scenemem {

TrainOutcome train_discriminator(const SimDataset& dataset, const EngineConfig& engine_config,
                                 const TrainConfig& train_config, std::uint64_t seed) {
  train_config.validate();
  if (dataset.frames.empty()) throw std::invalid_argument("training: dataset has no frames");
  for (const auto& frame : dataset.frames)
    if (!frame.masks_are_ground_truth)
      throw std::invalid_argument("training: dataset frames carry no ground-truth ids");

  // harvest every scored merge pair from an oracle-driven replay
  MapEngine engine(engine_config, std::make_shared<MeanAggregator>(engine_config.feature_dim),
                   std::make_shared<OracleDiscriminator>());
  std::vector<LabeledPair> pairs;
  for (const auto& frame : dataset.frames) engine.integrate(frame, &pairs);
  const std::size_t harvested = pairs.size();

  bool saw_positive = false;
  bool saw_negative = false;
  for (const auto& p : pairs) (p.label == 1 ? saw_positive : saw_negative) = true;
  if (!saw_positive || !saw_negative)
    throw std::runtime_error("training: harvested pairs carry a single label");

  if (train_config.balance) {
    pairs = balance_pairs(pairs, SeededRng::mix(seed, 0xba1a));
  } else {
    // unbiased split still needs a shuffle
    SeededRng rng(SeededRng::mix(seed, 0x5f1e));
    for (std::size_t i = pairs.size(); i > 1; --i)
      std::swap(pairs[i - 1], pairs[static_cast<std::size_t>(rng.uniform_int(
                                  0, static_cast<int>(i) - 1))]);
  }

  const auto heldout_count =
      static_cast<std::size_t>(train_config.heldout_fraction * static_cast<double>(pairs.size()));
  if (heldout_count == 0 || heldout_count >= pairs.size())
    throw std::invalid_argument("training: split leaves an empty side");

  std::vector<LabeledPair> heldout(pairs.end() - static_cast<std::ptrdiff_t>(heldout_count),
                                   pairs.end());
  pairs.resize(pairs.size() - heldout_count);

  TrainOutcome out{.harvested_pairs = harvested,
                   .train_pairs = pairs.size(),
                   .heldout_pairs = heldout.size(),
                   .model = MlpDiscriminator(engine_config.feature_dim,
                                             engine_config.discriminator_hidden,
                                             SeededRng::mix(seed, 0x313))};
  out.epoch_losses.reserve(static_cast<std::size_t>(train_config.epochs));
  for (int epoch = 0; epoch < train_config.epochs; ++epoch)
    out.epoch_losses.push_back(out.model.train_step(pairs, train_config.learning_rate));

  out.final_loss = out.model.loss(pairs);
  out.train_accuracy = out.model.accuracy(pairs);
  out.heldout_accuracy = out.model.accuracy(heldout);
  return out;
}

}  // namespace scenemem
