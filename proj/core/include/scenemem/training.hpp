#pragma once

#include <cstdint>
#include <vector>

#include "scenemem/config.hpp"
#include "scenemem/discriminator.hpp"
#include "scenemem/scene_sim.hpp"

namespace scenemem {

// Result of one training run. The model is ready to drive merge decisions
// or to be saved next to its accuracy numbers.
struct TrainOutcome {
  std::size_t harvested_pairs = 0;  // raw pairs scored during the replay
  std::size_t train_pairs = 0;
  std::size_t heldout_pairs = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  std::vector<double> epoch_losses;  // pre-step training loss, one per epoch
  MlpDiscriminator model;
};

// Replays the dataset under the ground-truth oracle to harvest every scored
// merge pair, balances the labels (optional), splits off a held-out slice,
// and fits the two-layer scorer by full-batch gradient descent.
// Deterministic in (dataset, configs, seed). Throws std::invalid_argument
// when the dataset carries no ground-truth ids or the harvest leaves either
// split empty, and std::runtime_error when only one label was harvested.
TrainOutcome train_discriminator(const SimDataset& dataset, const EngineConfig& engine_config,
                                 const TrainConfig& train_config, std::uint64_t seed);

}  // namespace scenemem
