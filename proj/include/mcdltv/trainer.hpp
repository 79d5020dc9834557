#pragma once

#include "mcdltv/adam.hpp"
#include "mcdltv/data.hpp"
#include "mcdltv/losses.hpp"
#include "mcdltv/nn.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mcdltv {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 512;
  AdamOptions adam;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::log_mse;
  int patience = 5;  // epochs without validation improvement before stopping; 0 disables
  double validation_fraction = 0.1;
};

void validate(const TrainConfig& cfg);

/// Reads the recognised keys (epochs, batch_size, learning_rate, beta1, beta2, epsilon, seed,
/// loss, patience, validation_fraction); anything missing keeps its default. Unknown keys
/// are rejected except "model", which belongs to the caller.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);

struct EpochLoss {
  int epoch;
  double train_loss;
  double val_loss;
};

struct TrainResult {
  Network net;
  std::vector<EpochLoss> history;
  int best_epoch = 0;
  bool stopped_early = false;
};

/// Mini-batch Adam training with dropout active. A validation slice is held out with a
/// seeded permutation; the parameters of the best validation epoch are returned.
TrainResult train(Network net, const Dataset& data, const TrainConfig& cfg);

/// Held-out split used by train(): (training rows, validation rows), both ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(
    std::size_t n, double validation_fraction, std::uint64_t seed);

std::string loss_history_csv(const std::vector<EpochLoss>& history);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::int64_t entries_checked = 0;
  bool passed = false;
};

/// Central-difference check of every parameter (and the input) on a small random batch,
/// with the dropout masks frozen across evaluations.
GradCheckReport grad_check(const Network& net, LossKind loss, double tolerance,
                           std::uint64_t seed = 7, Eigen::Index batch = 4, double step = 1e-5);

}  // namespace mcdltv
