#pragma once

#include "mcdltv/data.hpp"
#include "mcdltv/losses.hpp"
#include "mcdltv/nn.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace mcdltv {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to run a trained model on raw feature rows.
struct Checkpoint {
  Network net;
  LossKind loss = LossKind::log_mse;
  std::optional<Standardization> scaler;
};

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Compact JSON; doubles are printed in shortest round-trip form, so save -> load is exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mcdltv
