#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "mcunet/model.hpp"
#include "mcunet/simdata.hpp"
#include "mcunet/train.hpp"

// One JSON document drives every command. Layers, lowest precedence first:
// built-in defaults (identical to the "desk" profile), --profile, the
// MCUNET_OUT environment variable (output root only), --config file, then
// explicit flags (--seed, --variant). Unknown keys anywhere in the document
// are rejected with the offending path. Every command writes the fully
// resolved document next to its outputs as config.json.
//
// All randomness flows from the one root seed: the data generator runs at
// derive_seed(seed, "data") and the trainer at derive_seed(seed, "train"),
// so per-section seed keys are not part of the schema.

namespace mcu::cfg {

using nlohmann::json;

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_root = "runs";
  simdata::GenSpec data;
  ModelConfig model;
  train::TrainConfig train;
};

struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
};

RunConfig profile_config(const std::string& name);  // "desk" or "smoke"

// Overlays a (possibly partial) document onto rc. Strict: unknown keys and
// ill-typed values raise validation errors.
void apply_document(RunConfig& rc, const json& doc);

json to_json(const RunConfig& rc);

RunConfig resolve(const std::optional<std::string>& profile,
                  const std::optional<std::string>& config_path, const FlagOverrides& flags);

// Seeds actually used by the commands (derived, never stored).
std::uint64_t data_seed(const RunConfig& rc);
std::uint64_t train_seed(const RunConfig& rc);

void write_resolved(const RunConfig& rc, const std::string& dir);  // dir/config.json

}  // namespace mcu::cfg
