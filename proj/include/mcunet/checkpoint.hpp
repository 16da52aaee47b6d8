#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcunet/model.hpp"
#include "mcunet/nn.hpp"

// Checkpoint directory: manifest.json plus raw little-endian fp64 arrays.
//   params.bin  every parameter tensor, registry order
//   optim.bin   first moments then second moments, same order (only written
//               when optimizer state is present)
// The manifest records the versioned model config and the (name, shape) list;
// loading rebuilds the expected registry from the config and refuses any
// mismatch, so a checkpoint can never silently bind to the wrong model.

namespace mcu::ckpt {

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);  // unknown/missing keys rejected

struct OptimState {
  std::int64_t step = 0;
  std::vector<Tensor> m, v;  // parallel to ParamSet items; empty = no state
};

struct Checkpoint {
  ModelConfig config;
  nn::ParamSet params;
  OptimState optim;
  nlohmann::json extra;  // free-form training progress (epoch, best metric, ...)
};

void save_checkpoint(const std::string& dir, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace mcu::ckpt
