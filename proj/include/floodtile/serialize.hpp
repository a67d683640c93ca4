#pragma once

#include <memory>
#include <optional>
#include <string>

#include "floodtile/optim.hpp"
#include "floodtile/unet.hpp"

namespace floodtile {

// Binary checkpoint: magic "FTCK", u16 format version, the model config,
// then each named tensor (running statistics flagged) as little-endian
// f32, optionally followed by the optimizer state so a run can resume
// deterministically. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const UNet& model, const Adam* optimizer = nullptr);

struct LoadedCheckpoint {
  std::unique_ptr<UNet> model;
  bool has_optimizer = false;
  AdamConfig adam_config;
  Adam::State adam_state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace floodtile
