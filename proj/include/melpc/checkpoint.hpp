#pragma once

#include <cstdint>
#include <string>

#include "melpc/prednet.hpp"

namespace melpc::model {

// Checkpoint file: magic "PNCK", version u16, length-prefixed UTF-8 config
// blob (key=value lines: model hyperparameters, adam_step, config_hash,
// has_moments), then named tensors as (name length u32, name, rank u32, dims
// u32 each, f32 little-endian data). Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const PredNet& net, bool include_moments = true);

PredNet load_checkpoint(const std::string& path);

uint64_t fnv1a64(const std::string& text);

}  // namespace melpc::model
