#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "creagen/model.hpp"
#include "creagen/train_config.hpp"

namespace creagen {

// Everything needed to resume a run bit-for-bit: parameters, optimizer
// moments, step counter, and RNG state, plus the configs and the hash of
// the vocabulary the model was trained against.
struct Checkpoint {
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  ModelParams<float> params;
  long step = 0;
  long adam_step = 0;
  std::vector<Mat<float>> adam_m, adam_v;  // empty when no optimizer state
  std::array<std::uint64_t, 4> rng_state{};
  std::uint64_t vocab_hash = 0;
};

// Single-file binary archive: magic+version, JSON config header, named
// float32 arrays, and a trailing content checksum.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace creagen
