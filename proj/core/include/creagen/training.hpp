#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "creagen/checkpoint.hpp"
#include "creagen/model.hpp"
#include "creagen/records.hpp"
#include "creagen/train_config.hpp"
#include "creagen/vocab.hpp"

namespace creagen {

// Unique items across all record histories, in first-appearance order, with
// their token sequences precomputed. Negative sampling draws from here.
struct Corpus {
  std::vector<Item> items;
  std::unordered_map<std::string, int> index;  // item_id -> position
  std::vector<std::vector<int>> item_tokens;

  static Corpus build(const std::vector<DatasetRecord>& records,
                      const Vocabulary& vocab, int max_item_tokens);
};

// Assembles a token-level batch from records: one generative example, one
// alignment/reconstruction target, and positive + sampled-negative click
// pairs per record. Sampled negatives never come from the record's own
// history. Deterministic given the RNG state.
TrainBatch build_batch(const std::vector<const DatasetRecord*>& records,
                       const Corpus& corpus, const Vocabulary& vocab,
                       const ModelConfig& model_cfg,
                       const TrainConfig& train_cfg, Rng& rng);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepMetrics> metrics;
};

// End-to-end joint training. When resume_from is given, parameters,
// optimizer moments, RNG state, and the step counter are restored and the
// run continues on the same schedule; the configs must match the
// checkpoint's except for the epochs / max_steps targets.
TrainResult train(const std::vector<DatasetRecord>& records,
                  const Vocabulary& vocab, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg,
                  const std::function<void(const StepMetrics&)>& on_step = {},
                  const Checkpoint* resume_from = nullptr);

}  // namespace creagen
