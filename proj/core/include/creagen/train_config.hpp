#pragma once

#include <cstdint>
#include <stdexcept>

namespace creagen {

// Optimization-side knobs. Model dimensions and sequence budgets live in
// ModelConfig; a run is described by the (ModelConfig, TrainConfig) pair.
struct TrainConfig {
  double lr = 2e-5;
  int epochs = 1;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int max_steps = 0;  // 0 = bounded by epochs only

  double lambda_cls = 1.0;
  double lambda_align = 1.0;
  double lambda_recon = 1.0;
  double tau = 0.07;

  int n_neg = 1;  // sampled negatives per positive cls example

  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;

  // When true, losses whose lambda is zero are still evaluated (forward
  // only) for the metrics log; they never contribute gradient.
  bool log_unweighted = false;

  void validate() const {
    if (!(lr > 0)) throw std::invalid_argument("train config: lr must be > 0");
    if (batch_size < 1)
      throw std::invalid_argument("train config: batch size must be >= 1");
    if (epochs < 0 || max_steps < 0 || n_neg < 0)
      throw std::invalid_argument("train config: negative counts");
    if (lambda_cls < 0 || lambda_align < 0 || lambda_recon < 0)
      throw std::invalid_argument("train config: loss weights must be >= 0");
    if (!(tau > 0))
      throw std::invalid_argument("train config: tau must be > 0");
  }
};

struct StepMetrics {
  long step = 0;
  double gen = 0, cls = 0, align = 0, recon = 0, total = 0;
};

}  // namespace creagen
