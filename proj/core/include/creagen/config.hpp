#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "creagen/creative.hpp"
#include "creagen/datagen.hpp"
#include "creagen/kmeans.hpp"
#include "creagen/model.hpp"
#include "creagen/teacher.hpp"
#include "creagen/train_config.hpp"

namespace creagen {

struct InferenceConfig {
  int cluster_k = 256;
  int kmeans_max_iters = 100;
  bool kmeans_plus_plus = false;
  int top_k_query_aware = 1;
  int top_k_query_free = 5;
};

struct ClientConfig {
  std::string kind = "mock";  // mock | http
  double mock_hallucination_rate = 0.25;
  HttpTeacherConfig http;
};

// The whole run, loaded from a `key = value` file. Unknown keys are
// rejected; secrets (the teacher auth token) come from the environment
// variable the config names, never from the file.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  InferenceConfig inference;
  DecodeConfig decode;
  ClientConfig client;
  DatagenConfig datagen;
  int eval_limit = 0;

  static RunConfig load(const std::string& path);
  void apply_line(const std::string& key, const std::string& value);

  // Stable hash of every setting, logged with each run.
  std::uint64_t content_hash() const;
  std::string dump() const;  // canonical key = value rendering
};

std::unique_ptr<TeacherClient> make_teacher_client(const ClientConfig& cfg);

}  // namespace creagen
