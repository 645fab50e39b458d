#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "creagen/checkpoint.hpp"
#include "creagen/creative.hpp"
#include "creagen/kmeans.hpp"
#include "creagen/types.hpp"
#include "creagen/vocab.hpp"

// Deployment-side workflow: extract user embeddings, cluster them once,
// score clusters per ad with the click predictor, prune to the top-k, and
// batch-generate one candidate per (ad, cluster[, query]).

namespace creagen {

struct UserEmbeddingTable {
  std::vector<std::string> user_ids;
  Mat<float> embeddings;  // one row per user
  int skipped_empty_history = 0;
};

// Deterministic user embeddings for every record with a non-empty history;
// empty-history users are skipped and counted.
UserEmbeddingTable extract_user_embeddings(
    const std::vector<DatasetRecord>& users, const Checkpoint& ckpt,
    const Vocabulary& vocab);

void save_embeddings(const UserEmbeddingTable& table, const std::string& path);
UserEmbeddingTable load_embeddings(const std::string& path);

// K cluster centers over user embeddings with per-user assignments.
struct ClusterModel {
  int k = 0;
  Mat<double> centers;  // k x d
  std::vector<std::string> user_ids;
  std::vector<int> assignment;  // aligned with user_ids
  double inertia = 0;

  int cluster_of(const std::string& user_id) const;
};

ClusterModel cluster_users(const UserEmbeddingTable& table, int k,
                           const KmeansOptions& opts = {});

// Degenerate "no clustering" model: every user is its own center.
ClusterModel identity_clusters(const UserEmbeddingTable& table);

void save_cluster_model(const ClusterModel& model, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

// Predictor score of every cluster center against the ad's item embedding.
std::vector<double> score_clusters(const ClusterModel& clusters, const Ad& ad,
                                   const Checkpoint& ckpt,
                                   const Vocabulary& vocab);

// Ids of the k largest scores, descending; ties broken by the smaller id.
std::vector<int> select_topk(const std::vector<double>& scores, int k);

// An ad as submitted for offline generation, carrying its potential queries.
struct AdInput {
  Ad ad;
  std::vector<std::string> queries;
};

std::vector<AdInput> read_ad_inputs(const std::string& path);
void write_ad_inputs(const std::vector<AdInput>& ads, const std::string& path);

struct GenerationPlan {
  std::string ad_id;
  GenerationMode mode = GenerationMode::kQueryFree;
  std::vector<std::pair<int, double>> clusters;  // (id, score), best first
  std::vector<std::string> queries;              // query-aware only
};

struct PlanOptions {
  GenerationMode mode = GenerationMode::kQueryFree;
  int top_k_query_aware = 1;
  int top_k_query_free = 5;
};

// Top-k cluster selection per ad: top-1 for query-aware, top-5 (default)
// for query-free. Query-aware ads without queries yield an empty plan.
GenerationPlan plan_for_ad(const AdInput& ad, const ClusterModel& clusters,
                           const Checkpoint& ckpt, const Vocabulary& vocab,
                           const PlanOptions& opts);

std::string plan_to_json_line(const GenerationPlan& plan);
GenerationPlan plan_from_json_line(const std::string& line);

struct GenerateOptions {
  PlanOptions plan;
  DecodeConfig decode;
};

struct GenerateOutcome {
  std::vector<CreativeCandidate> candidates;
  std::vector<std::string> skipped;  // "ad_id: reason"
};

// One candidate per (ad, cluster) in query-free mode and per
// (ad, query, top-1 cluster) in query-aware mode. Candidates carry the
// cluster's match score. Deterministic given the decode config.
GenerateOutcome batch_generate(const std::vector<AdInput>& ads,
                               const ClusterModel& clusters,
                               const Checkpoint& ckpt, const Vocabulary& vocab,
                               const GenerateOptions& opts);

// ---- rule-based badcase filtering ----

struct BadcaseConfig {
  std::vector<std::string> location_lexicon;
  std::vector<std::string> brand_lexicon;
  std::vector<std::string> sensitive_lexicon;
  int min_chars = 1;
  int max_chars = 160;

  static BadcaseConfig defaults();
};

// Ordered named rules; the verdict carries the first violated rule's name.
// Rules: fabricated-number, location, brand, sensitive-term, length-bounds.
FilterVerdict badcase_filter(const std::string& title, const Ad& ad,
                             const BadcaseConfig& rules);

// ---- candidate file codec ----

std::string candidate_to_json_line(const CreativeCandidate& c);
CreativeCandidate candidate_from_json_line(const std::string& line);
std::vector<CreativeCandidate> read_candidates(const std::string& path);
void write_candidates(const std::vector<CreativeCandidate>& candidates,
                      const std::string& path);

}  // namespace creagen
