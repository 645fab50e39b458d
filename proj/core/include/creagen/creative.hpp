#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/decoder.hpp"
#include "creagen/rng.hpp"
#include "creagen/types.hpp"
#include "creagen/vocab.hpp"

// Prefix-conditioned title generation: the user embedding is projected into
// the decoder's embedding space, occupies one soft-token slot, and is
// followed by ad-constraint tokens, an optional [sep] + query, and [bos].

namespace creagen {

template <typename T>
struct ProjectionParams {
  Mat<T> w;  // d_user x d_creative
  Mat<T> b;  // 1 x d_creative
};

template <typename T>
void projection_init(ProjectionParams<T>& p, int d_user, int d_creative,
                     Rng& rng, double init_std) {
  p.w.resize(d_user, d_creative);
  fill_normal(p.w, rng, init_std);
  p.b = Mat<T>::Zero(1, d_creative);
}

template <typename T>
void projection_collect(ProjectionParams<T>& p, const std::string& prefix,
                        ParamList<T>& out) {
  out.push_back({prefix + ".w", &p.w});
  out.push_back({prefix + ".b", &p.b});
}

template <typename T>
ProjectionParams<T> projection_zeros_like(const ProjectionParams<T>& p) {
  ProjectionParams<T> g;
  g.w = Mat<T>::Zero(p.w.rows(), p.w.cols());
  g.b = Mat<T>::Zero(p.b.rows(), p.b.cols());
  return g;
}

// Affine map of the user embedding into decoder space.
template <typename T>
Vec<T> project_user(const ProjectionParams<T>& p, const Vec<T>& user_emb) {
  if (user_emb.size() != p.w.rows())
    throw std::invalid_argument("project_user: dimension mismatch");
  return p.w.transpose() * user_emb + p.b.row(0).transpose();
}

template <typename T>
void project_user_backward(const ProjectionParams<T>& p, const Vec<T>& user_emb,
                           const Vec<T>& d_out, ProjectionParams<T>& grads,
                           Vec<T>& d_user_emb) {
  grads.w += user_emb * d_out.transpose();
  grads.b += d_out.transpose();
  d_user_emb += p.w * d_out;
}

struct PromptLimits {
  int max_ad_tokens = 96;
  int max_query_tokens = 16;
};

// Deterministic token plan following the user-embedding slot:
//   ad tokens [, [sep], query tokens ], [bos]
template <typename T>
struct CreativePrompt {
  Vec<T> user_embedding;
  Ad ad;
  std::optional<std::string> query;
  std::vector<int> tokens;
};

inline std::vector<int> prompt_tokens_for(const Ad& ad,
                                          const std::optional<std::string>& query,
                                          const Vocabulary& vocab,
                                          const PromptLimits& limits = {}) {
  std::vector<int> tokens =
      tokenize(flatten_item_text(ad_as_item(ad)), vocab, limits.max_ad_tokens);
  if (query && !query->empty()) {
    tokens.push_back(Vocabulary::kSep);
    const auto q = tokenize(*query, vocab, limits.max_query_tokens);
    tokens.insert(tokens.end(), q.begin(), q.end());
  }
  tokens.push_back(Vocabulary::kBos);
  return tokens;
}

template <typename T>
CreativePrompt<T> build_creative_prompt(const Vec<T>& user_emb, const Ad& ad,
                                        const std::optional<std::string>& query,
                                        const Vocabulary& vocab,
                                        const PromptLimits& limits = {}) {
  CreativePrompt<T> prompt;
  prompt.user_embedding = user_emb;
  prompt.ad = ad;
  prompt.query = query;
  prompt.tokens = prompt_tokens_for(ad, query, vocab, limits);
  return prompt;
}

template <typename T>
struct CreativeActs {
  Vec<T> prefix;            // projected user embedding
  DecoderActs<T> dec;
  Eigen::Index logit_begin = 0;  // hidden row of [bos]
  std::vector<int> targets;      // r_1..r_L, [eos]
};

// Teacher-forced logits at every response-predicting position. Row j holds
// the prediction of target j, where targets are the response tokens followed
// by [eos]; prompt positions are never supervised.
template <typename T>
Mat<T> creative_forward(const ProjectionParams<T>& proj,
                        const DecoderParams<T>& dec,
                        const CreativePrompt<T>& prompt,
                        std::span<const int> response_tokens,
                        CreativeActs<T>& acts) {
  if (response_tokens.empty())
    throw std::invalid_argument("creative_forward: empty response");
  acts.prefix = project_user(proj, prompt.user_embedding);

  std::vector<int> seq = prompt.tokens;
  seq.insert(seq.end(), response_tokens.begin(), response_tokens.end());
  decoder_hidden(dec, &acts.prefix, std::span<const int>(seq), acts.dec);

  // Position of [bos] in the full sequence (prefix occupies row 0).
  acts.logit_begin = static_cast<Eigen::Index>(prompt.tokens.size());
  acts.targets.assign(response_tokens.begin(), response_tokens.end());
  acts.targets.push_back(Vocabulary::kEos);
  return decoder_logits(dec, acts.dec, acts.logit_begin,
                        static_cast<Eigen::Index>(acts.targets.size()));
}

template <typename T>
void creative_backward(const ProjectionParams<T>& proj,
                       const DecoderParams<T>& dec,
                       const CreativePrompt<T>& prompt,
                       const CreativeActs<T>& acts, const Mat<T>& d_logits,
                       ProjectionParams<T>& proj_grads,
                       DecoderParams<T>& dec_grads, Vec<T>& d_user_emb) {
  Vec<T> d_prefix = Vec<T>::Zero(acts.prefix.size());
  decoder_backward_logits(dec, acts.dec, acts.logit_begin, d_logits, dec_grads,
                          &d_prefix);
  project_user_backward(proj, prompt.user_embedding, d_prefix, proj_grads,
                        d_user_emb);
}

// ---- decoding ----

struct DecodeConfig {
  enum class Mode { kGreedy, kSampling };
  Mode mode = Mode::kGreedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_new_tokens = 32;
};

template <typename T>
int sample_from_logits(const Mat<T>& logits_row, double temperature, Rng& rng) {
  const Eigen::Index n = logits_row.cols();
  Vec<double> probs(n);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j)
    max_logit = std::max(max_logit,
                         static_cast<double>(logits_row(0, j)) / temperature);
  double denom = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    probs(j) = std::exp(static_cast<double>(logits_row(0, j)) / temperature -
                        max_logit);
    denom += probs(j);
  }
  const double r = rng.uniform_real() * denom;
  double acc = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += probs(j);
    if (r < acc) return static_cast<int>(j);
  }
  return static_cast<int>(n - 1);
}

// Autoregressive decode from the prompt. Greedy mode is a pure function of
// (prompt, params, config); sampling is deterministic given the seed.
// Stops at [eos] or max_new_tokens.
template <typename T>
std::vector<int> generate_tokens(const ProjectionParams<T>& proj,
                                 const DecoderParams<T>& dec,
                                 const CreativePrompt<T>& prompt,
                                 const DecodeConfig& cfg) {
  const Vec<T> prefix = project_user(proj, prompt.user_embedding);
  std::vector<int> seq = prompt.tokens;
  std::vector<int> generated;
  Rng rng(cfg.seed);
  const auto position_budget = static_cast<std::size_t>(dec.pos_emb.rows());
  for (int step = 0; step < cfg.max_new_tokens; ++step) {
    if (seq.size() + 1 >= position_budget) break;
    DecoderActs<T> acts;
    decoder_hidden(dec, &prefix, std::span<const int>(seq), acts);
    const Mat<T> logits = decoder_logits(
        dec, acts, static_cast<Eigen::Index>(seq.size()), 1);
    int next;
    if (cfg.mode == DecodeConfig::Mode::kGreedy) {
      Eigen::Index arg = 0;
      logits.row(0).maxCoeff(&arg);
      next = static_cast<int>(arg);
    } else {
      next = sample_from_logits(logits, cfg.temperature, rng);
    }
    if (next == Vocabulary::kEos) break;
    generated.push_back(next);
    seq.push_back(next);
  }
  return generated;
}

template <typename T>
std::string generate_title(const ProjectionParams<T>& proj,
                           const DecoderParams<T>& dec,
                           const CreativePrompt<T>& prompt,
                           const DecodeConfig& cfg, const Vocabulary& vocab) {
  return vocab.decode_text(generate_tokens(proj, dec, prompt, cfg));
}

}  // namespace creagen
