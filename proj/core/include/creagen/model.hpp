#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/creative.hpp"
#include "creagen/decoder.hpp"
#include "creagen/encoders.hpp"
#include "creagen/losses.hpp"
#include "creagen/mixer.hpp"

// The full model: item encoder -> user encoder -> (projection -> creative
// decoder | alignment | reconstruction) plus the click predictor, with a
// joint forward/backward over a token-level training batch. The decoder can
// be shared across its creative / feature-extractor / reconstruction roles
// or split into three networks.

namespace creagen {

struct ModelConfig {
  int vocab_size = 0;

  int enc_d_model = 64;
  int enc_layers = 2;
  int enc_heads = 4;

  int dec_d_model = 128;
  int dec_layers = 2;
  int dec_heads = 4;
  int dec_max_positions = 192;

  int mixer_layers = 2;
  int mixer_hidden = 64;

  int max_history = 500;
  int max_item_tokens = 64;
  int max_ad_tokens = 96;
  int max_query_tokens = 16;
  int max_response_tokens = 48;
  int max_interest_tokens = 48;

  bool share_decoder_weights = true;
  bool align_stop_grad_features = false;
  double init_std = 0.02;

  TransformerConfig item_encoder_config() const {
    return {enc_d_model, enc_heads, enc_layers, max_item_tokens + 1};
  }
  TransformerConfig user_encoder_config() const {
    return {enc_d_model, enc_heads, enc_layers, max_history + 1};
  }
  TransformerConfig decoder_config() const {
    return {dec_d_model, dec_heads, dec_layers, dec_max_positions};
  }
  MixerConfig predictor_config() const {
    return {enc_d_model, mixer_layers, mixer_hidden};
  }
  PromptLimits prompt_limits() const {
    return {max_ad_tokens, max_query_tokens};
  }

  void validate() const {
    if (vocab_size <= 0)
      throw std::invalid_argument("model config: vocab_size not set");
    item_encoder_config().validate();
    user_encoder_config().validate();
    decoder_config().validate();
    if (max_history < 1 || max_item_tokens < 1)
      throw std::invalid_argument("model config: sequence budgets must be >= 1");
  }
};

template <typename T>
struct ModelParams {
  ModelConfig cfg;
  ItemEncoderParams<T> item_enc;
  UserEncoderParams<T> user_enc;
  ProjectionParams<T> proj;
  DecoderParams<T> decoder;
  std::optional<DecoderParams<T>> extractor;   // V network when not shared
  std::optional<DecoderParams<T>> recon_dec;   // interest decoder when not shared
  MixerParams<T> predictor;

  const DecoderParams<T>& extractor_net() const {
    return extractor ? *extractor : decoder;
  }
  DecoderParams<T>& extractor_net() { return extractor ? *extractor : decoder; }
  const DecoderParams<T>& recon_net() const {
    return recon_dec ? *recon_dec : decoder;
  }
  DecoderParams<T>& recon_net() { return recon_dec ? *recon_dec : decoder; }
};

template <typename T>
void model_init(ModelParams<T>& p, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  p.cfg = cfg;
  item_encoder_init(p.item_enc, cfg.vocab_size, cfg.item_encoder_config(), rng,
                    cfg.init_std);
  user_encoder_init(p.user_enc, cfg.user_encoder_config(), rng, cfg.init_std);
  projection_init(p.proj, cfg.enc_d_model, cfg.dec_d_model, rng, cfg.init_std);
  decoder_init(p.decoder, cfg.vocab_size, cfg.decoder_config(), rng,
               cfg.init_std);
  if (!cfg.share_decoder_weights) {
    p.extractor.emplace();
    decoder_init(*p.extractor, cfg.vocab_size, cfg.decoder_config(), rng,
                 cfg.init_std);
    p.recon_dec.emplace();
    decoder_init(*p.recon_dec, cfg.vocab_size, cfg.decoder_config(), rng,
                 cfg.init_std);
  }
  mixer_init(p.predictor, cfg.predictor_config(), rng, cfg.init_std);
}

template <typename T>
void model_collect(ModelParams<T>& p, ParamList<T>& out) {
  item_encoder_collect(p.item_enc, "item_enc", out);
  user_encoder_collect(p.user_enc, "user_enc", out);
  projection_collect(p.proj, "proj", out);
  decoder_collect(p.decoder, "decoder", out);
  if (p.extractor) decoder_collect(*p.extractor, "extractor", out);
  if (p.recon_dec) decoder_collect(*p.recon_dec, "recon_decoder", out);
  mixer_collect(p.predictor, "predictor", out);
}

template <typename T>
ParamList<T> model_params(ModelParams<T>& p) {
  ParamList<T> out;
  model_collect(p, out);
  return out;
}

template <typename T>
ModelParams<T> model_zeros_like(const ModelParams<T>& p) {
  ModelParams<T> g;
  g.cfg = p.cfg;
  g.item_enc = item_encoder_zeros_like(p.item_enc);
  g.user_enc = user_encoder_zeros_like(p.user_enc);
  g.proj = projection_zeros_like(p.proj);
  g.decoder = decoder_zeros_like(p.decoder);
  if (p.extractor) g.extractor = decoder_zeros_like(*p.extractor);
  if (p.recon_dec) g.recon_dec = decoder_zeros_like(*p.recon_dec);
  g.predictor = mixer_zeros_like(p.predictor);
  return g;
}

// ---- token-level batch ----

struct BatchExample {
  std::vector<std::vector<int>> history_tokens;  // most-recent-last
  std::vector<int> prompt_tokens;                // ad [, sep, query], bos
  std::vector<int> response_tokens;
  std::vector<int> interest_tokens;              // may be empty when unused
};

struct ClsPairSpec {
  int example_index = 0;          // whose user embedding
  std::vector<int> item_tokens;   // candidate item text
  int label = 0;
};

struct TrainBatch {
  std::vector<BatchExample> examples;
  std::vector<ClsPairSpec> cls_pairs;
};

template <typename T>
struct LossBreakdown {
  T gen = 0, cls = 0, align = 0, recon = 0, total = 0;
};

// ---- joint forward / backward ----

template <typename T>
struct ExampleActs {
  std::vector<ItemEncoderActs<T>> items;
  Mat<T> item_embs;
  UserEncoderActs<T> user;
  Vec<T> user_emb;
  CreativePrompt<T> prompt;
  CreativeActs<T> creative;
  Mat<T> gen_dlogits;
  Vec<T> proj_for_align;
  DecoderActs<T> extractor;
  Vec<T> feature;  // V
  ReconActs<T> recon;
  Mat<T> recon_dlogits;
};

template <typename T>
struct BatchActs {
  std::vector<ExampleActs<T>> examples;
  std::vector<ItemEncoderActs<T>> cls_item_acts;
  Mat<T> cls_users, cls_items;
  std::vector<int> cls_labels;
  Mat<T> align_users, align_features;
};

namespace detail {

template <typename T>
Vec<T> forward_user_embedding(const ModelParams<T>& p,
                              const BatchExample& example,
                              ExampleActs<T>& acts) {
  const auto n = example.history_tokens.size();
  if (n == 0)
    throw std::invalid_argument("model forward: example with empty history");
  acts.items.resize(n);
  acts.item_embs.resize(static_cast<Eigen::Index>(n), p.cfg.enc_d_model);
  for (std::size_t i = 0; i < n; ++i) {
    acts.item_embs.row(static_cast<Eigen::Index>(i)) =
        encode_item(p.item_enc,
                    std::span<const int>(example.history_tokens[i]),
                    acts.items[i])
            .transpose();
  }
  acts.user_emb = encode_user(p.user_enc, acts.item_embs, acts.user);
  return acts.user_emb;
}

}  // namespace detail

// Runs the full joint objective over a batch. When `grads` is non-null, all
// parameter gradients of the weighted total are accumulated into it.
template <typename T>
LossBreakdown<T> model_loss(const ModelParams<T>& p, const TrainBatch& batch,
                            const LossWeights<T>& weights,
                            ModelParams<T>* grads = nullptr,
                            BatchActs<T>* acts_out = nullptr) {
  weights.validate();
  if (batch.examples.empty())
    throw std::invalid_argument("model_loss: empty batch");
  const auto n = batch.examples.size();
  const T inv_n = static_cast<T>(1) / static_cast<T>(n);
  const bool want_align = weights.lambda_align > 0;
  const bool want_recon = weights.lambda_recon > 0;
  const bool want_cls = weights.lambda_cls > 0 && !batch.cls_pairs.empty();

  BatchActs<T> local;
  BatchActs<T>& acts = acts_out ? *acts_out : local;
  acts.examples.resize(n);

  LossBreakdown<T> out;
  for (std::size_t e = 0; e < n; ++e) {
    const auto& ex = batch.examples[e];
    auto& ea = acts.examples[e];
    detail::forward_user_embedding(p, ex, ea);

    ea.prompt.user_embedding = ea.user_emb;
    ea.prompt.tokens = ex.prompt_tokens;
    const Mat<T> logits =
        creative_forward(p.proj, p.decoder, ea.prompt,
                         std::span<const int>(ex.response_tokens), ea.creative);
    if (grads) {
      ea.gen_dlogits.setZero(logits.rows(), logits.cols());
      out.gen += generative_loss(logits, ea.creative.targets, &ea.gen_dlogits);
    } else {
      out.gen += generative_loss<T>(logits, ea.creative.targets);
    }

    if (want_align || want_recon) {
      if (ex.interest_tokens.empty())
        throw std::invalid_argument(
            "model_loss: align/recon enabled but example has no interest "
            "tokens");
    }
    if (want_align) {
      ea.feature = extract_interest_feature(
          p.extractor_net(), std::span<const int>(ex.interest_tokens),
          ea.extractor);
      ea.proj_for_align = project_user(p.proj, ea.user_emb);
    }
    if (want_recon) {
      out.recon += recon_loss(p.proj, p.recon_net(), ea.user_emb,
                              std::span<const int>(ex.interest_tokens),
                              grads ? &ea.recon : nullptr,
                              grads ? &ea.recon_dlogits : nullptr);
    }
  }
  out.gen *= inv_n;
  out.recon *= inv_n;

  if (want_align) {
    acts.align_users.resize(static_cast<Eigen::Index>(n), p.cfg.dec_d_model);
    acts.align_features.resize(static_cast<Eigen::Index>(n), p.cfg.dec_d_model);
    for (std::size_t e = 0; e < n; ++e) {
      acts.align_users.row(static_cast<Eigen::Index>(e)) =
          acts.examples[e].proj_for_align.transpose();
      acts.align_features.row(static_cast<Eigen::Index>(e)) =
          acts.examples[e].feature.transpose();
    }
  }

  if (want_cls) {
    const auto m = batch.cls_pairs.size();
    acts.cls_item_acts.resize(m);
    acts.cls_users.resize(static_cast<Eigen::Index>(m), p.cfg.enc_d_model);
    acts.cls_items.resize(static_cast<Eigen::Index>(m), p.cfg.enc_d_model);
    acts.cls_labels.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& pair = batch.cls_pairs[i];
      if (pair.example_index < 0 ||
          static_cast<std::size_t>(pair.example_index) >= n)
        throw std::invalid_argument("model_loss: cls pair index out of range");
      acts.cls_users.row(static_cast<Eigen::Index>(i)) =
          acts.examples[static_cast<std::size_t>(pair.example_index)]
              .user_emb.transpose();
      acts.cls_items.row(static_cast<Eigen::Index>(i)) =
          encode_item(p.item_enc, std::span<const int>(pair.item_tokens),
                      acts.cls_item_acts[i])
              .transpose();
      acts.cls_labels[i] = pair.label;
    }
  }

  if (!grads) {
    if (want_align)
      out.align =
          align_loss<T>(acts.align_users, acts.align_features, weights.tau);
    if (want_cls)
      out.cls = cls_loss(p.predictor, acts.cls_users, acts.cls_items,
                         acts.cls_labels);
    out.total = total_loss(out.gen, out.cls, out.align, out.recon, weights);
    return out;
  }

  // ---- backward ----
  std::vector<Vec<T>> d_user(n);
  for (std::size_t e = 0; e < n; ++e)
    d_user[e] = Vec<T>::Zero(p.cfg.enc_d_model);

  for (std::size_t e = 0; e < n; ++e) {
    auto& ea = acts.examples[e];
    const Mat<T> d_logits = ea.gen_dlogits * inv_n;
    creative_backward(p.proj, p.decoder, ea.prompt, ea.creative, d_logits,
                      grads->proj, grads->decoder, d_user[e]);
  }

  if (want_align) {
    Mat<T> d_proj_users =
        Mat<T>::Zero(acts.align_users.rows(), acts.align_users.cols());
    Mat<T> d_features =
        Mat<T>::Zero(acts.align_features.rows(), acts.align_features.cols());
    out.align = align_loss(acts.align_users, acts.align_features, weights.tau,
                           &d_proj_users,
                           p.cfg.align_stop_grad_features ? nullptr : &d_features,
                           weights.lambda_align);
    DecoderParams<T>& ext_grads =
        grads->extractor ? *grads->extractor : grads->decoder;
    for (std::size_t e = 0; e < n; ++e) {
      auto& ea = acts.examples[e];
      const Vec<T> du_proj =
          d_proj_users.row(static_cast<Eigen::Index>(e)).transpose();
      project_user_backward(p.proj, ea.user_emb, du_proj, grads->proj,
                            d_user[e]);
      if (!p.cfg.align_stop_grad_features) {
        const Vec<T> dv =
            d_features.row(static_cast<Eigen::Index>(e)).transpose();
        extract_interest_feature_backward(p.extractor_net(), ea.extractor, dv,
                                          ext_grads);
      }
    }
  }

  if (want_recon) {
    DecoderParams<T>& recon_grads =
        grads->recon_dec ? *grads->recon_dec : grads->decoder;
    for (std::size_t e = 0; e < n; ++e) {
      auto& ea = acts.examples[e];
      const Mat<T> d_logits =
          ea.recon_dlogits * (weights.lambda_recon * inv_n);
      recon_backward(p.proj, p.recon_net(), ea.user_emb, ea.recon, d_logits,
                     grads->proj, recon_grads, d_user[e]);
    }
  }

  if (want_cls) {
    Mat<T> d_users = Mat<T>::Zero(acts.cls_users.rows(), acts.cls_users.cols());
    Mat<T> d_items = Mat<T>::Zero(acts.cls_items.rows(), acts.cls_items.cols());
    out.cls = cls_loss_backward(p.predictor, acts.cls_users, acts.cls_items,
                                acts.cls_labels, weights.lambda_cls,
                                grads->predictor, d_users, d_items);
    for (std::size_t i = 0; i < batch.cls_pairs.size(); ++i) {
      const auto& pair = batch.cls_pairs[i];
      d_user[static_cast<std::size_t>(pair.example_index)] +=
          d_users.row(static_cast<Eigen::Index>(i)).transpose();
      encode_item_backward(
          p.item_enc, acts.cls_item_acts[i],
          Vec<T>(d_items.row(static_cast<Eigen::Index>(i)).transpose()),
          grads->item_enc);
    }
  }

  for (std::size_t e = 0; e < n; ++e) {
    auto& ea = acts.examples[e];
    Mat<T> d_item_embs =
        Mat<T>::Zero(ea.item_embs.rows(), ea.item_embs.cols());
    encode_user_backward(p.user_enc, ea.user, d_user[e], grads->user_enc,
                         d_item_embs);
    for (std::size_t i = 0; i < ea.items.size(); ++i)
      encode_item_backward(
          p.item_enc, ea.items[i],
          Vec<T>(d_item_embs.row(static_cast<Eigen::Index>(i)).transpose()),
          grads->item_enc);
  }

  out.total = total_loss(out.gen, out.cls, out.align, out.recon, weights);
  return out;
}

// User embedding for a tokenized history, outside of training.
template <typename T>
Vec<T> user_embedding(const ModelParams<T>& p,
                      const std::vector<std::vector<int>>& history_tokens) {
  BatchExample ex;
  ex.history_tokens = history_tokens;
  ExampleActs<T> acts;
  return detail::forward_user_embedding(p, ex, acts);
}

// Item embedding for tokenized item text, outside of training.
template <typename T>
Vec<T> item_embedding(const ModelParams<T>& p, std::span<const int> tokens) {
  ItemEncoderActs<T> acts;
  return encode_item(p.item_enc, tokens, acts);
}

}  // namespace creagen
