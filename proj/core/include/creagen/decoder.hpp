#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/nn.hpp"
#include "creagen/vocab.hpp"

// Token decoder with an optional continuous prefix slot. One network plays
// three roles: creative title decoder (prefix = projected user embedding),
// user-feature extractor (token sequence ending in [user], hidden state
// read at that position), and interest reconstruction decoder.

namespace creagen {

template <typename T>
struct DecoderParams {
  Mat<T> tok_emb;  // vocab x d
  Mat<T> pos_emb;  // max_positions x d
  TrunkParams<T> trunk;
  Mat<T> lm_w;  // d x vocab
  Mat<T> lm_b;  // 1 x vocab
};

template <typename T>
void decoder_init(DecoderParams<T>& p, int vocab_size,
                  const TransformerConfig& cfg, Rng& rng, double init_std) {
  p.tok_emb.resize(vocab_size, cfg.d_model);
  fill_normal(p.tok_emb, rng, init_std);
  p.pos_emb.resize(cfg.max_positions, cfg.d_model);
  fill_normal(p.pos_emb, rng, init_std);
  trunk_init(p.trunk, cfg, rng, init_std);
  p.lm_w.resize(cfg.d_model, vocab_size);
  fill_normal(p.lm_w, rng, init_std);
  p.lm_b = Mat<T>::Zero(1, vocab_size);
}

template <typename T>
void decoder_collect(DecoderParams<T>& p, const std::string& prefix,
                     ParamList<T>& out) {
  out.push_back({prefix + ".tok_emb", &p.tok_emb});
  out.push_back({prefix + ".pos_emb", &p.pos_emb});
  trunk_collect(p.trunk, prefix + ".trunk", out);
  out.push_back({prefix + ".lm_w", &p.lm_w});
  out.push_back({prefix + ".lm_b", &p.lm_b});
}

template <typename T>
DecoderParams<T> decoder_zeros_like(const DecoderParams<T>& p) {
  DecoderParams<T> g;
  g.tok_emb = Mat<T>::Zero(p.tok_emb.rows(), p.tok_emb.cols());
  g.pos_emb = Mat<T>::Zero(p.pos_emb.rows(), p.pos_emb.cols());
  g.trunk = trunk_zeros_like(p.trunk);
  g.lm_w = Mat<T>::Zero(p.lm_w.rows(), p.lm_w.cols());
  g.lm_b = Mat<T>::Zero(p.lm_b.rows(), p.lm_b.cols());
  return g;
}

template <typename T>
struct DecoderActs {
  bool has_prefix = false;
  std::vector<int> tokens;  // ids at positions (has_prefix ? 1 : 0)..
  Mat<T> x;
  TrunkActs<T> trunk;
};

// Hidden states over [prefix?, tokens...]. The prefix vector, when present,
// occupies position 0 in place of a token embedding.
template <typename T>
const Mat<T>& decoder_hidden(const DecoderParams<T>& p, const Vec<T>* prefix,
                             std::span<const int> tokens,
                             DecoderActs<T>& acts) {
  const Eigen::Index offset = prefix ? 1 : 0;
  const auto s = offset + static_cast<Eigen::Index>(tokens.size());
  if (s == 0) throw std::invalid_argument("decoder_hidden: empty sequence");
  if (s > p.pos_emb.rows())
    throw std::invalid_argument(
        "decoder_hidden: sequence length " + std::to_string(s) +
        " exceeds max positions " + std::to_string(p.pos_emb.rows()));
  acts.has_prefix = prefix != nullptr;
  acts.tokens.assign(tokens.begin(), tokens.end());
  acts.x.resize(s, p.tok_emb.cols());
  if (prefix) {
    if (prefix->size() != p.tok_emb.cols())
      throw std::invalid_argument("decoder_hidden: prefix width mismatch");
    acts.x.row(0) = prefix->transpose() + p.pos_emb.row(0);
  }
  for (std::size_t i = 0; i < acts.tokens.size(); ++i) {
    const auto pos = offset + static_cast<Eigen::Index>(i);
    acts.x.row(pos) = p.tok_emb.row(acts.tokens[i]) + p.pos_emb.row(pos);
  }
  return trunk_forward(p.trunk, acts.x, acts.trunk);
}

// Logits for `count` consecutive positions starting at `begin`.
template <typename T>
Mat<T> decoder_logits(const DecoderParams<T>& p, const DecoderActs<T>& acts,
                      Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || begin + count > acts.trunk.h.rows())
    throw std::invalid_argument("decoder_logits: row range out of bounds");
  return (acts.trunk.h.middleRows(begin, count) * p.lm_w).rowwise() +
         p.lm_b.row(0);
}

template <typename T>
void decoder_backward_from_dh(const DecoderParams<T>& p,
                              const DecoderActs<T>& acts, const Mat<T>& dh,
                              DecoderParams<T>& grads, Vec<T>* d_prefix) {
  const Eigen::Index s = acts.x.rows();
  Mat<T> dx = Mat<T>::Zero(s, acts.x.cols());
  trunk_backward(p.trunk, acts.trunk, dh, grads.trunk, dx);
  const Eigen::Index offset = acts.has_prefix ? 1 : 0;
  if (acts.has_prefix && d_prefix) *d_prefix += dx.row(0).transpose();
  for (std::size_t i = 0; i < acts.tokens.size(); ++i)
    grads.tok_emb.row(acts.tokens[i]) +=
        dx.row(offset + static_cast<Eigen::Index>(i));
  grads.pos_emb.topRows(s) += dx;
}

// Backward from logit gradients at rows [begin, begin+d_logits.rows()).
template <typename T>
void decoder_backward_logits(const DecoderParams<T>& p,
                             const DecoderActs<T>& acts, Eigen::Index begin,
                             const Mat<T>& d_logits, DecoderParams<T>& grads,
                             Vec<T>* d_prefix) {
  const Eigen::Index count = d_logits.rows();
  const auto h_rows = acts.trunk.h.middleRows(begin, count);
  grads.lm_w += h_rows.transpose() * d_logits;
  grads.lm_b += d_logits.colwise().sum();
  Mat<T> dh = Mat<T>::Zero(acts.trunk.h.rows(), acts.trunk.h.cols());
  dh.middleRows(begin, count) += d_logits * p.lm_w.transpose();
  decoder_backward_from_dh(p, acts, dh, grads, d_prefix);
}

// ---- user feature extraction (the V path) ----

// Hidden state at a trailing [user] token appended to the interest text.
// Shares this decoder's weights, so under weight sharing the creative
// decoder's parameters receive this gradient too.
template <typename T>
Vec<T> extract_interest_feature(const DecoderParams<T>& p,
                                std::span<const int> interest_tokens,
                                DecoderActs<T>& acts) {
  if (interest_tokens.empty())
    throw std::invalid_argument(
        "extract_interest_feature: empty interest text");
  std::vector<int> seq(interest_tokens.begin(), interest_tokens.end());
  seq.push_back(Vocabulary::kUser);
  const Mat<T>& h = decoder_hidden(p, static_cast<const Vec<T>*>(nullptr),
                                   std::span<const int>(seq), acts);
  return h.row(h.rows() - 1).transpose();
}

template <typename T>
void extract_interest_feature_backward(const DecoderParams<T>& p,
                                       const DecoderActs<T>& acts,
                                       const Vec<T>& d_feature,
                                       DecoderParams<T>& grads) {
  Mat<T> dh = Mat<T>::Zero(acts.trunk.h.rows(), acts.trunk.h.cols());
  dh.row(dh.rows() - 1) = d_feature.transpose();
  decoder_backward_from_dh(p, acts, dh, grads, static_cast<Vec<T>*>(nullptr));
}

}  // namespace creagen
