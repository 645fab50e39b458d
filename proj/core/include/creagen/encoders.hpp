#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/nn.hpp"
#include "creagen/vocab.hpp"

// The hierarchical encoder pair. The item encoder maps an item's token
// sequence (with a trailing [item] token) to one embedding; the user encoder
// maps the sequence of item embeddings (with a trailing learned [user] slot)
// to one user embedding. Both read the hidden state at the trailing special
// position.

namespace creagen {

template <typename T>
struct ItemEncoderParams {
  Mat<T> tok_emb;  // vocab x d
  Mat<T> pos_emb;  // max_positions x d
  TrunkParams<T> trunk;
};

template <typename T>
void item_encoder_init(ItemEncoderParams<T>& p, int vocab_size,
                       const TransformerConfig& cfg, Rng& rng,
                       double init_std) {
  p.tok_emb.resize(vocab_size, cfg.d_model);
  fill_normal(p.tok_emb, rng, init_std);
  p.pos_emb.resize(cfg.max_positions, cfg.d_model);
  fill_normal(p.pos_emb, rng, init_std);
  trunk_init(p.trunk, cfg, rng, init_std);
}

template <typename T>
void item_encoder_collect(ItemEncoderParams<T>& p, const std::string& prefix,
                          ParamList<T>& out) {
  out.push_back({prefix + ".tok_emb", &p.tok_emb});
  out.push_back({prefix + ".pos_emb", &p.pos_emb});
  trunk_collect(p.trunk, prefix + ".trunk", out);
}

template <typename T>
ItemEncoderParams<T> item_encoder_zeros_like(const ItemEncoderParams<T>& p) {
  ItemEncoderParams<T> g;
  g.tok_emb = Mat<T>::Zero(p.tok_emb.rows(), p.tok_emb.cols());
  g.pos_emb = Mat<T>::Zero(p.pos_emb.rows(), p.pos_emb.cols());
  g.trunk = trunk_zeros_like(p.trunk);
  return g;
}

template <typename T>
struct ItemEncoderActs {
  std::vector<int> seq;  // tokens with [item] appended
  Mat<T> x;
  TrunkActs<T> trunk;
};

// Hidden state at the appended [item] position. Tokens must be non-empty and
// already truncated to the item-token budget.
template <typename T>
Vec<T> encode_item(const ItemEncoderParams<T>& p, std::span<const int> tokens,
                   ItemEncoderActs<T>& acts) {
  if (tokens.empty())
    throw std::invalid_argument("encode_item: item has no text tokens");
  acts.seq.assign(tokens.begin(), tokens.end());
  acts.seq.push_back(Vocabulary::kItem);
  const auto s = static_cast<Eigen::Index>(acts.seq.size());
  if (s > p.pos_emb.rows())
    throw std::invalid_argument("encode_item: sequence exceeds max positions");
  acts.x.resize(s, p.tok_emb.cols());
  for (Eigen::Index i = 0; i < s; ++i)
    acts.x.row(i) = p.tok_emb.row(acts.seq[static_cast<std::size_t>(i)]) +
                    p.pos_emb.row(i);
  const Mat<T>& h = trunk_forward(p.trunk, acts.x, acts.trunk);
  return h.row(s - 1).transpose();
}

template <typename T>
void encode_item_backward(const ItemEncoderParams<T>& p,
                          const ItemEncoderActs<T>& acts, const Vec<T>& d_emb,
                          ItemEncoderParams<T>& grads) {
  const auto s = static_cast<Eigen::Index>(acts.seq.size());
  Mat<T> dh = Mat<T>::Zero(s, p.tok_emb.cols());
  dh.row(s - 1) = d_emb.transpose();
  Mat<T> dx = Mat<T>::Zero(s, p.tok_emb.cols());
  trunk_backward(p.trunk, acts.trunk, dh, grads.trunk, dx);
  for (Eigen::Index i = 0; i < s; ++i) {
    grads.tok_emb.row(acts.seq[static_cast<std::size_t>(i)]) += dx.row(i);
    grads.pos_emb.row(i) += dx.row(i);
  }
}

template <typename T>
struct UserEncoderParams {
  Mat<T> user_token;  // 1 x d, the learned [user] slot
  Mat<T> pos_emb;     // (max_history + 1) x d
  TrunkParams<T> trunk;
};

template <typename T>
void user_encoder_init(UserEncoderParams<T>& p, const TransformerConfig& cfg,
                       Rng& rng, double init_std) {
  p.user_token.resize(1, cfg.d_model);
  fill_normal(p.user_token, rng, init_std);
  p.pos_emb.resize(cfg.max_positions, cfg.d_model);
  fill_normal(p.pos_emb, rng, init_std);
  trunk_init(p.trunk, cfg, rng, init_std);
}

template <typename T>
void user_encoder_collect(UserEncoderParams<T>& p, const std::string& prefix,
                          ParamList<T>& out) {
  out.push_back({prefix + ".user_token", &p.user_token});
  out.push_back({prefix + ".pos_emb", &p.pos_emb});
  trunk_collect(p.trunk, prefix + ".trunk", out);
}

template <typename T>
UserEncoderParams<T> user_encoder_zeros_like(const UserEncoderParams<T>& p) {
  UserEncoderParams<T> g;
  g.user_token = Mat<T>::Zero(p.user_token.rows(), p.user_token.cols());
  g.pos_emb = Mat<T>::Zero(p.pos_emb.rows(), p.pos_emb.cols());
  g.trunk = trunk_zeros_like(p.trunk);
  return g;
}

template <typename T>
struct UserEncoderActs {
  Mat<T> x;
  TrunkActs<T> trunk;
};

// Hidden state at the trailing [user] position over the item-embedding
// sequence (rows of item_embs, most-recent-last). Caller truncates the
// history to the most recent max_history items beforehand.
template <typename T>
Vec<T> encode_user(const UserEncoderParams<T>& p, const Mat<T>& item_embs,
                   UserEncoderActs<T>& acts) {
  const Eigen::Index n = item_embs.rows();
  if (n == 0)
    throw std::invalid_argument("encode_user: empty item embedding sequence");
  if (item_embs.cols() != p.user_token.cols())
    throw std::invalid_argument("encode_user: item embedding width mismatch");
  if (n + 1 > p.pos_emb.rows())
    throw std::invalid_argument("encode_user: history exceeds max positions");
  acts.x.resize(n + 1, item_embs.cols());
  acts.x.topRows(n) = item_embs + p.pos_emb.topRows(n);
  acts.x.row(n) = p.user_token.row(0) + p.pos_emb.row(n);
  const Mat<T>& h = trunk_forward(p.trunk, acts.x, acts.trunk);
  return h.row(n).transpose();
}

template <typename T>
void encode_user_backward(const UserEncoderParams<T>& p,
                          const UserEncoderActs<T>& acts, const Vec<T>& d_user,
                          UserEncoderParams<T>& grads, Mat<T>& d_item_embs) {
  const Eigen::Index n = acts.x.rows() - 1;
  Mat<T> dh = Mat<T>::Zero(n + 1, acts.x.cols());
  dh.row(n) = d_user.transpose();
  Mat<T> dx = Mat<T>::Zero(n + 1, acts.x.cols());
  trunk_backward(p.trunk, acts.trunk, dh, grads.trunk, dx);
  d_item_embs += dx.topRows(n);
  grads.user_token.row(0) += dx.row(n);
  grads.pos_emb.topRows(n + 1) += dx;
}

}  // namespace creagen
