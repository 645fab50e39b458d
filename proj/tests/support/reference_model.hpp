#pragma once

// Independent scalar-forward oracle. Recomputes the documented forward
// passes with plain nested loops in double precision, sharing only the
// parameter containers with the implementation, never its code paths.

#include <cmath>
#include <optional>
#include <vector>

#include "creagen/creative.hpp"
#include "creagen/decoder.hpp"
#include "creagen/encoders.hpp"
#include "creagen/mixer.hpp"

namespace refmodel {

using creagen::DecoderParams;
using creagen::ItemEncoderParams;
using creagen::MixerParams;
using creagen::TrunkParams;
using creagen::UserEncoderParams;

using VecD = std::vector<double>;
using MatD = std::vector<VecD>;

inline double ref_gelu(double x) {
  return 0.5 * x *
         (1.0 + std::tanh(std::sqrt(2.0 / M_PI) *
                          (x + 0.044715 * x * x * x)));
}

inline VecD ref_layer_norm(const VecD& x, const creagen::Mat<double>& gain,
                           const creagen::Mat<double>& bias) {
  const std::size_t d = x.size();
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const double rstd = 1.0 / std::sqrt(var + 1e-5);
  VecD out(d);
  for (std::size_t j = 0; j < d; ++j)
    out[j] = (x[j] - mean) * rstd * gain(0, static_cast<Eigen::Index>(j)) +
             bias(0, static_cast<Eigen::Index>(j));
  return out;
}

inline MatD ref_trunk(const TrunkParams<double>& p, MatD x) {
  const int d = p.cfg.d_model;
  const int heads = p.cfg.n_heads;
  const int hd = d / heads;
  const std::size_t s = x.size();

  for (const auto& block : p.blocks) {
    // attention
    MatD normed(s);
    for (std::size_t i = 0; i < s; ++i)
      normed[i] = ref_layer_norm(x[i], block.ln1_g, block.ln1_b);

    MatD q(s, VecD(d)), k(s, VecD(d)), v(s, VecD(d));
    for (std::size_t i = 0; i < s; ++i) {
      for (int c = 0; c < 3 * d; ++c) {
        double acc = block.attn_b(0, c);
        for (int r = 0; r < d; ++r)
          acc += normed[i][static_cast<std::size_t>(r)] * block.attn_w(r, c);
        if (c < d) q[i][static_cast<std::size_t>(c)] = acc;
        else if (c < 2 * d) k[i][static_cast<std::size_t>(c - d)] = acc;
        else v[i][static_cast<std::size_t>(c - 2 * d)] = acc;
      }
    }

    MatD attended(s, VecD(d, 0.0));
    for (int h = 0; h < heads; ++h) {
      const int off = h * hd;
      for (std::size_t i = 0; i < s; ++i) {
        VecD scores(i + 1);
        double max_score = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          double dot = 0;
          for (int c = 0; c < hd; ++c)
            dot += q[i][static_cast<std::size_t>(off + c)] *
                   k[j][static_cast<std::size_t>(off + c)];
          scores[j] = dot / std::sqrt(static_cast<double>(hd));
          max_score = std::max(max_score, scores[j]);
        }
        double denom = 0;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_score);
          denom += scores[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double w = scores[j] / denom;
          for (int c = 0; c < hd; ++c)
            attended[i][static_cast<std::size_t>(off + c)] +=
                w * v[j][static_cast<std::size_t>(off + c)];
        }
      }
    }

    for (std::size_t i = 0; i < s; ++i) {
      VecD proj(d);
      for (int c = 0; c < d; ++c) {
        double acc = block.attn_proj_b(0, c);
        for (int r = 0; r < d; ++r)
          acc += attended[i][static_cast<std::size_t>(r)] *
                 block.attn_proj_w(r, c);
        proj[static_cast<std::size_t>(c)] = acc;
      }
      for (int c = 0; c < d; ++c)
        x[i][static_cast<std::size_t>(c)] += proj[static_cast<std::size_t>(c)];
    }

    // feed forward
    for (std::size_t i = 0; i < s; ++i) {
      const VecD normed2 = ref_layer_norm(x[i], block.ln2_g, block.ln2_b);
      VecD hidden(static_cast<std::size_t>(4 * d));
      for (int c = 0; c < 4 * d; ++c) {
        double acc = block.mlp_fc_b(0, c);
        for (int r = 0; r < d; ++r)
          acc += normed2[static_cast<std::size_t>(r)] * block.mlp_fc_w(r, c);
        hidden[static_cast<std::size_t>(c)] = ref_gelu(acc);
      }
      for (int c = 0; c < d; ++c) {
        double acc = block.mlp_proj_b(0, c);
        for (int r = 0; r < 4 * d; ++r)
          acc += hidden[static_cast<std::size_t>(r)] * block.mlp_proj_w(r, c);
        x[i][static_cast<std::size_t>(c)] += acc;
      }
    }
  }

  for (std::size_t i = 0; i < s; ++i)
    x[i] = ref_layer_norm(x[i], p.lnf_g, p.lnf_b);
  return x;
}

inline VecD ref_encode_item(const ItemEncoderParams<double>& p,
                            std::vector<int> tokens) {
  tokens.push_back(creagen::Vocabulary::kItem);
  const int d = p.trunk.cfg.d_model;
  MatD x(tokens.size(), VecD(static_cast<std::size_t>(d)));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (int c = 0; c < d; ++c)
      x[i][static_cast<std::size_t>(c)] =
          p.tok_emb(tokens[i], c) + p.pos_emb(static_cast<Eigen::Index>(i), c);
  return ref_trunk(p.trunk, std::move(x)).back();
}

inline VecD ref_encode_user(const UserEncoderParams<double>& p,
                            const MatD& item_embs) {
  const int d = p.trunk.cfg.d_model;
  MatD x(item_embs.size() + 1, VecD(static_cast<std::size_t>(d)));
  for (std::size_t i = 0; i < item_embs.size(); ++i)
    for (int c = 0; c < d; ++c)
      x[i][static_cast<std::size_t>(c)] =
          item_embs[i][static_cast<std::size_t>(c)] +
          p.pos_emb(static_cast<Eigen::Index>(i), c);
  for (int c = 0; c < d; ++c)
    x.back()[static_cast<std::size_t>(c)] =
        p.user_token(0, c) +
        p.pos_emb(static_cast<Eigen::Index>(item_embs.size()), c);
  return ref_trunk(p.trunk, std::move(x)).back();
}

// Logits at every position of [prefix?, tokens...].
inline MatD ref_decoder_logits(const DecoderParams<double>& p,
                               const std::optional<VecD>& prefix,
                               const std::vector<int>& tokens) {
  const int d = p.trunk.cfg.d_model;
  const std::size_t offset = prefix ? 1 : 0;
  MatD x(offset + tokens.size(), VecD(static_cast<std::size_t>(d)));
  if (prefix)
    for (int c = 0; c < d; ++c)
      x[0][static_cast<std::size_t>(c)] =
          (*prefix)[static_cast<std::size_t>(c)] + p.pos_emb(0, c);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (int c = 0; c < d; ++c)
      x[offset + i][static_cast<std::size_t>(c)] =
          p.tok_emb(tokens[i], c) +
          p.pos_emb(static_cast<Eigen::Index>(offset + i), c);
  const MatD h = ref_trunk(p.trunk, std::move(x));

  const auto vocab = static_cast<std::size_t>(p.lm_w.cols());
  MatD logits(h.size(), VecD(vocab));
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t vtok = 0; vtok < vocab; ++vtok) {
      double acc = p.lm_b(0, static_cast<Eigen::Index>(vtok));
      for (int r = 0; r < d; ++r)
        acc += h[i][static_cast<std::size_t>(r)] *
               p.lm_w(r, static_cast<Eigen::Index>(vtok));
      logits[i][vtok] = acc;
    }
  return logits;
}

inline double ref_mixer_logit(const MixerParams<double>& p, const VecD& u,
                              const VecD& e) {
  const int d = p.cfg.d_model;
  MatD x = {u, e};
  for (const auto& layer : p.layers) {
    // token mixing across the two rows, one channel at a time
    MatD normed = {ref_layer_norm(x[0], layer.ln1_g, layer.ln1_b),
                   ref_layer_norm(x[1], layer.ln1_g, layer.ln1_b)};
    const auto hidden_n = static_cast<std::size_t>(layer.tok_w1.rows());
    for (int c = 0; c < d; ++c) {
      VecD hidden(hidden_n);
      for (std::size_t hrow = 0; hrow < hidden_n; ++hrow) {
        double acc = layer.tok_b1(static_cast<Eigen::Index>(hrow), 0);
        for (int t = 0; t < 2; ++t)
          acc += layer.tok_w1(static_cast<Eigen::Index>(hrow), t) *
                 normed[static_cast<std::size_t>(t)]
                       [static_cast<std::size_t>(c)];
        hidden[hrow] = ref_gelu(acc);
      }
      for (int t = 0; t < 2; ++t) {
        double acc = layer.tok_b2(t, 0);
        for (std::size_t hrow = 0; hrow < hidden_n; ++hrow)
          acc += layer.tok_w2(t, static_cast<Eigen::Index>(hrow)) * hidden[hrow];
        x[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] += acc;
      }
    }
    // channel mixing per row
    for (int t = 0; t < 2; ++t) {
      const VecD normed2 = ref_layer_norm(x[static_cast<std::size_t>(t)],
                                          layer.ln2_g, layer.ln2_b);
      const auto hn = static_cast<std::size_t>(layer.chan_w1.cols());
      VecD hidden(hn);
      for (std::size_t hcol = 0; hcol < hn; ++hcol) {
        double acc = layer.chan_b1(0, static_cast<Eigen::Index>(hcol));
        for (int r = 0; r < d; ++r)
          acc += normed2[static_cast<std::size_t>(r)] *
                 layer.chan_w1(r, static_cast<Eigen::Index>(hcol));
        hidden[hcol] = ref_gelu(acc);
      }
      for (int c = 0; c < d; ++c) {
        double acc = layer.chan_b2(0, c);
        for (std::size_t hcol = 0; hcol < hn; ++hcol)
          acc += hidden[hcol] * layer.chan_w2(static_cast<Eigen::Index>(hcol), c);
        x[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] += acc;
      }
    }
  }
  VecD pooled(static_cast<std::size_t>(d));
  const VecD r0 = ref_layer_norm(x[0], p.lnf_g, p.lnf_b);
  const VecD r1 = ref_layer_norm(x[1], p.lnf_g, p.lnf_b);
  for (int c = 0; c < d; ++c)
    pooled[static_cast<std::size_t>(c)] =
        0.5 * (r0[static_cast<std::size_t>(c)] + r1[static_cast<std::size_t>(c)]);
  double logit = p.head_b(0, 0);
  for (int c = 0; c < d; ++c)
    logit += pooled[static_cast<std::size_t>(c)] * p.head_w(c, 0);
  return logit;
}

// Mean cross entropy of row-softmax logits against targets.
inline double ref_cross_entropy(const MatD& logits,
                                const std::vector<int>& targets) {
  double total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double max_logit = -1e300;
    for (double v : logits[i]) max_logit = std::max(max_logit, v);
    double denom = 0;
    for (double v : logits[i]) denom += std::exp(v - max_logit);
    total += std::log(denom) + max_logit -
             logits[i][static_cast<std::size_t>(targets[i])];
  }
  return total / static_cast<double>(targets.size());
}

inline double ref_cosine(const VecD& a, const VecD& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// InfoNCE with cosine similarity, diagonal positives.
inline double ref_infonce(const MatD& users, const MatD& features, double tau) {
  const std::size_t n = users.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    VecD row(n);
    double max_v = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = ref_cosine(users[i], features[j]) / tau;
      max_v = std::max(max_v, row[j]);
    }
    double denom = 0;
    for (double v : row) denom += std::exp(v - max_v);
    total += std::log(denom) + max_v - row[i];
  }
  return total / static_cast<double>(n);
}

inline double ref_bce(double logit, int label) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return label ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace refmodel
