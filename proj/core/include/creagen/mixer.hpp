#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/nn.hpp"

// MLP-Mixer over the two-row (user embedding, item embedding) input,
// ending in a scalar click logit. Each layer is a token-mixing MLP across
// the two rows followed by a channel-mixing MLP across features, both
// pre-norm with residuals; the head mean-pools the two rows.

namespace creagen {

struct MixerConfig {
  int d_model = 64;
  int n_layers = 2;
  int hidden = 64;
};

template <typename T>
struct MixerLayerParams {
  Mat<T> ln1_g, ln1_b;      // 1 x d
  Mat<T> tok_w1, tok_b1;    // h x 2, h x 1
  Mat<T> tok_w2, tok_b2;    // 2 x h, 2 x 1
  Mat<T> ln2_g, ln2_b;      // 1 x d
  Mat<T> chan_w1, chan_b1;  // d x h, 1 x h
  Mat<T> chan_w2, chan_b2;  // h x d, 1 x d
};

template <typename T>
struct MixerParams {
  MixerConfig cfg;
  std::vector<MixerLayerParams<T>> layers;
  Mat<T> lnf_g, lnf_b;  // 1 x d
  Mat<T> head_w;        // d x 1
  Mat<T> head_b;        // 1 x 1
};

template <typename T>
void mixer_init(MixerParams<T>& p, const MixerConfig& cfg, Rng& rng,
                double init_std) {
  if (cfg.d_model <= 0 || cfg.n_layers <= 0 || cfg.hidden <= 0)
    throw std::invalid_argument("mixer dims must be positive");
  p.cfg = cfg;
  const int d = cfg.d_model, h = cfg.hidden;
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.ln1_g = Mat<T>::Ones(1, d);
    l.ln1_b = Mat<T>::Zero(1, d);
    l.tok_w1.resize(h, 2);
    fill_normal(l.tok_w1, rng, init_std);
    l.tok_b1 = Mat<T>::Zero(h, 1);
    l.tok_w2.resize(2, h);
    fill_normal(l.tok_w2, rng, init_std);
    l.tok_b2 = Mat<T>::Zero(2, 1);
    l.ln2_g = Mat<T>::Ones(1, d);
    l.ln2_b = Mat<T>::Zero(1, d);
    l.chan_w1.resize(d, h);
    fill_normal(l.chan_w1, rng, init_std);
    l.chan_b1 = Mat<T>::Zero(1, h);
    l.chan_w2.resize(h, d);
    fill_normal(l.chan_w2, rng, init_std);
    l.chan_b2 = Mat<T>::Zero(1, d);
  }
  p.lnf_g = Mat<T>::Ones(1, d);
  p.lnf_b = Mat<T>::Zero(1, d);
  p.head_w = Mat<T>::Zero(d, 1);
  p.head_b = Mat<T>::Zero(1, 1);
}

template <typename T>
void mixer_collect(MixerParams<T>& p, const std::string& prefix,
                   ParamList<T>& out) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string base = prefix + ".layer" + std::to_string(i) + ".";
    out.push_back({base + "ln1_g", &l.ln1_g});
    out.push_back({base + "ln1_b", &l.ln1_b});
    out.push_back({base + "tok_w1", &l.tok_w1});
    out.push_back({base + "tok_b1", &l.tok_b1});
    out.push_back({base + "tok_w2", &l.tok_w2});
    out.push_back({base + "tok_b2", &l.tok_b2});
    out.push_back({base + "ln2_g", &l.ln2_g});
    out.push_back({base + "ln2_b", &l.ln2_b});
    out.push_back({base + "chan_w1", &l.chan_w1});
    out.push_back({base + "chan_b1", &l.chan_b1});
    out.push_back({base + "chan_w2", &l.chan_w2});
    out.push_back({base + "chan_b2", &l.chan_b2});
  }
  out.push_back({prefix + ".lnf_g", &p.lnf_g});
  out.push_back({prefix + ".lnf_b", &p.lnf_b});
  out.push_back({prefix + ".head_w", &p.head_w});
  out.push_back({prefix + ".head_b", &p.head_b});
}

template <typename T>
MixerParams<T> mixer_zeros_like(const MixerParams<T>& p) {
  MixerParams<T> g;
  g.cfg = p.cfg;
  g.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    auto& z = g.layers[i];
    z.ln1_g = Mat<T>::Zero(1, l.ln1_g.cols());
    z.ln1_b = Mat<T>::Zero(1, l.ln1_b.cols());
    z.tok_w1 = Mat<T>::Zero(l.tok_w1.rows(), l.tok_w1.cols());
    z.tok_b1 = Mat<T>::Zero(l.tok_b1.rows(), 1);
    z.tok_w2 = Mat<T>::Zero(l.tok_w2.rows(), l.tok_w2.cols());
    z.tok_b2 = Mat<T>::Zero(l.tok_b2.rows(), 1);
    z.ln2_g = Mat<T>::Zero(1, l.ln2_g.cols());
    z.ln2_b = Mat<T>::Zero(1, l.ln2_b.cols());
    z.chan_w1 = Mat<T>::Zero(l.chan_w1.rows(), l.chan_w1.cols());
    z.chan_b1 = Mat<T>::Zero(1, l.chan_b1.cols());
    z.chan_w2 = Mat<T>::Zero(l.chan_w2.rows(), l.chan_w2.cols());
    z.chan_b2 = Mat<T>::Zero(1, l.chan_b2.cols());
  }
  g.lnf_g = Mat<T>::Zero(1, p.lnf_g.cols());
  g.lnf_b = Mat<T>::Zero(1, p.lnf_b.cols());
  g.head_w = Mat<T>::Zero(p.head_w.rows(), 1);
  g.head_b = Mat<T>::Zero(1, 1);
  return g;
}

template <typename T>
struct MixerLayerActs {
  Mat<T> x;  // layer input, 2 x d
  Mat<T> ln1_out;
  Vec<T> ln1_mean, ln1_rstd;
  Mat<T> tok_pre;  // h x d
  Mat<T> tok_act;  // h x d
  Mat<T> x_mid;    // 2 x d
  Mat<T> ln2_out;
  Vec<T> ln2_mean, ln2_rstd;
  Mat<T> chan_pre;  // 2 x h
  Mat<T> chan_act;  // 2 x h
};

template <typename T>
struct MixerActs {
  std::vector<MixerLayerActs<T>> layers;
  Mat<T> y;  // 2 x d, input to final norm
  Mat<T> lnf_out;
  Vec<T> lnf_mean, lnf_rstd;
  Mat<T> pooled;  // 1 x d
};

// Scalar click logit for a (user embedding, item embedding) pair.
template <typename T>
T mixer_logit(const MixerParams<T>& p, const Vec<T>& user_emb,
              const Vec<T>& item_emb, MixerActs<T>& acts) {
  const int d = p.cfg.d_model;
  if (user_emb.size() != d || item_emb.size() != d)
    throw std::invalid_argument("mixer_logit: embedding width mismatch");
  Mat<T> x(2, d);
  x.row(0) = user_emb.transpose();
  x.row(1) = item_emb.transpose();

  acts.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    auto& a = acts.layers[i];
    a.x = x;
    layer_norm_forward(a.x, l.ln1_g, l.ln1_b, a.ln1_out, a.ln1_mean,
                       a.ln1_rstd);
    a.tok_pre = (l.tok_w1 * a.ln1_out).colwise() + l.tok_b1.col(0);
    a.tok_act = a.tok_pre.unaryExpr([](T u) { return gelu(u); });
    a.x_mid = a.x + ((l.tok_w2 * a.tok_act).colwise() + l.tok_b2.col(0));

    layer_norm_forward(a.x_mid, l.ln2_g, l.ln2_b, a.ln2_out, a.ln2_mean,
                       a.ln2_rstd);
    a.chan_pre = (a.ln2_out * l.chan_w1).rowwise() + l.chan_b1.row(0);
    a.chan_act = a.chan_pre.unaryExpr([](T u) { return gelu(u); });
    x = a.x_mid + ((a.chan_act * l.chan_w2).rowwise() + l.chan_b2.row(0));
  }
  acts.y = x;
  layer_norm_forward(acts.y, p.lnf_g, p.lnf_b, acts.lnf_out, acts.lnf_mean,
                     acts.lnf_rstd);
  acts.pooled = acts.lnf_out.colwise().mean();
  return (acts.pooled * p.head_w)(0, 0) + p.head_b(0, 0);
}

template <typename T>
void mixer_backward(const MixerParams<T>& p, const MixerActs<T>& acts,
                    T d_logit, MixerParams<T>& grads, Vec<T>& d_user_emb,
                    Vec<T>& d_item_emb) {
  grads.head_w += acts.pooled.transpose() * d_logit;
  grads.head_b(0, 0) += d_logit;
  Mat<T> d_pooled = p.head_w.transpose() * d_logit;  // 1 x d
  Mat<T> d_lnf_out = Mat<T>::Zero(2, d_pooled.cols());
  d_lnf_out.row(0) = d_pooled.row(0) * static_cast<T>(0.5);
  d_lnf_out.row(1) = d_pooled.row(0) * static_cast<T>(0.5);

  Mat<T> dy = Mat<T>::Zero(2, d_pooled.cols());
  layer_norm_backward(acts.y, p.lnf_g, acts.lnf_mean, acts.lnf_rstd, d_lnf_out,
                      dy, grads.lnf_g, grads.lnf_b);

  for (std::size_t i = p.layers.size(); i-- > 0;) {
    const auto& l = p.layers[i];
    const auto& a = acts.layers[i];
    auto& g = grads.layers[i];

    // x_out = x_mid + chan_w2^T(gelu(ln2(x_mid) chan_w1))
    Mat<T> dx_mid = dy;
    g.chan_w2 += a.chan_act.transpose() * dy;
    g.chan_b2 += dy.colwise().sum();
    Mat<T> d_chan_act = dy * l.chan_w2.transpose();
    Mat<T> d_chan_pre = d_chan_act.cwiseProduct(
        a.chan_pre.unaryExpr([](T u) { return gelu_grad(u); }));
    g.chan_w1 += a.ln2_out.transpose() * d_chan_pre;
    g.chan_b1 += d_chan_pre.colwise().sum();
    Mat<T> d_ln2 = d_chan_pre * l.chan_w1.transpose();
    layer_norm_backward(a.x_mid, l.ln2_g, a.ln2_mean, a.ln2_rstd, d_ln2, dx_mid,
                        g.ln2_g, g.ln2_b);

    // x_mid = x + tok_w2 gelu(tok_w1 ln1(x))
    Mat<T> dx = dx_mid;
    g.tok_w2 += dx_mid * a.tok_act.transpose();
    g.tok_b2 += dx_mid.rowwise().sum();
    Mat<T> d_tok_act = l.tok_w2.transpose() * dx_mid;
    Mat<T> d_tok_pre = d_tok_act.cwiseProduct(
        a.tok_pre.unaryExpr([](T u) { return gelu_grad(u); }));
    g.tok_w1 += d_tok_pre * a.ln1_out.transpose();
    g.tok_b1 += d_tok_pre.rowwise().sum();
    Mat<T> d_ln1 = l.tok_w1.transpose() * d_tok_pre;
    layer_norm_backward(a.x, l.ln1_g, a.ln1_mean, a.ln1_rstd, d_ln1, dx,
                        g.ln1_g, g.ln1_b);

    dy = std::move(dx);
  }
  d_user_emb += dy.row(0).transpose();
  d_item_emb += dy.row(1).transpose();
}

}  // namespace creagen
