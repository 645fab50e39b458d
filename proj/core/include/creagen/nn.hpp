#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "creagen/tensor.hpp"

// Decoder-only transformer trunk used by every network in the model.
//
// Block (pre-norm):
//   a    = layer_norm(x; ln1)
//   qkv  = a * attn_w + attn_b                  [S x 3d]
//   per head: scores = q k^T / sqrt(hd), causal mask, att = softmax(scores)
//   o    = concat_h(att * v) * attn_proj_w + attn_proj_b
//   x2   = x + o
//   b    = layer_norm(x2; ln2)
//   m    = gelu(b * mlp_fc_w + mlp_fc_b) * mlp_proj_w + mlp_proj_b
//   y    = x2 + m
// Trunk output: layer_norm(y_last; lnf).
//
// GELU is the tanh approximation. All backward passes accumulate (+=) into
// their gradient outputs; callers provide zeroed buffers.

namespace creagen {

constexpr double kLayerNormEps = 1e-5;

struct TransformerConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int max_positions = 128;

  void validate() const {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || max_positions <= 0)
      throw std::invalid_argument("transformer dims must be positive");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("d_model must be divisible by n_heads");
  }
};

template <typename T>
T gelu(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / M_PI));
  const T u = c * (x + static_cast<T>(0.044715) * x * x * x);
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::tanh(u));
}

template <typename T>
T gelu_grad(T x) {
  const T c = static_cast<T>(std::sqrt(2.0 / M_PI));
  const T x3 = x * x * x;
  const T u = c * (x + static_cast<T>(0.044715) * x3);
  const T t = std::tanh(u);
  const T du = c * (static_cast<T>(1) + static_cast<T>(3 * 0.044715) * x * x);
  return static_cast<T>(0.5) * (static_cast<T>(1) + t) +
         static_cast<T>(0.5) * x * (static_cast<T>(1) - t * t) * du;
}

// ---- layer norm over the feature dimension, per row ----

template <typename T>
void layer_norm_forward(const Mat<T>& x, const Mat<T>& gain,
                        const Mat<T>& bias, Mat<T>& out, Vec<T>& mean,
                        Vec<T>& rstd) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  out.resize(rows, cols);
  mean.resize(rows);
  rstd.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const T mu = x.row(i).mean();
    T var = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const T dxj = x(i, j) - mu;
      var += dxj * dxj;
    }
    var /= static_cast<T>(cols);
    const T rs = static_cast<T>(1) /
                 std::sqrt(var + static_cast<T>(kLayerNormEps));
    mean(i) = mu;
    rstd(i) = rs;
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = (x(i, j) - mu) * rs * gain(0, j) + bias(0, j);
  }
}

template <typename T>
void layer_norm_backward(const Mat<T>& x, const Mat<T>& gain,
                         const Vec<T>& mean, const Vec<T>& rstd,
                         const Mat<T>& dout, Mat<T>& dx, Mat<T>& dgain,
                         Mat<T>& dbias) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  for (Eigen::Index i = 0; i < rows; ++i) {
    const T rs = rstd(i);
    const T mu = mean(i);
    T sum_dg = 0, sum_dgx = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const T xhat = (x(i, j) - mu) * rs;
      const T dg = dout(i, j) * gain(0, j);
      sum_dg += dg;
      sum_dgx += dg * xhat;
      dgain(0, j) += dout(i, j) * xhat;
      dbias(0, j) += dout(i, j);
    }
    const T inv_n = static_cast<T>(1) / static_cast<T>(cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const T xhat = (x(i, j) - mu) * rs;
      const T dg = dout(i, j) * gain(0, j);
      dx(i, j) += rs * (dg - inv_n * sum_dg - xhat * inv_n * sum_dgx);
    }
  }
}

// ---- transformer blocks ----

template <typename T>
struct BlockParams {
  Mat<T> ln1_g, ln1_b;
  Mat<T> attn_w, attn_b;            // d x 3d, 1 x 3d
  Mat<T> attn_proj_w, attn_proj_b;  // d x d, 1 x d
  Mat<T> ln2_g, ln2_b;
  Mat<T> mlp_fc_w, mlp_fc_b;        // d x 4d, 1 x 4d
  Mat<T> mlp_proj_w, mlp_proj_b;    // 4d x d, 1 x d
};

template <typename T>
struct TrunkParams {
  TransformerConfig cfg;
  std::vector<BlockParams<T>> blocks;
  Mat<T> lnf_g, lnf_b;
};

template <typename T>
void trunk_init(TrunkParams<T>& p, const TransformerConfig& cfg, Rng& rng,
                double init_std) {
  cfg.validate();
  p.cfg = cfg;
  const int d = cfg.d_model;
  p.blocks.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& b : p.blocks) {
    b.ln1_g = Mat<T>::Ones(1, d);
    b.ln1_b = Mat<T>::Zero(1, d);
    b.attn_w.resize(d, 3 * d);
    fill_normal(b.attn_w, rng, init_std);
    b.attn_b = Mat<T>::Zero(1, 3 * d);
    b.attn_proj_w.resize(d, d);
    fill_normal(b.attn_proj_w, rng, init_std);
    b.attn_proj_b = Mat<T>::Zero(1, d);
    b.ln2_g = Mat<T>::Ones(1, d);
    b.ln2_b = Mat<T>::Zero(1, d);
    b.mlp_fc_w.resize(d, 4 * d);
    fill_normal(b.mlp_fc_w, rng, init_std);
    b.mlp_fc_b = Mat<T>::Zero(1, 4 * d);
    b.mlp_proj_w.resize(4 * d, d);
    fill_normal(b.mlp_proj_w, rng, init_std);
    b.mlp_proj_b = Mat<T>::Zero(1, d);
  }
  p.lnf_g = Mat<T>::Ones(1, d);
  p.lnf_b = Mat<T>::Zero(1, d);
}

// Gradient buffer with the same shape as the parameters, zero-filled.
template <typename T>
TrunkParams<T> trunk_zeros_like(const TrunkParams<T>& p) {
  TrunkParams<T> g;
  g.cfg = p.cfg;
  g.blocks.resize(p.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    auto& z = g.blocks[i];
    z.ln1_g = Mat<T>::Zero(b.ln1_g.rows(), b.ln1_g.cols());
    z.ln1_b = Mat<T>::Zero(b.ln1_b.rows(), b.ln1_b.cols());
    z.attn_w = Mat<T>::Zero(b.attn_w.rows(), b.attn_w.cols());
    z.attn_b = Mat<T>::Zero(b.attn_b.rows(), b.attn_b.cols());
    z.attn_proj_w = Mat<T>::Zero(b.attn_proj_w.rows(), b.attn_proj_w.cols());
    z.attn_proj_b = Mat<T>::Zero(b.attn_proj_b.rows(), b.attn_proj_b.cols());
    z.ln2_g = Mat<T>::Zero(b.ln2_g.rows(), b.ln2_g.cols());
    z.ln2_b = Mat<T>::Zero(b.ln2_b.rows(), b.ln2_b.cols());
    z.mlp_fc_w = Mat<T>::Zero(b.mlp_fc_w.rows(), b.mlp_fc_w.cols());
    z.mlp_fc_b = Mat<T>::Zero(b.mlp_fc_b.rows(), b.mlp_fc_b.cols());
    z.mlp_proj_w = Mat<T>::Zero(b.mlp_proj_w.rows(), b.mlp_proj_w.cols());
    z.mlp_proj_b = Mat<T>::Zero(b.mlp_proj_b.rows(), b.mlp_proj_b.cols());
  }
  g.lnf_g = Mat<T>::Zero(p.lnf_g.rows(), p.lnf_g.cols());
  g.lnf_b = Mat<T>::Zero(p.lnf_b.rows(), p.lnf_b.cols());
  return g;
}

template <typename T>
void trunk_collect(TrunkParams<T>& p, const std::string& prefix,
                   ParamList<T>& out) {
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string base = prefix + ".block" + std::to_string(i) + ".";
    out.push_back({base + "ln1_g", &b.ln1_g});
    out.push_back({base + "ln1_b", &b.ln1_b});
    out.push_back({base + "attn_w", &b.attn_w});
    out.push_back({base + "attn_b", &b.attn_b});
    out.push_back({base + "attn_proj_w", &b.attn_proj_w});
    out.push_back({base + "attn_proj_b", &b.attn_proj_b});
    out.push_back({base + "ln2_g", &b.ln2_g});
    out.push_back({base + "ln2_b", &b.ln2_b});
    out.push_back({base + "mlp_fc_w", &b.mlp_fc_w});
    out.push_back({base + "mlp_fc_b", &b.mlp_fc_b});
    out.push_back({base + "mlp_proj_w", &b.mlp_proj_w});
    out.push_back({base + "mlp_proj_b", &b.mlp_proj_b});
  }
  out.push_back({prefix + ".lnf_g", &p.lnf_g});
  out.push_back({prefix + ".lnf_b", &p.lnf_b});
}

template <typename T>
struct BlockActs {
  Mat<T> x;  // block input
  Mat<T> ln1_out;
  Vec<T> ln1_mean, ln1_rstd;
  Mat<T> qkv;
  std::vector<Mat<T>> att;  // per head, S x S
  Mat<T> att_concat;
  Mat<T> x_mid;
  Mat<T> ln2_out;
  Vec<T> ln2_mean, ln2_rstd;
  Mat<T> mlp_pre;  // pre-gelu
  Mat<T> mlp_act;
};

template <typename T>
struct TrunkActs {
  std::vector<BlockActs<T>> blocks;
  Mat<T> y;  // last block output, input to the final norm
  Vec<T> lnf_mean, lnf_rstd;
  Mat<T> h;  // trunk output
};

template <typename T>
const Mat<T>& trunk_forward(const TrunkParams<T>& p, const Mat<T>& x0,
                            TrunkActs<T>& acts) {
  const int n_heads = p.cfg.n_heads;
  const Eigen::Index s = x0.rows(), d = x0.cols();
  if (d != p.cfg.d_model)
    throw std::invalid_argument("trunk_forward: input width mismatch");
  if (s > p.cfg.max_positions)
    throw std::invalid_argument(
        "trunk_forward: sequence length " + std::to_string(s) +
        " exceeds max positions " + std::to_string(p.cfg.max_positions));
  const Eigen::Index hd = d / n_heads;
  const T scale = static_cast<T>(1) / std::sqrt(static_cast<T>(hd));

  acts.blocks.resize(p.blocks.size());
  Mat<T> x = x0;
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& b = p.blocks[l];
    auto& a = acts.blocks[l];
    a.x = x;
    layer_norm_forward(a.x, b.ln1_g, b.ln1_b, a.ln1_out, a.ln1_mean,
                       a.ln1_rstd);
    a.qkv = (a.ln1_out * b.attn_w).rowwise() + b.attn_b.row(0);

    a.att.assign(static_cast<std::size_t>(n_heads), Mat<T>());
    a.att_concat.setZero(s, d);
    for (int h = 0; h < n_heads; ++h) {
      auto q = a.qkv.middleCols(h * hd, hd);
      auto k = a.qkv.middleCols(d + h * hd, hd);
      auto v = a.qkv.middleCols(2 * d + h * hd, hd);
      Mat<T>& att = a.att[static_cast<std::size_t>(h)];
      att.setZero(s, s);
      for (Eigen::Index i = 0; i < s; ++i) {
        T row_max = -std::numeric_limits<T>::infinity();
        for (Eigen::Index j = 0; j <= i; ++j) {
          const T score = q.row(i).dot(k.row(j)) * scale;
          att(i, j) = score;
          row_max = std::max(row_max, score);
        }
        T denom = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          att(i, j) = std::exp(att(i, j) - row_max);
          denom += att(i, j);
        }
        for (Eigen::Index j = 0; j <= i; ++j) att(i, j) /= denom;
      }
      a.att_concat.middleCols(h * hd, hd) = att * v;
    }

    Mat<T> attn_out = (a.att_concat * b.attn_proj_w).rowwise() +
                      b.attn_proj_b.row(0);
    a.x_mid = a.x + attn_out;

    layer_norm_forward(a.x_mid, b.ln2_g, b.ln2_b, a.ln2_out, a.ln2_mean,
                       a.ln2_rstd);
    a.mlp_pre = (a.ln2_out * b.mlp_fc_w).rowwise() + b.mlp_fc_b.row(0);
    a.mlp_act = a.mlp_pre.unaryExpr([](T u) { return gelu(u); });
    x = a.x_mid +
        ((a.mlp_act * b.mlp_proj_w).rowwise() + b.mlp_proj_b.row(0)).matrix();
  }
  acts.y = std::move(x);
  layer_norm_forward(acts.y, p.lnf_g, p.lnf_b, acts.h, acts.lnf_mean,
                     acts.lnf_rstd);
  return acts.h;
}

template <typename T>
void trunk_backward(const TrunkParams<T>& p, const TrunkActs<T>& acts,
                    const Mat<T>& dh, TrunkParams<T>& grads, Mat<T>& dx0) {
  const int n_heads = p.cfg.n_heads;
  const Eigen::Index s = dh.rows(), d = dh.cols();
  const Eigen::Index hd = d / n_heads;
  const T scale = static_cast<T>(1) / std::sqrt(static_cast<T>(hd));

  Mat<T> dy = Mat<T>::Zero(s, d);
  layer_norm_backward(acts.y, p.lnf_g, acts.lnf_mean, acts.lnf_rstd, dh, dy,
                      grads.lnf_g, grads.lnf_b);

  for (std::size_t li = p.blocks.size(); li-- > 0;) {
    const auto& b = p.blocks[li];
    const auto& a = acts.blocks[li];
    auto& g = grads.blocks[li];

    // y = x_mid + mlp_proj(gelu(mlp_fc(ln2(x_mid))))
    Mat<T> dx_mid = dy;
    g.mlp_proj_w += a.mlp_act.transpose() * dy;
    g.mlp_proj_b += dy.colwise().sum();
    Mat<T> dact = dy * b.mlp_proj_w.transpose();
    Mat<T> dpre =
        dact.cwiseProduct(a.mlp_pre.unaryExpr([](T u) { return gelu_grad(u); }));
    g.mlp_fc_w += a.ln2_out.transpose() * dpre;
    g.mlp_fc_b += dpre.colwise().sum();
    Mat<T> dln2 = dpre * b.mlp_fc_w.transpose();
    layer_norm_backward(a.x_mid, b.ln2_g, a.ln2_mean, a.ln2_rstd, dln2, dx_mid,
                        g.ln2_g, g.ln2_b);

    // x_mid = x + attn_proj(att_concat)
    Mat<T> dx = dx_mid;
    g.attn_proj_w += a.att_concat.transpose() * dx_mid;
    g.attn_proj_b += dx_mid.colwise().sum();
    Mat<T> dconcat = dx_mid * b.attn_proj_w.transpose();

    Mat<T> dqkv = Mat<T>::Zero(s, 3 * d);
    for (int h = 0; h < n_heads; ++h) {
      auto q = a.qkv.middleCols(h * hd, hd);
      auto k = a.qkv.middleCols(d + h * hd, hd);
      auto v = a.qkv.middleCols(2 * d + h * hd, hd);
      const Mat<T>& att = a.att[static_cast<std::size_t>(h)];
      auto doh = dconcat.middleCols(h * hd, hd);

      Mat<T> datt = doh * v.transpose();  // S x S
      dqkv.middleCols(2 * d + h * hd, hd) += att.transpose() * doh;

      // softmax backward, rows independent; masked entries have att == 0
      Mat<T> dscore(s, s);
      for (Eigen::Index i = 0; i < s; ++i) {
        T dot = 0;
        for (Eigen::Index j = 0; j <= i; ++j) dot += datt(i, j) * att(i, j);
        for (Eigen::Index j = 0; j < s; ++j)
          dscore(i, j) = j <= i ? att(i, j) * (datt(i, j) - dot) : T{0};
      }
      dqkv.middleCols(h * hd, hd) += dscore * k * scale;
      dqkv.middleCols(d + h * hd, hd) += dscore.transpose() * q * scale;
    }

    g.attn_w += a.ln1_out.transpose() * dqkv;
    g.attn_b += dqkv.colwise().sum();
    Mat<T> dln1 = dqkv * b.attn_w.transpose();
    layer_norm_backward(a.x, b.ln1_g, a.ln1_mean, a.ln1_rstd, dln1, dx, g.ln1_g,
                        g.ln1_b);

    dy = std::move(dx);
  }
  dx0 += dy;
}

// ---- classification / regression heads ----

template <typename T>
T sigmoid(T x) {
  if (x >= 0) {
    const T z = std::exp(-x);
    return static_cast<T>(1) / (static_cast<T>(1) + z);
  }
  const T z = std::exp(x);
  return z / (static_cast<T>(1) + z);
}

// Mean cross-entropy of row-wise softmax against integer targets.
// When dlogits is non-null, accumulates d(mean CE)/dlogits into it.
template <typename T>
T softmax_xent_rows(const Mat<T>& logits, const std::vector<int>& targets,
                    Mat<T>* dlogits) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw std::invalid_argument(
        "softmax_xent_rows: logits rows and target count differ");
  if (targets.empty())
    throw std::invalid_argument("softmax_xent_rows: empty target list");
  const Eigen::Index rows = logits.rows(), cols = logits.cols();
  const T inv_rows = static_cast<T>(1) / static_cast<T>(rows);
  T loss = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= cols)
      throw std::invalid_argument("softmax_xent_rows: target id out of range");
    const T row_max = logits.row(i).maxCoeff();
    T denom = 0;
    for (Eigen::Index j = 0; j < cols; ++j)
      denom += std::exp(logits(i, j) - row_max);
    const T log_denom = std::log(denom) + row_max;
    loss += log_denom - logits(i, t);
    if (dlogits) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        const T prob = std::exp(logits(i, j) - log_denom);
        (*dlogits)(i, j) += (prob - (j == t ? static_cast<T>(1) : T{0})) *
                            inv_rows;
      }
    }
  }
  return loss * inv_rows;
}

}  // namespace creagen
