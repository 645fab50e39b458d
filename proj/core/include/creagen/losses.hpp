#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "creagen/creative.hpp"
#include "creagen/decoder.hpp"
#include "creagen/mixer.hpp"
#include "creagen/nn.hpp"

// Training objectives: next-token generative loss, click-classification
// loss through the predictor, InfoNCE alignment between user embeddings and
// interest features, interest reconstruction, and their weighted sum.

namespace creagen {

template <typename T>
struct LossWeights {
  T lambda_cls = 1;
  T lambda_align = 1;
  T lambda_recon = 1;
  T tau = static_cast<T>(0.07);  // InfoNCE temperature

  void validate() const {
    if (lambda_cls < 0 || lambda_align < 0 || lambda_recon < 0)
      throw std::invalid_argument("loss weights must be nonnegative");
    if (!(tau > 0))
      throw std::invalid_argument("InfoNCE temperature must be positive");
  }
};

// Mean next-token cross entropy over the supervised positions. When dlogits
// is non-null it receives d(loss)/d(logits).
template <typename T>
T generative_loss(const Mat<T>& logits, const std::vector<int>& response_tokens,
                  Mat<T>* dlogits = nullptr) {
  return softmax_xent_rows(logits, response_tokens, dlogits);
}

// ---- click classification ----

template <typename T>
T predict_click(const MixerParams<T>& p, const Vec<T>& user_emb,
                const Vec<T>& item_emb) {
  MixerActs<T> acts;
  return sigmoid(mixer_logit(p, user_emb, item_emb, acts));
}

// Numerically stable binary cross entropy on a logit.
template <typename T>
T bce_with_logit(T logit, int label, T* d_logit = nullptr) {
  const T y = static_cast<T>(label);
  const T loss = std::max(logit, T{0}) - logit * y +
                 std::log1p(std::exp(-std::abs(logit)));
  if (d_logit) *d_logit = sigmoid(logit) - y;
  return loss;
}

// Mean BCE of the predictor over (user, item) embedding pairs given as
// matching rows of `users` and `items`.
template <typename T>
T cls_loss(const MixerParams<T>& p, const Mat<T>& users, const Mat<T>& items,
           const std::vector<int>& labels) {
  const Eigen::Index m = users.rows();
  if (m == 0) throw std::invalid_argument("cls_loss: empty batch");
  if (items.rows() != m || static_cast<Eigen::Index>(labels.size()) != m)
    throw std::invalid_argument("cls_loss: pair/label count mismatch");
  T loss = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    MixerActs<T> acts;
    const T logit = mixer_logit(p, Vec<T>(users.row(i).transpose()),
                                Vec<T>(items.row(i).transpose()), acts);
    loss += bce_with_logit(logit, labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<T>(m);
}

// As cls_loss, additionally accumulating predictor gradients and per-pair
// embedding gradients (scaled by `weight`).
template <typename T>
T cls_loss_backward(const MixerParams<T>& p, const Mat<T>& users,
                    const Mat<T>& items, const std::vector<int>& labels,
                    T weight, MixerParams<T>& grads, Mat<T>& d_users,
                    Mat<T>& d_items) {
  const Eigen::Index m = users.rows();
  if (m == 0) throw std::invalid_argument("cls_loss: empty batch");
  if (items.rows() != m || static_cast<Eigen::Index>(labels.size()) != m)
    throw std::invalid_argument("cls_loss: pair/label count mismatch");
  const T scale = weight / static_cast<T>(m);
  T loss = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    MixerActs<T> acts;
    Vec<T> u = users.row(i).transpose();
    Vec<T> e = items.row(i).transpose();
    const T logit = mixer_logit(p, u, e, acts);
    T d_logit = 0;
    loss += bce_with_logit(logit, labels[static_cast<std::size_t>(i)], &d_logit);
    Vec<T> du = Vec<T>::Zero(u.size()), de = Vec<T>::Zero(e.size());
    mixer_backward(p, acts, d_logit * scale, grads, du, de);
    d_users.row(i) += du.transpose();
    d_items.row(i) += de.transpose();
  }
  return loss / static_cast<T>(m);
}

// ---- InfoNCE alignment ----

// InfoNCE over cosine similarity with in-batch negatives: row i of `users`
// is the anchor, row i of `features` the positive, all other feature rows
// negatives. When dU/dV are non-null they accumulate gradients scaled by
// `weight`.
template <typename T>
T align_loss(const Mat<T>& users, const Mat<T>& features, T tau,
             Mat<T>* d_users = nullptr, Mat<T>* d_features = nullptr,
             T weight = 1) {
  const Eigen::Index n = users.rows();
  if (n == 0) throw std::invalid_argument("align_loss: empty batch");
  if (features.rows() != n || features.cols() != users.cols())
    throw std::invalid_argument("align_loss: batch shape mismatch");
  if (!(tau > 0)) throw std::invalid_argument("align_loss: tau must be > 0");

  Vec<T> u_norm(n), v_norm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    u_norm(i) = users.row(i).norm();
    v_norm(i) = features.row(i).norm();
    if (u_norm(i) == 0 || v_norm(i) == 0)
      throw std::invalid_argument(
          "align_loss: zero-norm vector, cosine similarity undefined");
  }

  Mat<T> sims(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sims(i, j) = users.row(i).dot(features.row(j)) / (u_norm(i) * v_norm(j));

  Mat<T> logits = sims / tau;
  std::vector<int> diag(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    diag[static_cast<std::size_t>(i)] = static_cast<int>(i);

  Mat<T> d_logits;
  Mat<T>* d_logits_ptr = nullptr;
  if (d_users || d_features) {
    d_logits = Mat<T>::Zero(n, n);
    d_logits_ptr = &d_logits;
  }
  const T loss = softmax_xent_rows(logits, diag, d_logits_ptr);

  if (d_logits_ptr) {
    const Mat<T> d_sims = d_logits * (weight / tau);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const T ds = d_sims(i, j);
        if (ds == T{0}) continue;
        const T inv = static_cast<T>(1) / (u_norm(i) * v_norm(j));
        if (d_users)
          d_users->row(i) +=
              ds * (features.row(j) * inv -
                    sims(i, j) * users.row(i) / (u_norm(i) * u_norm(i)));
        if (d_features)
          d_features->row(j) +=
              ds * (users.row(i) * inv -
                    sims(i, j) * features.row(j) / (v_norm(j) * v_norm(j)));
      }
    }
  }
  return loss;
}

// ---- interest reconstruction ----

template <typename T>
struct ReconActs {
  Vec<T> prefix;
  DecoderActs<T> dec;
  std::vector<int> targets;
};

// Mean next-token cross entropy of the interest decoder conditioned on the
// single projected-U prefix: sequence [U][bos] w_1..w_{T-1}, targets
// w_1..w_T.
template <typename T>
T recon_loss(const ProjectionParams<T>& proj, const DecoderParams<T>& dec,
             const Vec<T>& user_emb, std::span<const int> interest_tokens,
             ReconActs<T>* acts_out = nullptr, Mat<T>* d_logits_out = nullptr) {
  if (interest_tokens.empty())
    throw std::invalid_argument("recon_loss: empty interest text");
  ReconActs<T> local;
  ReconActs<T>& acts = acts_out ? *acts_out : local;
  acts.prefix = project_user(proj, user_emb);
  std::vector<int> seq;
  seq.reserve(interest_tokens.size());
  seq.push_back(Vocabulary::kBos);
  seq.insert(seq.end(), interest_tokens.begin(), interest_tokens.end() - 1);
  decoder_hidden(dec, &acts.prefix, std::span<const int>(seq), acts.dec);
  acts.targets.assign(interest_tokens.begin(), interest_tokens.end());
  const auto count = static_cast<Eigen::Index>(acts.targets.size());
  const Mat<T> logits = decoder_logits(dec, acts.dec, 1, count);
  if (d_logits_out) {
    d_logits_out->setZero(count, logits.cols());
    return softmax_xent_rows(logits, acts.targets, d_logits_out);
  }
  return softmax_xent_rows(logits, acts.targets, static_cast<Mat<T>*>(nullptr));
}

template <typename T>
void recon_backward(const ProjectionParams<T>& proj,
                    const DecoderParams<T>& dec, const Vec<T>& user_emb,
                    const ReconActs<T>& acts, const Mat<T>& d_logits,
                    ProjectionParams<T>& proj_grads, DecoderParams<T>& dec_grads,
                    Vec<T>& d_user_emb) {
  Vec<T> d_prefix = Vec<T>::Zero(acts.prefix.size());
  decoder_backward_logits(dec, acts.dec, 1, d_logits, dec_grads, &d_prefix);
  project_user_backward(proj, user_emb, d_prefix, proj_grads, d_user_emb);
}

// ---- weighted total ----

template <typename T>
T total_loss(T gen, T cls, T align, T recon, const LossWeights<T>& w) {
  return gen + w.lambda_cls * cls + w.lambda_align * align +
         w.lambda_recon * recon;
}

}  // namespace creagen
