#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "creagen/tensor.hpp"

namespace creagen {

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
};

// Adaptive-moment optimizer over a named parameter list. Moment buffers
// follow the list order, which is fixed by the model's collect functions,
// so stepping is deterministic and the state checkpoints cleanly.
template <typename T>
class Adam {
 public:
  Adam(const ParamList<T>& params, const AdamConfig& cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.push_back(Mat<T>::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Mat<T>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void step(const ParamList<T>& params, const ParamList<T>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("Adam::step: parameter list shape changed");

    double scale = 1.0;
    if (cfg_.clip_norm > 0) {
      double sq = 0;
      for (const auto& g : grads)
        sq += static_cast<double>(g.value->squaredNorm());
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }

    ++t_;
    const T bias1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, t_));
    const T bias2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
    const T s = static_cast<T>(scale);

    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat<T>& p = *params[i].value;
      const Mat<T>& g = *grads[i].value;
      Mat<T>& m = m_[i];
      Mat<T>& v = v_[i];
      m = b1 * m + (static_cast<T>(1) - b1) * (g * s);
      v = (b2 * v).eval();
      v.noalias() += (static_cast<T>(1) - b2) * (g * s).cwiseProduct(g * s);
      const Mat<T> m_hat = m / bias1;
      const Mat<T> v_hat = v / bias2;
      p -= lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                                    Mat<T>::Constant(p.rows(), p.cols(), eps));
    }
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  std::vector<Mat<T>>& first_moments() { return m_; }
  std::vector<Mat<T>>& second_moments() { return v_; }
  const std::vector<Mat<T>>& first_moments() const { return m_; }
  const std::vector<Mat<T>>& second_moments() const { return v_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Mat<T>> m_, v_;
};

}  // namespace creagen
