#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "creagen/rng.hpp"

namespace creagen {

// Row-major throughout: a sequence is (positions x d_model) and row i is the
// hidden state at position i.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Flat, name-addressed view over a parameter struct. Collection order is
// fixed by the owning struct, so optimizer moments, checkpoints, and
// finite-difference sweeps all walk parameters identically.
template <typename T>
struct NamedParam {
  std::string name;
  Mat<T>* value;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
void fill_normal(Mat<T>& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
void fill_normal(Vec<T>& v, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
std::size_t param_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value->size());
  return n;
}

template <typename T>
void zero_params(ParamList<T>& params) {
  for (auto& p : params) p.value->setZero();
}

template <typename T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

}  // namespace creagen
