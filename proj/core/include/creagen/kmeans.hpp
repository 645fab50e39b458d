#pragma once

#include <cstdint>
#include <vector>

#include "creagen/tensor.hpp"

namespace creagen {

struct KmeansOptions {
  int max_iters = 100;
  std::uint64_t seed = 0;
  bool plus_plus_init = false;  // distance-weighted seeding instead of uniform
};

struct KmeansResult {
  Mat<double> centers;          // k x d
  std::vector<int> assignment;  // row -> nearest center (ties: lowest id)
  double inertia = 0;           // total within-cluster squared distance
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
  int iterations = 0;
};

// Lloyd's algorithm with seeded initialization from k distinct input rows.
// Runs until the assignment reaches a fixpoint or max_iters. Empty clusters
// are reseeded at the point farthest from its current center. Deterministic
// given the seed; inertia is non-increasing across iterations.
KmeansResult kmeans(const Mat<double>& points, int k,
                    const KmeansOptions& opts = {});

}  // namespace creagen
