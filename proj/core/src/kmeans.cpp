#include "creagen/kmeans.hpp"

#include <limits>
#include <stdexcept>

namespace creagen {

namespace {

// Index of the nearest center; ties go to the lower cluster id.
int nearest_center(const Mat<double>& centers, const Eigen::RowVectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

Mat<double> init_centers(const Mat<double>& points, int k,
                         const KmeansOptions& opts, Rng& rng) {
  const Eigen::Index n = points.rows();
  Mat<double> centers(k, points.cols());
  if (!opts.plus_plus_init) {
    // Partial Fisher-Yates: k distinct row indices.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      idx[static_cast<std::size_t>(i)] = i;
    for (int c = 0; c < k; ++c) {
      const std::size_t j =
          static_cast<std::size_t>(c) +
          static_cast<std::size_t>(rng.uniform(
              static_cast<std::uint64_t>(n - c)));
      std::swap(idx[static_cast<std::size_t>(c)], idx[j]);
      centers.row(c) = points.row(idx[static_cast<std::size_t>(c)]);
    }
    return centers;
  }

  // k-means++: first center uniform, the rest sampled proportionally to the
  // squared distance from the nearest chosen center.
  centers.row(0) = points.row(static_cast<Eigen::Index>(
      rng.uniform(static_cast<std::uint64_t>(n))));
  Vec<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      const double r = rng.uniform_real() * total;
      double acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (r < acc) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(
          rng.uniform(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

}  // namespace

KmeansResult kmeans(const Mat<double>& points, int k,
                    const KmeansOptions& opts) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k)
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) +
                                " exceeds the number of points " +
                                std::to_string(n));
  if (opts.max_iters < 1)
    throw std::invalid_argument("kmeans: max_iters must be >= 1");

  Rng rng(opts.seed);
  KmeansResult result;
  result.centers = init_centers(points, k, opts, rng);
  result.assignment.assign(static_cast<std::size_t>(n), -1);

  std::vector<int> prev;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    prev = result.assignment;
    double inertia = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = nearest_center(result.centers, points.row(i));
      result.assignment[static_cast<std::size_t>(i)] = c;
      inertia += (points.row(i) - result.centers.row(c)).squaredNorm();
    }
    result.inertia = inertia;
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;
    if (result.assignment == prev) break;

    Mat<double> sums = Mat<double>::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = result.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        result.centers.row(c) =
            sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Reseed the empty cluster at the point farthest from its center.
        Eigen::Index far = 0;
        double far_d = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = (points.row(i) - result.centers.row(c)).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        result.centers.row(c) = points.row(far);
      }
    }
  }
  return result;
}

}  // namespace creagen
