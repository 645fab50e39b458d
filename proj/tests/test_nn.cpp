#include <doctest.h>

#include "creagen/nn.hpp"
#include "support/fd_check.hpp"
#include "support/fixtures.hpp"
#include "support/reference_model.hpp"

using namespace creagen;

namespace {

Mat<double> random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                       double scale = 0.5) {
  Mat<double> m(rows, cols);
  fill_normal(m, rng, scale);
  return m;
}

refmodel::MatD to_ref(const Mat<double>& m) {
  refmodel::MatD out(static_cast<std::size_t>(m.rows()),
                     refmodel::VecD(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("gelu gradient matches finite differences") {
  for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
    const double eps = 1e-6;
    const double fd = (gelu(x + eps) - gelu(x - eps)) / (2 * eps);
    CHECK(gelu_grad(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("layer norm output is normalized and affine") {
  Rng rng(1);
  Mat<double> x = random_mat(3, 8, rng);
  Mat<double> gain = Mat<double>::Ones(1, 8);
  Mat<double> bias = Mat<double>::Zero(1, 8);
  Mat<double> out;
  Vec<double> mean, rstd;
  layer_norm_forward(x, gain, bias, out, mean, rstd);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    CHECK(out.row(i).mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double var = out.row(i).squaredNorm() / 8.0;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("trunk forward matches the scalar reference") {
  Rng rng(7);
  TransformerConfig cfg{6, 2, 2, 16};
  TrunkParams<double> p;
  trunk_init(p, cfg, rng, 0.3);
  const Mat<double> x = random_mat(5, 6, rng);

  TrunkActs<double> acts;
  const Mat<double>& h = trunk_forward(p, x, acts);
  const refmodel::MatD ref = refmodel::ref_trunk(p, to_ref(x));
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      CHECK(h(i, j) == doctest::Approx(
                           ref[static_cast<std::size_t>(i)]
                              [static_cast<std::size_t>(j)])
                           .epsilon(1e-10));
}

TEST_CASE("trunk backward matches finite differences") {
  Rng rng(13);
  TransformerConfig cfg{4, 2, 1, 8};
  TrunkParams<double> p;
  trunk_init(p, cfg, rng, 0.4);
  const Mat<double> x = random_mat(4, 4, rng);
  // Scalar objective: weighted sum of outputs.
  const Mat<double> w = random_mat(4, 4, rng);

  auto loss = [&]() {
    TrunkActs<double> acts;
    return trunk_forward(p, x, acts).cwiseProduct(w).sum();
  };

  TrunkActs<double> acts;
  trunk_forward(p, x, acts);
  TrunkParams<double> grads = trunk_zeros_like(p);
  Mat<double> dx = Mat<double>::Zero(4, 4);
  trunk_backward(p, acts, w, grads, dx);

  ParamList<double> plist, glist;
  trunk_collect(p, "trunk", plist);
  trunk_collect(grads, "trunk", glist);
  const auto report = fdcheck::fd_check(plist, glist, loss);
  CHECK_MESSAGE(report.within(1e-5), report.worst);

  // Input gradient too.
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double eps = 1e-6;
      Mat<double>& xm = const_cast<Mat<double>&>(x);
      const double orig = xm(i, j);
      xm(i, j) = orig + eps;
      const double up = loss();
      xm(i, j) = orig - eps;
      const double down = loss();
      xm(i, j) = orig;
      CHECK(dx(i, j) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-4));
    }
}

TEST_CASE("causal masking: position i ignores later positions") {
  Rng rng(21);
  TransformerConfig cfg{8, 2, 2, 16};
  TrunkParams<double> p;
  trunk_init(p, cfg, rng, 0.3);
  Mat<double> x = random_mat(6, 8, rng);

  TrunkActs<double> acts;
  const Mat<double> h1 = trunk_forward(p, x, acts);
  x.row(5).setConstant(3.7);  // perturb the suffix
  const Mat<double> h2 = trunk_forward(p, x, acts);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK((h1.row(i) - h2.row(i)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((h1.row(5) - h2.row(5)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("sequence beyond max positions is rejected") {
  Rng rng(3);
  TransformerConfig cfg{4, 2, 1, 4};
  TrunkParams<double> p;
  trunk_init(p, cfg, rng, 0.3);
  TrunkActs<double> acts;
  CHECK_THROWS_AS(trunk_forward(p, random_mat(5, 4, rng), acts),
                  std::invalid_argument);
}

TEST_CASE("softmax cross entropy matches the scalar reference") {
  Rng rng(17);
  const Mat<double> logits = random_mat(5, 9, rng, 2.0);
  const std::vector<int> targets = {3, 0, 8, 2, 5};
  const double got =
      softmax_xent_rows(logits, targets, static_cast<Mat<double>*>(nullptr));
  const double want = refmodel::ref_cross_entropy(to_ref(logits), targets);
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Rng rng(19);
  Mat<double> logits = random_mat(3, 6, rng, 1.5);
  const std::vector<int> targets = {1, 5, 0};
  Mat<double> dlogits = Mat<double>::Zero(3, 6);
  softmax_xent_rows(logits, targets, &dlogits);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      const double eps = 1e-6;
      const double orig = logits(i, j);
      logits(i, j) = orig + eps;
      const double up = softmax_xent_rows(logits, targets,
                                          static_cast<Mat<double>*>(nullptr));
      logits(i, j) = orig - eps;
      const double down = softmax_xent_rows(logits, targets,
                                            static_cast<Mat<double>*>(nullptr));
      logits(i, j) = orig;
      CHECK(dlogits(i, j) ==
            doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));
    }
}

}  // TEST_SUITE
