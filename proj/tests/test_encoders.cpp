#include <doctest.h>

#include "creagen/encoders.hpp"
#include "creagen/inference.hpp"
#include "creagen/model.hpp"
#include "support/fd_check.hpp"
#include "support/fixtures.hpp"
#include "support/reference_model.hpp"
#include "support/tiny_fixture.hpp"

using namespace creagen;

TEST_SUITE("encoders") {

TEST_CASE("encode_item is deterministic") {
  Rng rng(5);
  ItemEncoderParams<float> p;
  item_encoder_init(p, 32, TransformerConfig{16, 2, 1, 12}, rng, 0.02);
  const std::vector<int> tokens = {9, 10, 11};
  ItemEncoderActs<float> acts;
  const Vec<float> a = encode_item(p, std::span<const int>(tokens), acts);
  const Vec<float> b = encode_item(p, std::span<const int>(tokens), acts);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("encode_item with hand-set weights matches the frozen oracle") {
  const auto p = tiny::item_encoder_2d();
  ItemEncoderActs<double> acts;
  const std::vector<int> tokens = {7};
  const Vec<double> e = encode_item(p, std::span<const int>(tokens), acts);
  // Frozen from the scalar-by-scalar reference forward pass.
  CHECK(e(0) == doctest::Approx(0.999955139238343).epsilon(1e-12));
  CHECK(e(1) == doctest::Approx(-0.999955139238343).epsilon(1e-12));
  // And the live reference agrees.
  const auto ref = refmodel::ref_encode_item(p, tokens);
  CHECK(e(0) == doctest::Approx(ref[0]).epsilon(1e-12));
  CHECK(e(1) == doctest::Approx(ref[1]).epsilon(1e-12));
}

TEST_CASE("encode_item rejects empty token lists") {
  Rng rng(5);
  ItemEncoderParams<float> p;
  item_encoder_init(p, 16, TransformerConfig{8, 2, 1, 8}, rng, 0.02);
  ItemEncoderActs<float> acts;
  const std::vector<int> empty;
  CHECK_THROWS_AS(encode_item(p, std::span<const int>(empty), acts),
                  std::invalid_argument);
}

TEST_CASE("64-token truncation yields the identical embedding") {
  // Tokenizing a longer text with the same 64-token prefix must embed
  // identically to the 64-token text itself.
  std::string base;
  for (int i = 0; i < 64; ++i) base += "w" + std::to_string(i % 13) + " ";
  const std::string longer = base + "extra trailing words beyond the cap";
  const Vocabulary vocab = Vocabulary::build({base + " extra trailing words beyond the cap"});

  Rng rng(8);
  ItemEncoderParams<float> p;
  item_encoder_init(p, vocab.size(), TransformerConfig{16, 2, 1, 65}, rng,
                    0.02);
  const auto t1 = tokenize(base, vocab, 64);
  const auto t2 = tokenize(longer, vocab, 64);
  REQUIRE(t1 == t2);
  ItemEncoderActs<float> acts;
  const Vec<float> e1 = encode_item(p, std::span<const int>(t1), acts);
  const Vec<float> e2 = encode_item(p, std::span<const int>(t2), acts);
  CHECK((e1 - e2).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("encode_user with hand-set weights matches the frozen oracle") {
  const auto p = tiny::user_encoder_2d();
  Mat<double> embs(1, 2);
  embs << 0.3, -0.4;
  UserEncoderActs<double> acts;
  const Vec<double> u = encode_user(p, embs, acts);
  CHECK(u(0) == doctest::Approx(0.999288652057673).epsilon(1e-12));
  CHECK(u(1) == doctest::Approx(-0.999288652057673).epsilon(1e-12));
  const auto ref = refmodel::ref_encode_user(p, {{0.3, -0.4}});
  CHECK(u(0) == doctest::Approx(ref[0]).epsilon(1e-12));
}

TEST_CASE("encode_user rejects an empty sequence") {
  Rng rng(5);
  UserEncoderParams<float> p;
  user_encoder_init(p, TransformerConfig{8, 2, 1, 8}, rng, 0.02);
  UserEncoderActs<float> acts;
  CHECK_THROWS_AS(encode_user(p, Mat<float>(0, 8), acts),
                  std::invalid_argument);
}

TEST_CASE("permuting two distinct history items changes the user embedding") {
  Rng rng(31);
  UserEncoderParams<double> p;
  user_encoder_init(p, TransformerConfig{8, 2, 2, 8}, rng, 0.3);
  Mat<double> embs(3, 8);
  fill_normal(embs, rng, 1.0);
  UserEncoderActs<double> acts;
  const Vec<double> u1 = encode_user(p, embs, acts);
  Mat<double> swapped = embs;
  swapped.row(0) = embs.row(1);
  swapped.row(1) = embs.row(0);
  const Vec<double> u2 = encode_user(p, swapped, acts);
  CHECK((u1 - u2).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("user encoder causality: earlier hidden states ignore later items") {
  Rng rng(32);
  UserEncoderParams<double> p;
  user_encoder_init(p, TransformerConfig{8, 2, 1, 8}, rng, 0.3);
  Mat<double> embs(4, 8);
  fill_normal(embs, rng, 1.0);

  UserEncoderActs<double> acts1, acts2;
  encode_user(p, embs, acts1);
  Mat<double> perturbed = embs;
  perturbed.row(3).setConstant(2.0);
  encode_user(p, perturbed, acts2);
  // Hidden states at positions before the perturbed item are unchanged.
  for (Eigen::Index i = 0; i < 3; ++i)
    CHECK((acts1.trunk.h.row(i) - acts2.trunk.h.row(i)).cwiseAbs().maxCoeff() <=
          1e-14);
}

TEST_CASE("histories beyond the budget are truncated to the most recent") {
  // The ingestion path keeps the most recent max_history items; feeding the
  // truncated tail directly must give the same embedding.
  auto records = fixtures::make_records(1, 77, {6, 6, false, 12});
  auto& r = records[0];
  const Vocabulary vocab = fixtures::vocab_for(records);
  ModelConfig cfg = fixtures::tiny_model_cfg(vocab.size());
  cfg.max_history = 4;

  Rng rng(3);
  ModelParams<float> params;
  model_init(params, cfg, rng);

  std::vector<std::vector<int>> full, tail;
  for (const auto& item : r.history)
    full.push_back(tokenize(flatten_item_text(item), vocab, cfg.max_item_tokens));
  tail.assign(full.end() - 4, full.end());

  // user_embedding applies no truncation itself; the caller contract is
  // "already truncated", so the tail is the canonical input.
  const Vec<float> direct = user_embedding(params, tail);
  REQUIRE(r.history.size() == 6);

  // The training/inference paths truncate identically.
  std::vector<DatasetRecord> one{r};
  Checkpoint ckpt;
  ckpt.model_cfg = cfg;
  ckpt.params = params;
  ckpt.vocab_hash = vocab.content_hash();
  const UserEmbeddingTable table = extract_user_embeddings(one, ckpt, vocab);
  REQUIRE(table.user_ids.size() == 1);
  CHECK((table.embeddings.row(0).transpose() - direct).cwiseAbs().maxCoeff() ==
        0.0f);
}

TEST_CASE("interest feature extraction is deterministic and weight-shared") {
  Rng rng(41);
  DecoderParams<double> dec;
  decoder_init(dec, 24, TransformerConfig{8, 2, 1, 16}, rng, 0.2);
  const std::vector<int> tokens = {9, 12, 15};

  DecoderActs<double> acts;
  const Vec<double> v1 =
      extract_interest_feature(dec, std::span<const int>(tokens), acts);
  const Vec<double> v2 =
      extract_interest_feature(dec, std::span<const int>(tokens), acts);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() == 0.0);

  // With sharing, mutating a decoder weight must change V.
  dec.trunk.blocks[0].attn_w(0, 0) += 0.5;
  const Vec<double> v3 =
      extract_interest_feature(dec, std::span<const int>(tokens), acts);
  CHECK((v1 - v3).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("interest feature extraction rejects empty text") {
  Rng rng(41);
  DecoderParams<double> dec;
  decoder_init(dec, 24, TransformerConfig{8, 2, 1, 16}, rng, 0.2);
  DecoderActs<double> acts;
  const std::vector<int> empty;
  CHECK_THROWS_AS(
      extract_interest_feature(dec, std::span<const int>(empty), acts),
      std::invalid_argument);
}

TEST_CASE("encoder gradients match finite differences end to end") {
  // Scalar function: sum of squared entries of U, through both encoders.
  Rng rng(55);
  const ModelConfig cfg = fixtures::gradcheck_model_cfg();
  ModelParams<double> params;
  model_init(params, cfg, rng);

  const std::vector<std::vector<int>> history = {
      fixtures::random_tokens(3, cfg.vocab_size, rng),
      fixtures::random_tokens(2, cfg.vocab_size, rng)};

  auto loss = [&]() {
    const Vec<double> u = user_embedding(params, history);
    return 0.5 * u.squaredNorm();
  };

  // Analytic: dU = U through the hierarchical backward.
  std::vector<ItemEncoderActs<double>> item_acts(history.size());
  Mat<double> embs(2, cfg.enc_d_model);
  for (std::size_t i = 0; i < history.size(); ++i)
    embs.row(static_cast<Eigen::Index>(i)) =
        encode_item(params.item_enc, std::span<const int>(history[i]),
                    item_acts[i])
            .transpose();
  UserEncoderActs<double> user_acts;
  const Vec<double> u = encode_user(params.user_enc, embs, user_acts);

  ModelParams<double> grads = model_zeros_like(params);
  Mat<double> d_embs = Mat<double>::Zero(2, cfg.enc_d_model);
  encode_user_backward(params.user_enc, user_acts, u, grads.user_enc, d_embs);
  for (std::size_t i = 0; i < history.size(); ++i)
    encode_item_backward(params.item_enc, item_acts[i],
                         Vec<double>(d_embs.row(static_cast<Eigen::Index>(i))
                                         .transpose()),
                         grads.item_enc);

  ParamList<double> plist, glist;
  item_encoder_collect(params.item_enc, "item", plist);
  user_encoder_collect(params.user_enc, "user", plist);
  item_encoder_collect(grads.item_enc, "item", glist);
  user_encoder_collect(grads.user_enc, "user", glist);
  const auto report = fdcheck::fd_check(plist, glist, loss);
  CHECK_MESSAGE(report.within(1e-4), report.worst);
}

}  // TEST_SUITE
