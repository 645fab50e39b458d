#include "creagen/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "creagen/creative.hpp"
#include "creagen/hash.hpp"
#include "creagen/optimizer.hpp"

namespace creagen {

Corpus Corpus::build(const std::vector<DatasetRecord>& records,
                     const Vocabulary& vocab, int max_item_tokens) {
  Corpus c;
  for (const auto& r : records) {
    for (const auto& item : r.history) {
      if (c.index.count(item.item_id)) continue;
      c.index.emplace(item.item_id, static_cast<int>(c.items.size()));
      c.items.push_back(item);
      auto tokens = tokenize(flatten_item_text(item), vocab, max_item_tokens);
      if (tokens.empty())
        throw std::runtime_error("corpus item \"" + item.item_id +
                                 "\" has no text tokens");
      c.item_tokens.push_back(std::move(tokens));
    }
  }
  return c;
}

namespace {

std::vector<std::vector<int>> tokenize_history(const DatasetRecord& r,
                                               const Vocabulary& vocab,
                                               const ModelConfig& mc) {
  if (r.history.empty())
    throw std::runtime_error("record for user \"" + r.user_id +
                             "\" has an empty history");
  const std::size_t keep =
      std::min(r.history.size(), static_cast<std::size_t>(mc.max_history));
  const std::size_t start = r.history.size() - keep;
  std::vector<std::vector<int>> out;
  out.reserve(keep);
  for (std::size_t i = start; i < r.history.size(); ++i) {
    auto tokens =
        tokenize(flatten_item_text(r.history[i]), vocab, mc.max_item_tokens);
    if (tokens.empty())
      throw std::runtime_error("history item \"" + r.history[i].item_id +
                               "\" has no text tokens");
    out.push_back(std::move(tokens));
  }
  return out;
}

}  // namespace

TrainBatch build_batch(const std::vector<const DatasetRecord*>& records,
                       const Corpus& corpus, const Vocabulary& vocab,
                       const ModelConfig& mc, const TrainConfig& tc, Rng& rng) {
  if (records.empty())
    throw std::invalid_argument("build_batch: no records");
  const bool need_interest =
      tc.lambda_align > 0 || tc.lambda_recon > 0 || tc.log_unweighted;
  const bool need_cls = tc.lambda_cls > 0 || tc.log_unweighted;

  TrainBatch batch;
  for (std::size_t ri = 0; ri < records.size(); ++ri) {
    const DatasetRecord& r = *records[ri];
    BatchExample ex;
    ex.history_tokens = tokenize_history(r, vocab, mc);
    ex.prompt_tokens =
        prompt_tokens_for(r.ad, r.ad.query, vocab, mc.prompt_limits());

    if (r.response.empty())
      throw std::runtime_error("record for user \"" + r.user_id +
                               "\" has an empty response");
    // Keep the teacher-forced sequence within the decoder's position budget.
    const int budget =
        std::min(mc.max_response_tokens,
                 mc.dec_max_positions - 1 -
                     static_cast<int>(ex.prompt_tokens.size()));
    if (budget < 1)
      throw std::runtime_error("prompt for ad \"" + r.ad.ad_id +
                               "\" leaves no room for a response");
    ex.response_tokens = tokenize(r.response, vocab, budget);

    if (need_interest) {
      if (r.interest_text.empty())
        throw std::runtime_error(
            "record for user \"" + r.user_id +
            "\" has no interest_text but align/recon supervision is enabled");
      ex.interest_tokens =
          tokenize(r.interest_text, vocab, mc.max_interest_tokens);
      if (ex.interest_tokens.empty())
        throw std::runtime_error("interest_text for user \"" + r.user_id +
                                 "\" tokenizes to nothing");
    }
    batch.examples.push_back(std::move(ex));

    if (!need_cls) continue;

    std::unordered_set<std::string> history_ids;
    for (const auto& item : r.history) history_ids.insert(item.item_id);

    std::vector<int> positive_ids;  // corpus positions
    if (r.click_labels.empty()) {
      // History entries are clicks; the most recent one is the positive.
      positive_ids.push_back(corpus.index.at(r.history.back().item_id));
    } else {
      for (const auto& cl : r.click_labels) {
        auto it = corpus.index.find(cl.item_id);
        if (it == corpus.index.end())
          throw std::runtime_error("click_labels references unknown item \"" +
                                   cl.item_id + "\"");
        if (cl.label == 1) {
          positive_ids.push_back(it->second);
        } else {
          batch.cls_pairs.push_back(
              {static_cast<int>(ri),
               corpus.item_tokens[static_cast<std::size_t>(it->second)], 0});
        }
      }
    }

    std::vector<int> eligible;  // negatives: outside the user's history
    for (std::size_t i = 0; i < corpus.items.size(); ++i)
      if (!history_ids.count(corpus.items[i].item_id))
        eligible.push_back(static_cast<int>(i));

    for (int pos : positive_ids) {
      batch.cls_pairs.push_back(
          {static_cast<int>(ri),
           corpus.item_tokens[static_cast<std::size_t>(pos)], 1});
      for (int k = 0; k < tc.n_neg && !eligible.empty(); ++k) {
        const int pick = eligible[static_cast<std::size_t>(
            rng.uniform(eligible.size()))];
        batch.cls_pairs.push_back(
            {static_cast<int>(ri),
             corpus.item_tokens[static_cast<std::size_t>(pick)], 0});
      }
    }
  }
  return batch;
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     long epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Shuffle source is a pure function of (seed, epoch) so a resumed run can
  // regenerate the order mid-epoch without replaying earlier draws.
  Rng rng(fnv1a64("epoch-order", seed ^ static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void check_resume_compatible(const TrainConfig& a, const TrainConfig& b) {
  const bool ok = a.lr == b.lr && a.batch_size == b.batch_size &&
                  a.seed == b.seed && a.lambda_cls == b.lambda_cls &&
                  a.lambda_align == b.lambda_align &&
                  a.lambda_recon == b.lambda_recon && a.tau == b.tau &&
                  a.n_neg == b.n_neg && a.beta1 == b.beta1 &&
                  a.beta2 == b.beta2 && a.adam_eps == b.adam_eps &&
                  a.clip_norm == b.clip_norm;
  if (!ok)
    throw std::invalid_argument(
        "train: resume config differs from the checkpoint's in a field that "
        "changes the replayed schedule");
}

}  // namespace

TrainResult train(const std::vector<DatasetRecord>& records,
                  const Vocabulary& vocab, const ModelConfig& model_cfg_in,
                  const TrainConfig& train_cfg,
                  const std::function<void(const StepMetrics&)>& on_step,
                  const Checkpoint* resume_from) {
  if (records.empty()) throw std::invalid_argument("train: empty dataset");
  train_cfg.validate();

  ModelConfig mc = model_cfg_in;
  if (mc.vocab_size == 0) mc.vocab_size = vocab.size();
  mc.validate();

  ModelParams<float> params;
  Rng rng(train_cfg.seed);
  long step = 0;
  if (resume_from) {
    check_resume_compatible(train_cfg, resume_from->train_cfg);
    params = resume_from->params;
    rng.set_state(resume_from->rng_state);
    step = resume_from->step;
  } else {
    model_init(params, mc, rng);
  }

  AdamConfig adam_cfg{train_cfg.lr, train_cfg.beta1, train_cfg.beta2,
                      train_cfg.adam_eps, train_cfg.clip_norm};
  auto plist = model_params(params);
  Adam<float> adam(plist, adam_cfg);
  if (resume_from && !resume_from->adam_m.empty()) {
    adam.first_moments() = resume_from->adam_m;
    adam.second_moments() = resume_from->adam_v;
    adam.set_step_count(resume_from->adam_step);
  }

  LossWeights<float> weights{static_cast<float>(train_cfg.lambda_cls),
                             static_cast<float>(train_cfg.lambda_align),
                             static_cast<float>(train_cfg.lambda_recon),
                             static_cast<float>(train_cfg.tau)};

  const Corpus corpus = Corpus::build(records, vocab, mc.max_item_tokens);

  const long n = static_cast<long>(records.size());
  const long steps_per_epoch =
      (n + train_cfg.batch_size - 1) / train_cfg.batch_size;
  const long total_steps = train_cfg.max_steps > 0
                               ? train_cfg.max_steps
                               : steps_per_epoch * train_cfg.epochs;

  TrainResult result;
  ModelParams<float> grads = model_zeros_like(params);
  auto glist = model_params(grads);

  while (step < total_steps) {
    const long epoch = step / steps_per_epoch;
    const long offset = step % steps_per_epoch;
    const auto order =
        epoch_order(records.size(), train_cfg.seed, epoch);

    const std::size_t begin =
        static_cast<std::size_t>(offset) *
        static_cast<std::size_t>(train_cfg.batch_size);
    const std::size_t end = std::min(
        begin + static_cast<std::size_t>(train_cfg.batch_size), order.size());
    std::vector<const DatasetRecord*> chunk;
    chunk.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i)
      chunk.push_back(&records[order[i]]);

    TrainBatch batch = build_batch(chunk, corpus, vocab, mc, train_cfg, rng);

    zero_params(glist);
    LossBreakdown<float> losses =
        model_loss(params, batch, weights, &grads);
    if (!std::isfinite(losses.total))
      throw std::runtime_error("train: non-finite loss at step " +
                               std::to_string(step + 1));
    adam.step(plist, glist);
    ++step;

    StepMetrics m;
    m.step = step;
    m.gen = losses.gen;
    m.cls = losses.cls;
    m.align = losses.align;
    m.recon = losses.recon;
    m.total = losses.total;
    if (train_cfg.log_unweighted &&
        (weights.lambda_cls == 0 || weights.lambda_align == 0 ||
         weights.lambda_recon == 0)) {
      LossWeights<float> eval_w{1.0f, 1.0f, 1.0f,
                                static_cast<float>(train_cfg.tau)};
      const LossBreakdown<float> eval = model_loss<float>(params, batch, eval_w);
      if (weights.lambda_cls == 0) m.cls = eval.cls;
      if (weights.lambda_align == 0) m.align = eval.align;
      if (weights.lambda_recon == 0) m.recon = eval.recon;
    }
    result.metrics.push_back(m);
    if (on_step) on_step(m);
  }

  Checkpoint& ckpt = result.checkpoint;
  ckpt.model_cfg = mc;
  ckpt.train_cfg = train_cfg;
  ckpt.params = std::move(params);
  ckpt.step = step;
  ckpt.adam_step = adam.step_count();
  ckpt.adam_m = std::move(adam.first_moments());
  ckpt.adam_v = std::move(adam.second_moments());
  ckpt.rng_state = rng.state();
  ckpt.vocab_hash = vocab.content_hash();
  return result;
}

}  // namespace creagen
