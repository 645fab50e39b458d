#pragma once

// Deterministic synthetic fixtures shared across the test suite.

#include <set>
#include <string>
#include <vector>

#include "creagen/model.hpp"
#include "creagen/rng.hpp"
#include "creagen/training.hpp"
#include "creagen/types.hpp"
#include "creagen/vocab.hpp"

namespace fixtures {

using namespace creagen;

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {
      "shoes",  "espresso", "backpack", "keyboard", "lamp",   "bottle",
      "jacket", "monitor",  "skillet",  "tent",     "router", "blender",
      "duvet",  "tripod",   "scooter",  "heater"};
  return v;
}

inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v = {
      "light",   "quiet",   "foldable", "wireless", "insulated", "compact",
      "durable", "ceramic", "portable", "ergonomic", "fast",     "warm"};
  return v;
}

inline const std::vector<std::string>& benefits() {
  static const std::vector<std::string> v = {
      "long battery life", "easy to clean",   "two year warranty",
      "fits small desks",  "machine washable", "silent operation",
      "quick setup",       "saves energy",     "water resistant"};
  return v;
}

inline std::string pick(const std::vector<std::string>& bank, Rng& rng) {
  return bank[static_cast<std::size_t>(rng.uniform(bank.size()))];
}

inline Item make_item(const std::string& id, Rng& rng) {
  Item item;
  item.item_id = id;
  item.title = pick(adjectives(), rng) + " " + pick(nouns(), rng);
  if (rng.uniform(2) == 0)
    item.attributes.emplace_back("feature", pick(benefits(), rng));
  return item;
}

// A pool of items whose flattened texts are pairwise distinct.
inline std::vector<Item> make_item_pool(int n, Rng& rng) {
  std::vector<Item> pool;
  std::set<std::string> seen;
  while (static_cast<int>(pool.size()) < n) {
    Item item = make_item("item-" + std::to_string(pool.size()), rng);
    if (seen.insert(flatten_item_text(item)).second)
      pool.push_back(std::move(item));
  }
  return pool;
}

inline Ad make_ad(const std::string& id, Rng& rng, bool with_query) {
  Ad ad;
  ad.ad_id = id;
  ad.original_title = pick(adjectives(), rng) + " " + pick(nouns(), rng);
  ad.selling_points = {pick(benefits(), rng), pick(benefits(), rng)};
  if (with_query) ad.query = pick(nouns(), rng);
  return ad;
}

struct RecordOptions {
  int min_history = 2;
  int max_history = 4;
  bool with_queries = true;
  int shared_item_pool = 24;  // distinct items across users
};

// n records with distinct users/ads, histories drawn from a shared item
// pool, simple interest texts, and canonical (space-joined) responses.
inline std::vector<DatasetRecord> make_records(int n, std::uint64_t seed,
                                               const RecordOptions& opts = {}) {
  Rng rng(seed);
  const std::vector<Item> pool = make_item_pool(opts.shared_item_pool, rng);

  std::vector<DatasetRecord> records;
  for (int u = 0; u < n; ++u) {
    DatasetRecord r;
    r.user_id = "user-" + std::to_string(u);
    const int len =
        opts.min_history +
        static_cast<int>(rng.uniform(
            static_cast<std::uint64_t>(opts.max_history - opts.min_history + 1)));
    for (int i = 0; i < len; ++i)
      r.history.push_back(
          pool[static_cast<std::size_t>(rng.uniform(pool.size()))]);
    r.ad = make_ad("ad-" + std::to_string(u), rng,
                   opts.with_queries && rng.uniform(2) == 0);
    r.interest_text = "likes " + pick(nouns(), rng) + " and " +
                      pick(adjectives(), rng) + " gear";
    r.response = r.ad.original_title + " with " + pick(benefits(), rng);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<RawLog> make_raw_logs(int n, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<Item> pool = make_item_pool(24, rng);
  std::vector<RawLog> logs;
  for (int u = 0; u < n; ++u) {
    RawLog log;
    log.user_id = "user-" + std::to_string(u);
    const int len = 2 + static_cast<int>(rng.uniform(3));
    for (int i = 0; i < len; ++i)
      log.history.push_back(
          pool[static_cast<std::size_t>(rng.uniform(pool.size()))]);
    log.ad = make_ad("ad-" + std::to_string(u), rng, rng.uniform(2) == 0);
    logs.push_back(std::move(log));
  }
  return logs;
}

inline Vocabulary vocab_for(const std::vector<DatasetRecord>& records) {
  std::vector<std::string> texts;
  for (const auto& r : records) {
    for (const auto& item : r.history) texts.push_back(flatten_item_text(item));
    texts.push_back(flatten_item_text(ad_as_item(r.ad)));
    if (r.ad.query) texts.push_back(*r.ad.query);
    texts.push_back(r.interest_text);
    texts.push_back(r.response);
  }
  return Vocabulary::build(texts);
}

// Desk-tiny dimensions that keep unit tests fast.
inline ModelConfig tiny_model_cfg(int vocab_size) {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.enc_d_model = 16;
  cfg.enc_layers = 1;
  cfg.enc_heads = 2;
  cfg.dec_d_model = 24;
  cfg.dec_layers = 1;
  cfg.dec_heads = 2;
  cfg.dec_max_positions = 96;
  cfg.mixer_layers = 1;
  cfg.mixer_hidden = 8;
  cfg.max_history = 16;
  cfg.max_item_tokens = 16;
  cfg.max_ad_tokens = 24;
  cfg.max_query_tokens = 8;
  cfg.max_response_tokens = 24;
  cfg.max_interest_tokens = 16;
  return cfg;
}

// Gradient-check dimensions per the acceptance contract (d <= 8, vocab <= 20).
inline ModelConfig gradcheck_model_cfg(int vocab_size = 19) {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.enc_d_model = 6;
  cfg.enc_layers = 1;
  cfg.enc_heads = 2;
  cfg.dec_d_model = 8;
  cfg.dec_layers = 1;
  cfg.dec_heads = 2;
  cfg.dec_max_positions = 32;
  cfg.mixer_layers = 1;
  cfg.mixer_hidden = 5;
  cfg.max_history = 8;
  cfg.max_item_tokens = 8;
  cfg.max_ad_tokens = 8;
  cfg.max_query_tokens = 4;
  cfg.max_response_tokens = 8;
  cfg.max_interest_tokens = 8;
  return cfg;
}

// Random token ids avoiding the reserved range.
inline std::vector<int> random_tokens(int len, int vocab_size, Rng& rng) {
  std::vector<int> out;
  for (int i = 0; i < len; ++i)
    out.push_back(Vocabulary::kNumReserved +
                  static_cast<int>(rng.uniform(static_cast<std::uint64_t>(
                      vocab_size - Vocabulary::kNumReserved))));
  return out;
}

// A small random token-level batch for model-level tests.
inline TrainBatch random_batch(int n_examples, int vocab_size,
                               std::uint64_t seed) {
  Rng rng(seed);
  TrainBatch b;
  for (int e = 0; e < n_examples; ++e) {
    BatchExample ex;
    const int n_items = 1 + static_cast<int>(rng.uniform(2));
    for (int i = 0; i < n_items; ++i)
      ex.history_tokens.push_back(
          random_tokens(1 + static_cast<int>(rng.uniform(3)), vocab_size, rng));
    ex.prompt_tokens = random_tokens(3, vocab_size, rng);
    ex.prompt_tokens.push_back(Vocabulary::kBos);
    ex.response_tokens = random_tokens(3, vocab_size, rng);
    ex.interest_tokens = random_tokens(3, vocab_size, rng);
    b.examples.push_back(std::move(ex));
    b.cls_pairs.push_back(
        {e, b.examples.back().history_tokens[0], 1});
    b.cls_pairs.push_back({e, random_tokens(2, vocab_size, rng), 0});
  }
  return b;
}

}  // namespace fixtures
