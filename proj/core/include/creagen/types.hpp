#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace creagen {

// One entry of a user's click history.
struct Item {
  std::string item_id;
  std::string title;
  std::vector<std::pair<std::string, std::string>> attributes;
};

// Ad-side constraints: the only admissible sources of generated content.
struct Ad {
  std::string ad_id;
  std::string original_title;
  std::vector<std::string> selling_points;
  std::optional<std::string> query;
};

struct ClickLabel {
  std::string item_id;
  int label = 0;  // 1 = clicked, 0 = not clicked
};

// One training example: user history, ad constraints, profiled interests,
// and the target personalized title.
struct DatasetRecord {
  std::string user_id;
  std::vector<Item> history;  // most-recent-last
  Ad ad;
  std::string interest_text;
  std::string response;
  std::vector<ClickLabel> click_labels;
};

enum class GenerationMode { kQueryAware, kQueryFree };

inline const char* to_string(GenerationMode m) {
  return m == GenerationMode::kQueryAware ? "query-aware" : "query-free";
}

struct FilterVerdict {
  bool pass = true;
  std::string reason;  // first violated rule name when pass is false
};

// A generated title bound to (ad, cluster, mode); the unit stored in the
// creative library.
struct CreativeCandidate {
  std::string ad_id;
  int cluster_id = 0;
  GenerationMode mode = GenerationMode::kQueryFree;
  std::optional<std::string> query;  // set for query-aware candidates
  std::string title;
  double match_score = 0.0;  // predictor score of the source cluster, in (0,1)
  FilterVerdict verdict;
};

// One online impression log row: the input to dataset construction, before
// interests and personalized titles exist.
struct RawLog {
  std::string user_id;
  std::vector<Item> history;  // most-recent-last
  Ad ad;                      // ad.query carries the search query, if any
};

// Flattens an item into one deterministic sentence: the title, then each
// attribute as "key: value", joined by " ; ".
inline std::string flatten_item_text(const Item& item) {
  std::string out = item.title;
  for (const auto& [key, value] : item.attributes) {
    out += " ; ";
    out += key;
    out += ": ";
    out += value;
  }
  return out;
}

// The ad rendered as a pseudo-item so the item encoder can embed it and the
// decoder prompt can spell out its constraints.
inline Item ad_as_item(const Ad& ad) {
  Item item;
  item.item_id = ad.ad_id;
  item.title = ad.original_title;
  for (const auto& sp : ad.selling_points)
    item.attributes.emplace_back("selling point", sp);
  return item;
}

}  // namespace creagen
