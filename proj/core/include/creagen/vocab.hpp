#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace creagen {

// Word-level vocabulary over whitespace-plus-punctuation tokens, built from
// a training corpus with a frequency cutoff. Reserved tokens occupy the
// first ids, in this order, and the line number of a vocabulary file equals
// the token id.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kItem = 4;
  static constexpr int kUser = 5;
  static constexpr int kSep = 6;
  static constexpr int kNumReserved = 7;

  static const std::vector<std::string>& reserved_tokens();

  // Splits text into word tokens: maximal alnum/non-ASCII runs, with every
  // ASCII punctuation character a token of its own.
  static std::vector<std::string> split_words(const std::string& text);

  // Builds a vocabulary from raw texts, keeping tokens seen at least
  // min_count times, ordered by descending frequency then lexicographically.
  static Vocabulary build(const std::vector<std::string>& texts,
                          int min_count = 1);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  // Content hash, stored in checkpoints so a model is never run against a
  // vocabulary it was not trained with.
  std::uint64_t content_hash() const;

  std::vector<int> encode(const std::vector<std::string>& words) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;
  std::string decode_text(const std::vector<int>& ids) const;

 private:
  void add_token(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Tokenizes text to ids, truncating to the first max_len tokens.
// Out-of-vocabulary words map to the reserved unknown id.
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab,
                          int max_len);

}  // namespace creagen
