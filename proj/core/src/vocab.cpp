#include "creagen/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "creagen/hash.hpp"

namespace creagen {

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> kReserved = {
      "[pad]", "[unk]", "[bos]", "[eos]", "[item]", "[user]", "[sep]"};
  return kReserved;
}

std::vector<std::string> Vocabulary::split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c));
    }
  }
  flush();
  return words;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts,
                             int min_count) {
  std::map<std::string, int> counts;
  for (const auto& text : texts)
    for (auto& w : split_words(text)) ++counts[w];

  Vocabulary v;
  for (const auto& tok : reserved_tokens()) v.add_token(tok);

  std::vector<std::pair<std::string, int>> by_freq(counts.begin(),
                                                   counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, count] : by_freq) {
    if (count < min_count) continue;
    if (v.ids_.count(tok)) continue;  // a reserved literal in the corpus
    v.add_token(tok);
  }
  return v;
}

void Vocabulary::add_token(const std::string& token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.add_token(line);
  }
  const auto& reserved = reserved_tokens();
  if (v.size() < kNumReserved ||
      !std::equal(reserved.begin(), reserved.end(), v.tokens_.begin()))
    throw std::runtime_error("vocabulary file missing reserved token header: " +
                             path);
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const auto& tok : tokens_) out << tok << '\n';
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& tok : tokens_) {
    h = fnv1a64(tok, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::vector<int> Vocabulary::encode(
    const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id_of(w));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (int id : ids) words.push_back(token_of(id));
  return words;
}

std::string Vocabulary::decode_text(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token_of(ids[i]);
  }
  return out;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab,
                          int max_len) {
  if (max_len < 1) throw std::invalid_argument("tokenize: max_len must be >= 1");
  auto words = Vocabulary::split_words(text);
  if (static_cast<int>(words.size()) > max_len)
    words.resize(static_cast<std::size_t>(max_len));
  return vocab.encode(words);
}

}  // namespace creagen
