#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace creagen {

// A named prompt template with {placeholder} slots. Rendering substitutes
// every named placeholder and fails on any left unbound; a bare "{}" is
// literal text (the hallucination filter's pass sentinel uses it).
struct PromptTemplate {
  std::string name;
  std::string text;

  std::string render(const std::map<std::string, std::string>& values) const;
  std::uint64_t content_hash() const;
};

// The four pipeline prompts. Defaults are compiled in; a directory of
// <name>.txt files can override them so prompt revisions version alongside
// the data they produced.
struct PromptLibrary {
  PromptTemplate interest_profiling;
  PromptTemplate title_generation;
  PromptTemplate hallucination_filter;
  PromptTemplate gsb_judge;

  static PromptLibrary defaults();
  static PromptLibrary load_dir(const std::string& dir);
  void save_dir(const std::string& dir) const;

  std::map<std::string, std::string> hashes_hex() const;
};

}  // namespace creagen
