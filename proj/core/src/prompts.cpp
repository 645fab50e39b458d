#include "creagen/prompts.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "creagen/hash.hpp"

namespace creagen {

std::string PromptTemplate::render(
    const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '{') {
      out.push_back(c);
      ++i;
      continue;
    }
    const std::size_t close = text.find('}', i + 1);
    if (close == std::string::npos) {
      out.push_back(c);
      ++i;
      continue;
    }
    const std::string key = text.substr(i + 1, close - i - 1);
    const bool is_name =
        !key.empty() &&
        std::all_of(key.begin(), key.end(), [](unsigned char ch) {
          return std::isalnum(ch) || ch == '_';
        });
    if (!is_name) {  // literal braces, e.g. the "{}" sentinel
      out.append(text, i, close - i + 1);
      i = close + 1;
      continue;
    }
    const auto it = values.find(key);
    if (it == values.end())
      throw std::invalid_argument("prompt template \"" + name +
                                  "\": unbound placeholder {" + key + "}");
    out += it->second;
    i = close + 1;
  }
  return out;
}

std::uint64_t PromptTemplate::content_hash() const { return fnv1a64(text); }

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary lib;
  lib.interest_profiling = {
      "interest_profiling",
      "You are profiling one user for ad personalization.\n"
      "Items the user clicked, most recent last:\n"
      "{history}\n"
      "Current search query: {query}\n"
      "Describe this user's interests, one line per dimension, grounded only\n"
      "in the items above. Respond with exactly three lines:\n"
      "long_term: <stable interests seen across many items>\n"
      "short_term: <recent preferences from the latest items>\n"
      "specific_needs: <the immediate need implied by the query or latest "
      "item>\n"};
  lib.title_generation = {
      "title_generation",
      "You are writing one personalized ad title.\n"
      "Items the user clicked, most recent last:\n"
      "{history}\n"
      "User interests:\n"
      "{interests}\n"
      "Ad original title: {ad_title}\n"
      "Ad selling points: {selling_points}\n"
      "Search query: {query}\n"
      "Step 1: pick the user traits worth addressing in this ad.\n"
      "Step 2: pick the selling points this user cares about most.\n"
      "Step 3: combine them into one title. Use only facts from the original\n"
      "title and selling points; never invent numbers, places, or brands.\n"
      "Respond with exactly three lines:\n"
      "traits: <chosen user traits>\n"
      "selling_points: <chosen selling points>\n"
      "title: <the personalized title>\n"};
  lib.hallucination_filter = {
      "hallucination_filter",
      "You are a strict fact checker for ad titles.\n"
      "Candidate title: {title}\n"
      "Ad original title: {ad_title}\n"
      "Ad selling points: {selling_points}\n"
      "List every claim in the candidate that is not grounded in the ad text\n"
      "above, as a JSON object mapping each ungrounded claim to a short\n"
      "reason. Audience wording (who the ad speaks to) is not a claim.\n"
      "If every claim is grounded, respond with exactly {} and nothing "
      "else.\n"};
  lib.gsb_judge = {
      "gsb_judge",
      "You compare two ad titles for one user.\n"
      "User interests:\n"
      "{interests}\n"
      "Ad original title: {ad_title}\n"
      "Ad selling points: {selling_points}\n"
      "Search query: {query}\n"
      "Title A: {title_a}\n"
      "Title B: {title_b}\n"
      "Which title would this user prefer, judged on interest match and\n"
      "factual grounding? Respond with exactly one word: A, B, or Same.\n"};
  return lib;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open prompt template: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PromptLibrary PromptLibrary::load_dir(const std::string& dir) {
  PromptLibrary lib = defaults();
  for (PromptTemplate* t :
       {&lib.interest_profiling, &lib.title_generation,
        &lib.hallucination_filter, &lib.gsb_judge}) {
    const std::filesystem::path path =
        std::filesystem::path(dir) / (t->name + ".txt");
    if (std::filesystem::exists(path)) t->text = read_file(path);
  }
  return lib;
}

void PromptLibrary::save_dir(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  for (const PromptTemplate* t :
       {&interest_profiling, &title_generation, &hallucination_filter,
        &gsb_judge}) {
    std::ofstream out(std::filesystem::path(dir) / (t->name + ".txt"),
                      std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot write prompt template " + t->name);
    out << t->text;
  }
}

std::map<std::string, std::string> PromptLibrary::hashes_hex() const {
  std::map<std::string, std::string> out;
  for (const PromptTemplate* t :
       {&interest_profiling, &title_generation, &hallucination_filter,
        &gsb_judge}) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(t->content_hash()));
    out[t->name] = buf;
  }
  return out;
}

}  // namespace creagen
