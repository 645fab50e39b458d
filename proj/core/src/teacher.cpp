#include "creagen/teacher.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <map>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "creagen/hash.hpp"
#include "creagen/vocab.hpp"

namespace creagen {

std::string complete_with_retry(TeacherClient& client,
                                const std::string& prompt,
                                const DecodeOptions& opts, int max_attempts,
                                int backoff_ms) {
  for (int attempt = 1;; ++attempt) {
    try {
      return client.complete(prompt, opts);
    } catch (const TeacherError& e) {
      if (!e.retriable() || attempt >= max_attempts)
        throw TeacherError(e.what(), e.retriable(), attempt);
      if (backoff_ms > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(backoff_ms * attempt));
    }
  }
}

namespace {

// Text of the line following `prefix`, or empty when absent.
std::string line_after(const std::string& text, const std::string& prefix) {
  const auto pos = text.find(prefix);
  if (pos == std::string::npos) return "";
  const auto start = pos + prefix.size();
  const auto end = text.find('\n', start);
  return text.substr(start,
                     end == std::string::npos ? std::string::npos : end - start);
}

// Lines between the line containing `begin_marker` and the first following
// line that starts with `end_prefix`.
std::string block_between(const std::string& text,
                          const std::string& begin_marker,
                          const std::string& end_prefix) {
  const auto pos = text.find(begin_marker);
  if (pos == std::string::npos) return "";
  auto start = text.find('\n', pos);
  if (start == std::string::npos) return "";
  ++start;
  const auto end = text.find("\n" + end_prefix, start - 1);
  return text.substr(start, end == std::string::npos ? std::string::npos
                                                     : end - start + 1);
}

std::vector<std::string> content_words(const std::string& text) {
  std::vector<std::string> out;
  for (auto& w : Vocabulary::split_words(text)) {
    if (w.size() < 2) continue;
    std::string lower = w;
    for (auto& c : lower)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(lower);
  }
  return out;
}

std::string join(const std::vector<std::string>& words, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < words.size() && i < limit; ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  return out;
}

std::vector<std::string> digit_runs(const std::string& text) {
  std::vector<std::string> runs;
  std::string current;
  for (unsigned char c : text) {
    if (std::isdigit(c)) {
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      runs.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) runs.push_back(current);
  return runs;
}

std::string mock_profile(const std::string& prompt) {
  const std::string history =
      block_between(prompt, "most recent last:", "Current search query:");
  const std::string query = line_after(prompt, "Current search query: ");

  std::vector<std::string> lines;
  {
    std::string current;
    for (char c : history) {
      if (c == '\n') {
        if (!current.empty()) lines.push_back(current);
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    if (!current.empty()) lines.push_back(current);
  }

  std::map<std::string, int> freq;
  for (const auto& line : lines)
    for (const auto& w : content_words(line)) ++freq[w];
  std::vector<std::pair<std::string, int>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> long_term;
  for (std::size_t i = 0; i < by_freq.size() && i < 3; ++i)
    long_term.push_back(by_freq[i].first);

  const std::vector<std::string> recent =
      lines.empty() ? std::vector<std::string>{} : content_words(lines.back());
  const std::vector<std::string> query_words = content_words(query);

  std::string needs = join(query_words, 3);
  if (needs.empty()) needs = join(recent, 2);
  if (needs.empty()) needs = "general value";

  return "long_term: " + join(long_term, 3) + "\n" +
         "short_term: " + join(recent, 3) + "\n" + "specific_needs: " + needs +
         "\n";
}

std::string mock_title(const std::string& prompt, double hallucination_rate) {
  const std::string interests =
      block_between(prompt, "User interests:", "Ad original title:");
  const std::string ad_title = line_after(prompt, "Ad original title: ");
  const std::string selling = line_after(prompt, "Ad selling points: ");

  std::vector<std::string> points;
  {
    std::string current;
    for (char c : selling) {
      if (c == '|') {
        if (!current.empty()) points.push_back(current);
        current.clear();
      } else if (!(current.empty() && c == ' ')) {
        current.push_back(c);
      }
    }
    if (!current.empty()) points.push_back(current);
    for (auto& pt : points)
      while (!pt.empty() && pt.back() == ' ') pt.pop_back();
  }

  const std::vector<std::string> interest_words = content_words(interests);
  const std::uint64_t h = fnv1a64(ad_title + "\x1f" + interests);
  std::string chosen_point =
      points.empty() ? "" : points[h % points.size()];
  const std::string trait =
      interest_words.empty() ? "value" : interest_words[h % interest_words.size()];

  std::string title = ad_title;
  if (!chosen_point.empty()) title += " - " + chosen_point;
  title += " for " + trait + " fans";

  const bool hallucinate =
      static_cast<double>(fnv1a64(prompt) % 1000) < hallucination_rate * 1000.0;
  if (hallucinate) title += " only 9999 left";

  return "traits: " + join(interest_words, 2) + "\nselling_points: " +
         chosen_point + "\ntitle: " + title + "\n";
}

std::string mock_filter(const std::string& prompt) {
  const std::string candidate = line_after(prompt, "Candidate title: ");
  const std::string ad_title = line_after(prompt, "Ad original title: ");
  const std::string selling = line_after(prompt, "Ad selling points: ");
  const std::string source = ad_title + " " + selling;
  nlohmann::json findings = nlohmann::json::object();
  for (const auto& run : digit_runs(candidate))
    if (source.find(run) == std::string::npos)
      findings[run] = "number not present in the ad text";
  if (findings.empty()) return "{}";
  return findings.dump();
}

std::string mock_judge(const std::string& prompt) {
  const std::string interests =
      block_between(prompt, "User interests:", "Ad original title:");
  const std::string query = line_after(prompt, "Search query: ");
  const std::string title_a = line_after(prompt, "Title A: ");
  const std::string title_b = line_after(prompt, "Title B: ");

  std::vector<std::string> wanted = content_words(interests);
  for (auto& w : content_words(query)) wanted.push_back(w);

  auto overlap = [&wanted](const std::string& title) {
    const auto words = content_words(title);
    int score = 0;
    for (const auto& w : wanted)
      if (std::find(words.begin(), words.end(), w) != words.end()) ++score;
    return score;
  };
  const int a = overlap(title_a), b = overlap(title_b);
  if (a > b) return "A";
  if (b > a) return "B";
  return "A";  // tie: first-listed, an order bias by construction
}

}  // namespace

std::string MockTeacherClient::complete(const std::string& prompt,
                                        const DecodeOptions& opts) {
  (void)opts;
  const int call = calls_.fetch_add(1);
  if (call < cfg_.transient_failures)
    throw TeacherError("mock transient failure", /*retriable=*/true);

  if (prompt.rfind("You are profiling one user", 0) == 0)
    return mock_profile(prompt);
  if (prompt.rfind("You are writing one personalized ad title", 0) == 0)
    return mock_title(prompt, cfg_.hallucination_rate);
  if (prompt.rfind("You are a strict fact checker", 0) == 0)
    return mock_filter(prompt);
  if (prompt.rfind("You compare two ad titles", 0) == 0)
    return mock_judge(prompt);
  throw TeacherError("mock teacher does not recognize this prompt format",
                     /*retriable=*/false);
}

std::string HttpTeacherClient::complete(const std::string& prompt,
                                        const DecodeOptions& opts) {
  httplib::Client cli(cfg_.base_url);
  cli.set_connection_timeout(0, cfg_.timeout_ms * 1000);
  cli.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

  httplib::Headers headers;
  if (!cfg_.auth_token_env.empty()) {
    const char* token = std::getenv(cfg_.auth_token_env.c_str());
    if (!token)
      throw TeacherError("auth token env var is not set: " + cfg_.auth_token_env,
                         /*retriable=*/false);
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  nlohmann::json body = {{"model", cfg_.model},
                         {"prompt", prompt},
                         {"temperature", opts.temperature},
                         {"max_tokens", opts.max_tokens}};
  auto res = cli.Post(cfg_.path, headers, body.dump(), "application/json");
  if (!res)
    throw TeacherError("teacher endpoint unreachable: " + cfg_.base_url,
                       /*retriable=*/true);
  if (res->status >= 500)
    throw TeacherError("teacher endpoint returned " +
                           std::to_string(res->status),
                       /*retriable=*/true);
  if (res->status != 200)
    throw TeacherError("teacher endpoint returned " +
                           std::to_string(res->status) + ": " + res->body,
                       /*retriable=*/false);
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("text").get<std::string>();
  } catch (const std::exception& e) {
    throw TeacherError(std::string("malformed teacher response: ") + e.what(),
                       /*retriable=*/false);
  }
}

}  // namespace creagen
