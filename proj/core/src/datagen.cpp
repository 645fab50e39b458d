#include "creagen/datagen.hpp"

#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "creagen/hash.hpp"

namespace creagen {

std::string render_history(const std::vector<Item>& history, int limit) {
  const std::size_t keep = limit > 0
                               ? std::min(history.size(),
                                          static_cast<std::size_t>(limit))
                               : history.size();
  std::string out;
  for (std::size_t i = history.size() - keep; i < history.size(); ++i) {
    out += "- ";
    out += flatten_item_text(history[i]);
    out += '\n';
  }
  if (out.empty()) out = "- (none)\n";
  return out;
}

std::string render_selling_points(const std::vector<std::string>& points) {
  std::string out;
  for (const auto& p : points) {
    if (!out.empty()) out += " | ";
    out += p;
  }
  return out.empty() ? "(none)" : out;
}

namespace {

std::string query_or_none(const std::optional<std::string>& query) {
  return query && !query->empty() ? *query : "(none)";
}

std::string trimmed(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Value of the last line that starts with `key:`; empty when absent.
std::string field_line(const std::string& text, const std::string& key) {
  std::string value;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string line =
        text.substr(pos, eol == std::string::npos ? std::string::npos
                                                  : eol - pos);
    if (line.rfind(key + ":", 0) == 0)
      value = trimmed(line.substr(key.size() + 1));
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return value;
}

}  // namespace

std::string profile_user_interests(const std::vector<Item>& history,
                                   const std::optional<std::string>& query,
                                   TeacherClient& client,
                                   const PromptLibrary& prompts,
                                   const DatagenConfig& cfg,
                                   std::uint64_t* prompt_hash) {
  if (history.empty())
    throw std::invalid_argument(
        "profile_user_interests: empty history, nothing to profile");
  const std::string prompt = prompts.interest_profiling.render(
      {{"history", render_history(history, cfg.history_render_limit)},
       {"query", query_or_none(query)}});
  if (prompt_hash) *prompt_hash = fnv1a64(prompt);
  return complete_with_retry(client, prompt, {}, cfg.max_attempts,
                             cfg.backoff_ms);
}

GeneratedTitle generate_personalized_title(
    const std::vector<Item>& history, const std::string& interests,
    const Ad& ad, const std::optional<std::string>& query,
    TeacherClient& client, const PromptLibrary& prompts,
    const DatagenConfig& cfg) {
  if (interests.empty())
    throw std::invalid_argument(
        "generate_personalized_title: interests are empty; run profiling "
        "first");
  const std::string prompt = prompts.title_generation.render(
      {{"history", render_history(history, cfg.history_render_limit)},
       {"interests", interests},
       {"ad_title", ad.original_title},
       {"selling_points", render_selling_points(ad.selling_points)},
       {"query", query_or_none(query)}});
  const std::string reply =
      complete_with_retry(client, prompt, {}, cfg.max_attempts, cfg.backoff_ms);

  GeneratedTitle out;
  out.traits = field_line(reply, "traits");
  out.selling_points = field_line(reply, "selling_points");
  out.title = field_line(reply, "title");
  if (out.title.empty())
    throw std::runtime_error(
        "unparseable title generation response (no title line): " + reply);
  return out;
}

FilterVerdict hallucination_filter(const std::string& title, const Ad& ad,
                                   TeacherClient& client,
                                   const PromptLibrary& prompts,
                                   const DatagenConfig& cfg) {
  if (title.empty())
    throw std::invalid_argument("hallucination_filter: empty title");
  const std::string prompt = prompts.hallucination_filter.render(
      {{"title", title},
       {"ad_title", ad.original_title},
       {"selling_points", render_selling_points(ad.selling_points)}});
  const std::string reply = trimmed(
      complete_with_retry(client, prompt, {}, cfg.max_attempts, cfg.backoff_ms));
  if (reply == "{}") return {true, ""};
  return {false, reply};
}

DatagenResult build_dataset(const std::vector<RawLog>& logs,
                            TeacherClient& client, const PromptLibrary& prompts,
                            const DatagenConfig& cfg) {
  DatagenResult result;
  result.stats.input_rows = static_cast<int>(logs.size());
  result.stats.prompt_hashes = prompts.hashes_hex();
  if (logs.empty()) return result;

  enum class Outcome { kPass, kFilteredOut, kQuarantined };
  struct RowResult {
    Outcome outcome = Outcome::kQuarantined;
    bool profiled = false;
    bool generated = false;
    DatasetRecord record;
    std::string note;
  };
  std::vector<RowResult> rows(logs.size());

  auto process_row = [&](std::size_t i) {
    const RawLog& log = logs[i];
    RowResult& row = rows[i];
    try {
      const std::string interests = profile_user_interests(
          log.history, log.ad.query, client, prompts, cfg);
      row.profiled = true;
      const GeneratedTitle gen = generate_personalized_title(
          log.history, interests, log.ad, log.ad.query, client, prompts, cfg);
      row.generated = true;
      const FilterVerdict verdict =
          hallucination_filter(gen.title, log.ad, client, prompts, cfg);
      if (!verdict.pass) {
        row.outcome = Outcome::kFilteredOut;
        row.note = verdict.reason;
        return;
      }
      row.record.user_id = log.user_id;
      row.record.history = log.history;
      row.record.ad = log.ad;
      row.record.interest_text = interests;
      row.record.response = gen.title;
      row.outcome = Outcome::kPass;
    } catch (const std::exception& e) {
      row.outcome = Outcome::kQuarantined;
      row.note = e.what();
    }
  };

  const int workers =
      std::max(1, std::min<int>(cfg.concurrency,
                                static_cast<int>(logs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < logs.size(); ++i) process_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < logs.size();
             i = next.fetch_add(1))
          process_row(i);
      });
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RowResult& row = rows[i];
    if (row.profiled) ++result.stats.profiled;
    if (row.generated) ++result.stats.generated;
    switch (row.outcome) {
      case Outcome::kPass:
        ++result.stats.passed_filter;
        result.records.push_back(row.record);
        break;
      case Outcome::kFilteredOut:
        ++result.stats.dropped_by_filter;
        break;
      case Outcome::kQuarantined:
        ++result.stats.quarantined;
        result.stats.quarantine_log.push_back("row " + std::to_string(i) +
                                              ": " + row.note);
        break;
    }
  }
  return result;
}

std::string stats_to_json(const DatagenStats& stats) {
  nlohmann::json j = {{"input_rows", stats.input_rows},
                      {"profiled", stats.profiled},
                      {"generated", stats.generated},
                      {"passed_filter", stats.passed_filter},
                      {"dropped_by_filter", stats.dropped_by_filter},
                      {"quarantined", stats.quarantined},
                      {"retention", stats.retention()},
                      {"quarantine_log", stats.quarantine_log},
                      {"prompt_hashes", stats.prompt_hashes}};
  return j.dump(2);
}

}  // namespace creagen
