#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "creagen/prompts.hpp"
#include "creagen/teacher.hpp"
#include "creagen/types.hpp"

// CoT dataset construction: two teacher chat rounds (interest profiling,
// then interest-driven title generation) followed by a strict hallucination
// filter. Only rows whose titles pass the filter become training records.

namespace creagen {

struct DatagenConfig {
  int max_attempts = 3;
  int backoff_ms = 100;
  int concurrency = 1;          // bounded-parallel client calls
  int history_render_limit = 20;  // items rendered into prompts
};

// Prompt-side renderings shared by datagen and the offline judge.
std::string render_history(const std::vector<Item>& history, int limit);
std::string render_selling_points(const std::vector<std::string>& points);

// CoT round 1: renders the profiling template over the history and query
// and returns the teacher output verbatim.
std::string profile_user_interests(const std::vector<Item>& history,
                                   const std::optional<std::string>& query,
                                   TeacherClient& client,
                                   const PromptLibrary& prompts,
                                   const DatagenConfig& cfg = {},
                                   std::uint64_t* prompt_hash = nullptr);

struct GeneratedTitle {
  std::string traits;
  std::string selling_points;
  std::string title;
};

// CoT round 2: a second chat round over (history, interests, ad, query);
// the teacher reply is parsed into the traits / selling points / title
// lines. An unparseable reply raises an error carrying the raw text.
GeneratedTitle generate_personalized_title(
    const std::vector<Item>& history, const std::string& interests,
    const Ad& ad, const std::optional<std::string>& query,
    TeacherClient& client, const PromptLibrary& prompts,
    const DatagenConfig& cfg = {});

// Strict groundedness check: pass only when the teacher returns exactly the
// empty-findings sentinel "{}". The same prompt backs the offline
// hallucination pass-rate metric.
FilterVerdict hallucination_filter(const std::string& title, const Ad& ad,
                                   TeacherClient& client,
                                   const PromptLibrary& prompts,
                                   const DatagenConfig& cfg = {});

struct DatagenStats {
  int input_rows = 0;
  int profiled = 0;
  int generated = 0;
  int passed_filter = 0;
  int dropped_by_filter = 0;
  int quarantined = 0;
  std::vector<std::string> quarantine_log;  // "row <i>: <reason>"
  std::map<std::string, std::string> prompt_hashes;

  double retention() const {
    return input_rows ? static_cast<double>(passed_filter) / input_rows : 0.0;
  }
};

struct DatagenResult {
  std::vector<DatasetRecord> records;
  DatagenStats stats;
};

// Full pipeline over raw impression logs. Stage errors quarantine the row
// and never abort the batch; output order follows input order regardless of
// the concurrency level.
DatagenResult build_dataset(const std::vector<RawLog>& logs,
                            TeacherClient& client, const PromptLibrary& prompts,
                            const DatagenConfig& cfg = {});

std::string stats_to_json(const DatagenStats& stats);

}  // namespace creagen
