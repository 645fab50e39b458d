#pragma once

#include <optional>
#include <string>
#include <vector>

#include "creagen/checkpoint.hpp"
#include "creagen/creative.hpp"
#include "creagen/datagen.hpp"
#include "creagen/kmeans.hpp"
#include "creagen/prompts.hpp"
#include "creagen/teacher.hpp"
#include "creagen/train_config.hpp"
#include "creagen/types.hpp"

// Offline evaluation: order-bias-controlled Good/Same/Bad judging, the
// advantage score, the hallucination pass rate, and the ablation harness.

namespace creagen {

// Real-valued so both raw judge counts and per-hundred table figures work.
struct GsbCounts {
  double good = 0, same = 0, bad = 0;
  double total() const { return good + same + bad; }
};

enum class GsbVerdict { kGood, kSame, kBad };

struct JudgeContext {
  std::string interests;
  Ad ad;
  std::optional<std::string> query;
};

// Judges (a, b) and (b, a); only consistent preferences count, anything
// else is Same. Good means title_a won both orders.
GsbVerdict gsb_judge(const std::string& title_a, const std::string& title_b,
                     const JudgeContext& ctx, TeacherClient& judge,
                     const PromptLibrary& prompts,
                     const DatagenConfig& cfg = {});

// (good - bad) / (good + same + bad), in [-1, 1].
double advantage(const GsbCounts& counts);

// Rendered to one decimal place, e.g. "43.6%".
std::string advantage_percent(const GsbCounts& counts);
std::string percent_one_decimal(double fraction);

struct PassRateReport {
  int total = 0;
  int passed = 0;
  int excluded = 0;  // judge kept failing after retries
  double pass_rate = 0;
  std::vector<std::string> warnings;
};

// Fraction of titles that pass the hallucination filter. Reuses the data
// pipeline's filter prompt; titles whose judge calls keep failing are
// excluded and reported separately.
PassRateReport hallucination_pass_rate(
    const std::vector<std::pair<std::string, Ad>>& titles_with_ads,
    TeacherClient& client, const PromptLibrary& prompts,
    const DatagenConfig& cfg = {});

// ---- title-file based GSB evaluation (the CLI surface) ----

struct TitleEntry {
  std::string id;  // joined against the context record's ad_id
  std::string title;
};

std::vector<TitleEntry> read_titles(const std::string& path);
void write_titles(const std::vector<TitleEntry>& titles,
                  const std::string& path);

struct GsbReport {
  GsbCounts counts;
  double advantage_value = 0;
  int judged = 0;
  int skipped = 0;  // records with no title on either side
};

GsbReport evaluate_gsb(const std::vector<TitleEntry>& titles_a,
                       const std::vector<TitleEntry>& titles_b,
                       const std::vector<DatasetRecord>& contexts,
                       TeacherClient& judge, const PromptLibrary& prompts,
                       const DatagenConfig& cfg = {});

std::string gsb_report_to_json(const GsbReport& report);

// ---- ablation harness ----

struct AuxLossToggle {
  std::string name;
  bool align = false;
  bool cls = false;
  bool recon = false;
};

// The six-configuration grid: none, each loss alone, align+cls, all three.
std::vector<AuxLossToggle> aux_loss_grid();

struct AblationRow {
  std::string name;
  GsbCounts counts;
  double advantage_value = 0;
  bool skipped = false;
  std::string note;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::string render_table() const;
  std::string to_json_lines() const;
};

struct AblationOptions {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  KmeansOptions kmeans;
  int cluster_k = 8;   // clustering used for aux-loss rows
  int eval_limit = 0;  // 0 = every eval record
};

// One row per loss-toggle configuration: train with the toggles, generate a
// title per eval record from the user's cluster center, judge against the
// original title.
AblationReport run_aux_loss_ablation(const std::vector<AuxLossToggle>& grid,
                                     const std::vector<DatasetRecord>& train_records,
                                     const std::vector<DatasetRecord>& eval_records,
                                     const Vocabulary& vocab,
                                     TeacherClient& judge,
                                     const PromptLibrary& prompts,
                                     const AblationOptions& opts);

// One row per cluster count over a single trained checkpoint; nullopt is
// the no-clustering sentinel (every user its own center).
AblationReport run_cluster_ablation(const std::vector<std::optional<int>>& ks,
                                    const Checkpoint& ckpt,
                                    const std::vector<DatasetRecord>& eval_records,
                                    const Vocabulary& vocab,
                                    TeacherClient& judge,
                                    const PromptLibrary& prompts,
                                    const AblationOptions& opts);

}  // namespace creagen
