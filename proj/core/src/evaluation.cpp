#include "creagen/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "creagen/inference.hpp"
#include "creagen/training.hpp"

namespace creagen {

using nlohmann::json;

namespace {

// First-listed / second-listed / neither, from one judge call.
enum class RawPreference { kFirst, kSecond, kSame };

RawPreference parse_preference(const std::string& reply) {
  std::string t;
  for (char c : reply) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (t == "A") return RawPreference::kFirst;
  if (t == "B") return RawPreference::kSecond;
  if (t == "SAME") return RawPreference::kSame;
  throw TeacherError("judge reply is not one of A/B/Same: " + reply,
                     /*retriable=*/false);
}

RawPreference judge_once(const std::string& first, const std::string& second,
                         const JudgeContext& ctx, TeacherClient& judge,
                         const PromptLibrary& prompts,
                         const DatagenConfig& cfg) {
  const std::string prompt = prompts.gsb_judge.render(
      {{"interests", ctx.interests},
       {"ad_title", ctx.ad.original_title},
       {"selling_points", render_selling_points(ctx.ad.selling_points)},
       {"query", ctx.query && !ctx.query->empty() ? *ctx.query : "(none)"},
       {"title_a", first},
       {"title_b", second}});
  return parse_preference(complete_with_retry(judge, prompt, {},
                                              cfg.max_attempts, cfg.backoff_ms));
}

}  // namespace

GsbVerdict gsb_judge(const std::string& title_a, const std::string& title_b,
                     const JudgeContext& ctx, TeacherClient& judge,
                     const PromptLibrary& prompts, const DatagenConfig& cfg) {
  if (title_a.empty() || title_b.empty())
    throw std::invalid_argument("gsb_judge: empty title");
  const RawPreference forward =
      judge_once(title_a, title_b, ctx, judge, prompts, cfg);
  const RawPreference swapped =
      judge_once(title_b, title_a, ctx, judge, prompts, cfg);
  if (forward == RawPreference::kFirst && swapped == RawPreference::kSecond)
    return GsbVerdict::kGood;
  if (forward == RawPreference::kSecond && swapped == RawPreference::kFirst)
    return GsbVerdict::kBad;
  return GsbVerdict::kSame;
}

double advantage(const GsbCounts& counts) {
  const double total = counts.total();
  if (!(total > 0))
    throw std::invalid_argument("advantage: zero total judgment count");
  return (counts.good - counts.bad) / total;
}

std::string percent_one_decimal(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
  return buf;
}

std::string advantage_percent(const GsbCounts& counts) {
  return percent_one_decimal(advantage(counts));
}

PassRateReport hallucination_pass_rate(
    const std::vector<std::pair<std::string, Ad>>& titles_with_ads,
    TeacherClient& client, const PromptLibrary& prompts,
    const DatagenConfig& cfg) {
  if (titles_with_ads.empty())
    throw std::invalid_argument("hallucination_pass_rate: empty title set");
  PassRateReport report;
  report.total = static_cast<int>(titles_with_ads.size());
  int judged = 0;
  for (const auto& [title, ad] : titles_with_ads) {
    try {
      const FilterVerdict v =
          hallucination_filter(title, ad, client, prompts, cfg);
      ++judged;
      if (v.pass) ++report.passed;
    } catch (const std::exception& e) {
      ++report.excluded;
      report.warnings.push_back("excluded \"" + title + "\": " + e.what());
    }
  }
  report.pass_rate =
      judged > 0 ? static_cast<double>(report.passed) / judged : 0.0;
  return report;
}

std::vector<TitleEntry> read_titles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open titles file: " + path);
  std::vector<TitleEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out.push_back(
        {j.at("id").get<std::string>(), j.at("title").get<std::string>()});
  }
  return out;
}

void write_titles(const std::vector<TitleEntry>& titles,
                  const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write titles file: " + path);
  for (const auto& t : titles) {
    json j = {{"id", t.id}, {"title", t.title}};
    out << j.dump() << '\n';
  }
}

GsbReport evaluate_gsb(const std::vector<TitleEntry>& titles_a,
                       const std::vector<TitleEntry>& titles_b,
                       const std::vector<DatasetRecord>& contexts,
                       TeacherClient& judge, const PromptLibrary& prompts,
                       const DatagenConfig& cfg) {
  std::map<std::string, std::string> a_by_id, b_by_id;
  for (const auto& t : titles_a) a_by_id.emplace(t.id, t.title);
  for (const auto& t : titles_b) b_by_id.emplace(t.id, t.title);

  GsbReport report;
  for (const auto& r : contexts) {
    const auto a = a_by_id.find(r.ad.ad_id);
    const auto b = b_by_id.find(r.ad.ad_id);
    if (a == a_by_id.end() || b == b_by_id.end()) {
      ++report.skipped;
      continue;
    }
    const JudgeContext ctx{r.interest_text, r.ad, r.ad.query};
    switch (gsb_judge(a->second, b->second, ctx, judge, prompts, cfg)) {
      case GsbVerdict::kGood: report.counts.good += 1; break;
      case GsbVerdict::kSame: report.counts.same += 1; break;
      case GsbVerdict::kBad: report.counts.bad += 1; break;
    }
    ++report.judged;
  }
  if (report.judged > 0) report.advantage_value = advantage(report.counts);
  return report;
}

std::string gsb_report_to_json(const GsbReport& report) {
  json j = {{"good", report.counts.good},
            {"same", report.counts.same},
            {"bad", report.counts.bad},
            {"judged", report.judged},
            {"skipped", report.skipped},
            {"advantage", report.advantage_value},
            {"advantage_percent",
             report.judged > 0 ? advantage_percent(report.counts) : "n/a"}};
  return j.dump(2);
}

// ---- ablation harness ----

std::vector<AuxLossToggle> aux_loss_grid() {
  return {{"none", false, false, false},
          {"align", true, false, false},
          {"cls", false, true, false},
          {"recon", false, false, true},
          {"align+cls", true, true, false},
          {"align+cls+recon", true, true, true}};
}

namespace {

// Generates one title per eval record from the record user's cluster center
// and judges it against the ad's original title.
AblationRow evaluate_against_originals(
    const std::string& row_name, const Checkpoint& ckpt,
    const ClusterModel& clusters, const std::vector<DatasetRecord>& eval_records,
    const Vocabulary& vocab, TeacherClient& judge, const PromptLibrary& prompts,
    const AblationOptions& opts) {
  AblationRow row;
  row.name = row_name;
  const std::size_t limit =
      opts.eval_limit > 0
          ? std::min(eval_records.size(),
                     static_cast<std::size_t>(opts.eval_limit))
          : eval_records.size();
  for (std::size_t i = 0; i < limit; ++i) {
    const DatasetRecord& r = eval_records[i];
    int cluster_id;
    try {
      cluster_id = clusters.cluster_of(r.user_id);
    } catch (const std::out_of_range&) {
      continue;  // user had no embedding (e.g. empty history)
    }
    const Vec<float> center =
        clusters.centers.row(cluster_id).transpose().cast<float>();
    const auto prompt = build_creative_prompt(
        center, r.ad, r.ad.query, vocab, ckpt.model_cfg.prompt_limits());
    const std::string title = generate_title(
        ckpt.params.proj, ckpt.params.decoder, prompt, opts.decode, vocab);
    if (title.empty()) {
      row.counts.bad += 1;  // no output loses to the original title
      continue;
    }
    const JudgeContext ctx{r.interest_text, r.ad, r.ad.query};
    switch (gsb_judge(title, r.ad.original_title, ctx, judge, prompts)) {
      case GsbVerdict::kGood: row.counts.good += 1; break;
      case GsbVerdict::kSame: row.counts.same += 1; break;
      case GsbVerdict::kBad: row.counts.bad += 1; break;
    }
  }
  if (row.counts.total() > 0) row.advantage_value = advantage(row.counts);
  return row;
}

ClusterModel cluster_eval_users(const Checkpoint& ckpt,
                                const std::vector<DatasetRecord>& eval_records,
                                const Vocabulary& vocab,
                                const std::optional<int>& k,
                                const AblationOptions& opts) {
  const UserEmbeddingTable table =
      extract_user_embeddings(eval_records, ckpt, vocab);
  if (!k) return identity_clusters(table);
  const int usable = std::min<int>(*k, static_cast<int>(table.user_ids.size()));
  return cluster_users(table, usable, opts.kmeans);
}

}  // namespace

AblationReport run_aux_loss_ablation(
    const std::vector<AuxLossToggle>& grid,
    const std::vector<DatasetRecord>& train_records,
    const std::vector<DatasetRecord>& eval_records, const Vocabulary& vocab,
    TeacherClient& judge, const PromptLibrary& prompts,
    const AblationOptions& opts) {
  AblationReport report;
  for (const auto& toggle : grid) {
    TrainConfig tc = opts.train;
    tc.lambda_align = toggle.align ? opts.train.lambda_align : 0.0;
    tc.lambda_cls = toggle.cls ? opts.train.lambda_cls : 0.0;
    tc.lambda_recon = toggle.recon ? opts.train.lambda_recon : 0.0;
    try {
      const TrainResult trained = train(train_records, vocab, opts.model, tc);
      const ClusterModel clusters = cluster_eval_users(
          trained.checkpoint, eval_records, vocab, opts.cluster_k, opts);
      report.rows.push_back(evaluate_against_originals(
          toggle.name, trained.checkpoint, clusters, eval_records, vocab, judge,
          prompts, opts));
    } catch (const std::exception& e) {
      AblationRow row;
      row.name = toggle.name;
      row.skipped = true;
      row.note = e.what();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

AblationReport run_cluster_ablation(
    const std::vector<std::optional<int>>& ks, const Checkpoint& ckpt,
    const std::vector<DatasetRecord>& eval_records, const Vocabulary& vocab,
    TeacherClient& judge, const PromptLibrary& prompts,
    const AblationOptions& opts) {
  AblationReport report;
  for (const auto& k : ks) {
    const std::string name = k ? "kmeans-" + std::to_string(*k) : "kmeans-inf";
    try {
      const ClusterModel clusters =
          cluster_eval_users(ckpt, eval_records, vocab, k, opts);
      report.rows.push_back(evaluate_against_originals(
          name, ckpt, clusters, eval_records, vocab, judge, prompts, opts));
    } catch (const std::exception& e) {
      AblationRow row;
      row.name = name;
      row.skipped = true;
      row.note = e.what();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string AblationReport::render_table() const {
  std::string out =
      "configuration        good    same    bad     advantage\n";
  for (const auto& row : rows) {
    char line[160];
    if (row.skipped) {
      std::snprintf(line, sizeof line, "%-20s skipped: %s\n", row.name.c_str(),
                    row.note.c_str());
    } else {
      const double total = std::max(row.counts.total(), 1.0);
      std::snprintf(line, sizeof line, "%-20s %-7s %-7s %-7s %s\n",
                    row.name.c_str(),
                    percent_one_decimal(row.counts.good / total).c_str(),
                    percent_one_decimal(row.counts.same / total).c_str(),
                    percent_one_decimal(row.counts.bad / total).c_str(),
                    row.counts.total() > 0
                        ? advantage_percent(row.counts).c_str()
                        : "n/a");
    }
    out += line;
  }
  return out;
}

std::string AblationReport::to_json_lines() const {
  std::string out;
  for (const auto& row : rows) {
    json j = {{"name", row.name},
              {"good", row.counts.good},
              {"same", row.counts.same},
              {"bad", row.counts.bad},
              {"advantage", row.advantage_value},
              {"skipped", row.skipped},
              {"note", row.note}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace creagen
