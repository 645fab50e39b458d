// creagen: personalized ad-title generation pipeline.
//
// Subcommands cover the whole workflow: teacher-driven dataset construction
// (datagen), joint training (train), user embedding + clustering
// (embed-users, cluster), pruned batch generation (plan, generate), rule
// filtering (filter), the creative library (library), and offline metrics
// (evaluate). Structured logs go to stderr; data goes to files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "creagen/config.hpp"
#include "creagen/datagen.hpp"
#include "creagen/evaluation.hpp"
#include "creagen/inference.hpp"
#include "creagen/library.hpp"
#include "creagen/training.hpp"

namespace {

using namespace creagen;
using nlohmann::json;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string prompts_dir;
};

RunConfig load_run_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.train.seed = *g.seed;
  } else if (cfg.train.seed == 0) {
    cfg.train.seed = cfg.seed;
  }
  std::fprintf(stderr, "[creagen] config hash %016llx seed %llu\n",
               static_cast<unsigned long long>(cfg.content_hash()),
               static_cast<unsigned long long>(cfg.seed));
  return cfg;
}

PromptLibrary load_prompts(const GlobalOptions& g) {
  return g.prompts_dir.empty() ? PromptLibrary::defaults()
                               : PromptLibrary::load_dir(g.prompts_dir);
}

GenerationMode parse_mode(const std::string& mode) {
  if (mode == "qa" || mode == "query-aware") return GenerationMode::kQueryAware;
  if (mode == "qf" || mode == "query-free") return GenerationMode::kQueryFree;
  throw std::invalid_argument("mode must be qa or qf, got \"" + mode + "\"");
}

// Vocabulary over every text surface the model sees in the dataset.
Vocabulary build_vocab_from_records(const std::vector<DatasetRecord>& records) {
  std::vector<std::string> texts;
  for (const auto& r : records) {
    for (const auto& item : r.history) texts.push_back(flatten_item_text(item));
    texts.push_back(flatten_item_text(ad_as_item(r.ad)));
    if (r.ad.query) texts.push_back(*r.ad.query);
    texts.push_back(r.interest_text);
    texts.push_back(r.response);
  }
  return Vocabulary::build(texts);
}

Checkpoint load_ckpt_with_vocab(const std::string& ckpt_path,
                                const std::string& vocab_path,
                                Vocabulary& vocab_out) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  vocab_out = Vocabulary::load(vocab_path);
  if (ckpt.vocab_hash != vocab_out.content_hash())
    throw std::runtime_error(
        "vocabulary file does not match the checkpoint's training vocabulary");
  return ckpt;
}

int cmd_datagen(const GlobalOptions& g, const std::string& logs_path,
                const std::string& out_path, const std::string& stats_path,
                const std::string& client_kind) {
  RunConfig cfg = load_run_config(g);
  if (!client_kind.empty()) cfg.client.kind = client_kind;
  const auto client = make_teacher_client(cfg.client);
  const PromptLibrary prompts = load_prompts(g);

  const auto logs = read_raw_logs(logs_path);
  DatagenResult result = build_dataset(logs, *client, prompts, cfg.datagen);
  write_records(result.records, out_path);
  const std::string stats = stats_to_json(result.stats);
  if (!stats_path.empty()) {
    std::ofstream out(stats_path, std::ios::trunc);
    out << stats << '\n';
  }
  std::fprintf(stderr,
               "[datagen] %d rows in, %d records out (retention %.3f, "
               "%d filtered, %d quarantined)\n",
               result.stats.input_rows, result.stats.passed_filter,
               result.stats.retention(), result.stats.dropped_by_filter,
               result.stats.quarantined);
  return 0;
}

int cmd_train(const GlobalOptions& g, const std::string& data_path,
              const std::string& out_path, const std::string& vocab_path,
              const std::string& vocab_out, const std::string& metrics_path,
              const std::string& resume_path) {
  RunConfig cfg = load_run_config(g);
  const auto records = read_records(data_path);

  Vocabulary vocab;
  if (!vocab_path.empty()) {
    vocab = Vocabulary::load(vocab_path);
  } else {
    vocab = build_vocab_from_records(records);
    const std::string save_to =
        vocab_out.empty() ? out_path + ".vocab" : vocab_out;
    vocab.save(save_to);
    std::fprintf(stderr, "[train] built vocabulary of %d tokens -> %s\n",
                 vocab.size(), save_to.c_str());
  }

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path, std::ios::trunc);
    if (!metrics)
      throw std::runtime_error("cannot write metrics log: " + metrics_path);
  }
  auto on_step = [&](const StepMetrics& m) {
    if (!metrics.is_open()) return;
    json j = {{"step", m.step},   {"gen", m.gen},     {"cls", m.cls},
              {"align", m.align}, {"recon", m.recon}, {"total", m.total}};
    metrics << j.dump() << '\n';
  };

  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);

  const TrainResult result =
      train(records, vocab, cfg.model, cfg.train, on_step,
            resume ? &*resume : nullptr);
  save_checkpoint(result.checkpoint, out_path);
  std::fprintf(stderr, "[train] %ld steps, final total loss %.4f -> %s\n",
               result.checkpoint.step,
               result.metrics.empty() ? 0.0 : result.metrics.back().total,
               out_path.c_str());
  return 0;
}

int cmd_embed_users(const GlobalOptions& g, const std::string& data_path,
                    const std::string& ckpt_path, const std::string& vocab_path,
                    const std::string& out_path) {
  load_run_config(g);
  Vocabulary vocab;
  const Checkpoint ckpt = load_ckpt_with_vocab(ckpt_path, vocab_path, vocab);
  const auto records = read_records(data_path);
  const UserEmbeddingTable table =
      extract_user_embeddings(records, ckpt, vocab);
  save_embeddings(table, out_path);
  std::fprintf(stderr, "[embed-users] %zu embeddings (%d skipped) -> %s\n",
               table.user_ids.size(), table.skipped_empty_history,
               out_path.c_str());
  return 0;
}

int cmd_cluster(const GlobalOptions& g, int k, const std::string& emb_path,
                const std::string& out_path) {
  RunConfig cfg = load_run_config(g);
  const UserEmbeddingTable table = load_embeddings(emb_path);
  KmeansOptions opts;
  opts.max_iters = cfg.inference.kmeans_max_iters;
  opts.plus_plus_init = cfg.inference.kmeans_plus_plus;
  opts.seed = cfg.seed;
  const ClusterModel model = cluster_users(table, k, opts);
  save_cluster_model(model, out_path);
  std::fprintf(stderr, "[cluster] k=%d inertia %.4f -> %s\n", k, model.inertia,
               out_path.c_str());
  return 0;
}

int cmd_plan(const GlobalOptions& g, const std::string& mode,
             const std::string& ads_path, const std::string& clusters_path,
             const std::string& ckpt_path, const std::string& vocab_path,
             const std::string& out_path) {
  RunConfig cfg = load_run_config(g);
  Vocabulary vocab;
  const Checkpoint ckpt = load_ckpt_with_vocab(ckpt_path, vocab_path, vocab);
  const ClusterModel clusters = load_cluster_model(clusters_path);
  const auto ads = read_ad_inputs(ads_path);

  PlanOptions opts;
  opts.mode = parse_mode(mode);
  opts.top_k_query_aware = cfg.inference.top_k_query_aware;
  opts.top_k_query_free = cfg.inference.top_k_query_free;

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write plans: " + out_path);
  for (const auto& ad : ads)
    out << plan_to_json_line(plan_for_ad(ad, clusters, ckpt, vocab, opts))
        << '\n';
  std::fprintf(stderr, "[plan] %zu plans -> %s\n", ads.size(),
               out_path.c_str());
  return 0;
}

int cmd_generate(const GlobalOptions& g, const std::string& mode,
                 const std::string& ads_path, const std::string& clusters_path,
                 const std::string& ckpt_path, const std::string& vocab_path,
                 const std::string& out_path) {
  RunConfig cfg = load_run_config(g);
  Vocabulary vocab;
  const Checkpoint ckpt = load_ckpt_with_vocab(ckpt_path, vocab_path, vocab);
  const ClusterModel clusters = load_cluster_model(clusters_path);
  const auto ads = read_ad_inputs(ads_path);

  GenerateOptions opts;
  opts.plan.mode = parse_mode(mode);
  opts.plan.top_k_query_aware = cfg.inference.top_k_query_aware;
  opts.plan.top_k_query_free = cfg.inference.top_k_query_free;
  opts.decode = cfg.decode;

  const GenerateOutcome outcome =
      batch_generate(ads, clusters, ckpt, vocab, opts);
  write_candidates(outcome.candidates, out_path);
  for (const auto& s : outcome.skipped)
    std::fprintf(stderr, "[generate] skipped %s\n", s.c_str());
  std::fprintf(stderr, "[generate] %zu candidates -> %s\n",
               outcome.candidates.size(), out_path.c_str());
  return 0;
}

int cmd_filter(const GlobalOptions& g, const std::string& candidates_path,
               const std::string& ads_path, const std::string& out_path) {
  load_run_config(g);
  auto candidates = read_candidates(candidates_path);
  const auto ads = read_ad_inputs(ads_path);
  std::map<std::string, Ad> ads_by_id;
  for (const auto& a : ads) ads_by_id.emplace(a.ad.ad_id, a.ad);

  const BadcaseConfig rules = BadcaseConfig::defaults();
  int passed = 0;
  for (auto& c : candidates) {
    const auto it = ads_by_id.find(c.ad_id);
    if (it == ads_by_id.end())
      throw std::runtime_error("candidate references unknown ad: " + c.ad_id);
    c.verdict = badcase_filter(c.title, it->second, rules);
    if (c.verdict.pass) ++passed;
  }
  write_candidates(candidates, out_path);
  std::fprintf(stderr, "[filter] %d of %zu candidates pass -> %s\n", passed,
               candidates.size(), out_path.c_str());
  return 0;
}

int cmd_library_put(const GlobalOptions& g, const std::string& db_path,
                    const std::string& candidates_path) {
  load_run_config(g);
  CreativeLibrary lib(db_path);
  const int stored = lib.put(read_candidates(candidates_path));
  std::fprintf(stderr, "[library] stored %d new candidates (%zu total)\n",
               stored, lib.size());
  return 0;
}

int cmd_library_query(const GlobalOptions& g, const std::string& db_path,
                      const std::string& ad_id, const std::string& mode) {
  load_run_config(g);
  CreativeLibrary lib(db_path);
  for (const auto& c : lib.query(ad_id, parse_mode(mode)))
    std::printf("%s\n", candidate_to_json_line(c).c_str());
  return 0;
}

int cmd_library_export(const GlobalOptions& g, const std::string& db_path,
                       const std::string& mode, const std::string& out_path) {
  load_run_config(g);
  CreativeLibrary lib(db_path);
  const GenerationMode m = parse_mode(mode);
  std::set<std::string> ad_ids;
  for (const auto& c : lib.all())
    if (c.mode == m) ad_ids.insert(c.ad_id);
  std::vector<TitleEntry> titles;
  for (const auto& ad_id : ad_ids) {
    const auto candidates = lib.query(ad_id, m);
    if (!candidates.empty()) titles.push_back({ad_id, candidates[0].title});
  }
  write_titles(titles, out_path);
  std::fprintf(stderr, "[library] exported %zu titles -> %s\n", titles.size(),
               out_path.c_str());
  return 0;
}

int cmd_evaluate_gsb(const GlobalOptions& g, const std::string& a_path,
                     const std::string& b_path, const std::string& context_path,
                     const std::string& out_path) {
  RunConfig cfg = load_run_config(g);
  const auto client = make_teacher_client(cfg.client);
  const PromptLibrary prompts = load_prompts(g);
  const GsbReport report =
      evaluate_gsb(read_titles(a_path), read_titles(b_path),
                   read_records(context_path), *client, prompts, cfg.datagen);
  const std::string rendered = gsb_report_to_json(report);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    out << rendered << '\n';
  }
  std::printf("%s\n", rendered.c_str());
  return 0;
}

int cmd_evaluate_hallucination(const GlobalOptions& g,
                               const std::string& titles_path,
                               const std::string& ads_path,
                               const std::string& out_path) {
  RunConfig cfg = load_run_config(g);
  const auto client = make_teacher_client(cfg.client);
  const PromptLibrary prompts = load_prompts(g);

  const auto titles = read_titles(titles_path);
  const auto ads = read_ad_inputs(ads_path);
  std::map<std::string, Ad> ads_by_id;
  for (const auto& a : ads) ads_by_id.emplace(a.ad.ad_id, a.ad);

  std::vector<std::pair<std::string, Ad>> pairs;
  for (const auto& t : titles) {
    const auto it = ads_by_id.find(t.id);
    if (it == ads_by_id.end())
      throw std::runtime_error("title references unknown ad: " + t.id);
    pairs.emplace_back(t.title, it->second);
  }
  const PassRateReport report =
      hallucination_pass_rate(pairs, *client, prompts, cfg.datagen);
  json j = {{"total", report.total},
            {"passed", report.passed},
            {"excluded", report.excluded},
            {"pass_rate", report.pass_rate},
            {"pass_rate_percent", percent_one_decimal(report.pass_rate)}};
  const std::string rendered = j.dump(2);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    out << rendered << '\n';
  }
  std::printf("%s\n", rendered.c_str());
  return 0;
}

int cmd_evaluate_ablation(const GlobalOptions& g, const std::string& grid_path,
                          const std::string& data_path,
                          const std::string& eval_path,
                          const std::string& vocab_path,
                          const std::string& out_path) {
  RunConfig cfg = load_run_config(g);
  const auto client = make_teacher_client(cfg.client);
  const PromptLibrary prompts = load_prompts(g);

  std::ifstream grid_in(grid_path);
  if (!grid_in) throw std::runtime_error("cannot open grid file: " + grid_path);
  const json grid = json::parse(grid_in);
  const std::string type = grid.at("type").get<std::string>();

  AblationOptions opts;
  opts.model = cfg.model;
  opts.train = cfg.train;
  opts.decode = cfg.decode;
  opts.kmeans.max_iters = cfg.inference.kmeans_max_iters;
  opts.kmeans.plus_plus_init = cfg.inference.kmeans_plus_plus;
  opts.kmeans.seed = cfg.seed;
  opts.cluster_k = grid.value("cluster_k", 8);
  opts.eval_limit = cfg.eval_limit;

  const auto eval_records = read_records(eval_path);
  AblationReport report;
  if (type == "aux_loss") {
    std::vector<AuxLossToggle> rows;
    if (grid.contains("rows")) {
      for (const auto& row : grid.at("rows"))
        rows.push_back({row.at("name").get<std::string>(),
                        row.value("align", false), row.value("cls", false),
                        row.value("recon", false)});
    } else {
      rows = aux_loss_grid();
    }
    const auto train_records = read_records(data_path);
    const Vocabulary vocab = vocab_path.empty()
                                 ? build_vocab_from_records(train_records)
                                 : Vocabulary::load(vocab_path);
    report = run_aux_loss_ablation(rows, train_records, eval_records, vocab,
                                   *client, prompts, opts);
  } else if (type == "clusters") {
    std::vector<std::optional<int>> ks;
    for (const auto& k : grid.at("ks")) {
      if (k.is_string())
        ks.push_back(std::nullopt);  // "inf": no clustering
      else
        ks.push_back(k.get<int>());
    }
    const std::string ckpt_path = grid.at("checkpoint").get<std::string>();
    if (!std::filesystem::exists(ckpt_path)) {
      for (const auto& k : ks) {
        AblationRow row;
        row.name = k ? "kmeans-" + std::to_string(*k) : "kmeans-inf";
        row.skipped = true;
        row.note = "missing trained checkpoint: " + ckpt_path;
        report.rows.push_back(row);
      }
    } else {
      Vocabulary vocab;
      const Checkpoint ckpt =
          load_ckpt_with_vocab(ckpt_path, vocab_path, vocab);
      report = run_cluster_ablation(ks, ckpt, eval_records, vocab, *client,
                                    prompts, opts);
    }
  } else {
    throw std::runtime_error("unknown grid type: " + type);
  }

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    out << report.to_json_lines();
  }
  std::printf("%s", report.render_table().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personalized ad-title generation pipeline"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  app.add_option("--config", g.config_path, "run config file (key = value)");
  app.add_option("--seed", seed_flag, "seed overriding the config file")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--prompts", g.prompts_dir,
                 "directory of prompt template overrides");

  std::string logs, data, out, stats, client_kind, vocab, vocab_out, metrics,
      resume, emb, clusters, ckpt, mode, ads, candidates, db, ad_id, a_path,
      b_path, context, titles, grid, eval_path;
  int k = 8;

  auto* datagen_cmd =
      app.add_subcommand("datagen", "build a dataset from raw logs");
  datagen_cmd->add_option("--logs", logs)->required();
  datagen_cmd->add_option("--out", out)->required();
  datagen_cmd->add_option("--stats-out", stats);
  datagen_cmd->add_option("--client", client_kind)
      ->check(CLI::IsMember({"mock", "http"}));

  auto* train_cmd = app.add_subcommand("train", "train the model end to end");
  train_cmd->add_option("--data", data)->required();
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--vocab", vocab);
  train_cmd->add_option("--vocab-out", vocab_out);
  train_cmd->add_option("--metrics-out", metrics);
  train_cmd->add_option("--resume", resume);

  auto* embed_cmd =
      app.add_subcommand("embed-users", "extract user embeddings");
  embed_cmd->add_option("--data", data)->required();
  embed_cmd->add_option("--ckpt", ckpt)->required();
  embed_cmd->add_option("--vocab", vocab)->required();
  embed_cmd->add_option("--out", out)->required();

  auto* cluster_cmd =
      app.add_subcommand("cluster", "k-means over user embeddings");
  cluster_cmd->add_option("--k", k)->required();
  cluster_cmd->add_option("--emb", emb)->required();
  cluster_cmd->add_option("--out", out)->required();

  auto* plan_cmd =
      app.add_subcommand("plan", "select top clusters per ad");
  plan_cmd->add_option("--mode", mode)->required();
  plan_cmd->add_option("--ads", ads)->required();
  plan_cmd->add_option("--clusters", clusters)->required();
  plan_cmd->add_option("--ckpt", ckpt)->required();
  plan_cmd->add_option("--vocab", vocab)->required();
  plan_cmd->add_option("--out", out)->required();

  auto* generate_cmd =
      app.add_subcommand("generate", "batch-generate candidates");
  generate_cmd->add_option("--mode", mode)->required();
  generate_cmd->add_option("--ads", ads)->required();
  generate_cmd->add_option("--clusters", clusters)->required();
  generate_cmd->add_option("--ckpt", ckpt)->required();
  generate_cmd->add_option("--vocab", vocab)->required();
  generate_cmd->add_option("--out", out)->required();

  auto* filter_cmd =
      app.add_subcommand("filter", "apply the rule-based badcase filter");
  filter_cmd->add_option("--candidates", candidates)->required();
  filter_cmd->add_option("--ads", ads)->required();
  filter_cmd->add_option("--out", out)->required();

  auto* library_cmd = app.add_subcommand("library", "creative library");
  library_cmd->require_subcommand(1);
  auto* lib_put = library_cmd->add_subcommand("put", "store candidates");
  lib_put->add_option("--db", db)->required();
  lib_put->add_option("--candidates", candidates)->required();
  auto* lib_query = library_cmd->add_subcommand("query", "list candidates");
  lib_query->add_option("--db", db)->required();
  lib_query->add_option("--ad", ad_id)->required();
  lib_query->add_option("--mode", mode)->required();
  auto* lib_export =
      library_cmd->add_subcommand("export", "top title per ad as a title file");
  lib_export->add_option("--db", db)->required();
  lib_export->add_option("--mode", mode)->required();
  lib_export->add_option("--out", out)->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "offline metrics");
  evaluate_cmd->require_subcommand(1);
  auto* eval_gsb = evaluate_cmd->add_subcommand("gsb", "dual-order GSB");
  eval_gsb->add_option("--a", a_path)->required();
  eval_gsb->add_option("--b", b_path)->required();
  eval_gsb->add_option("--context", context)->required();
  eval_gsb->add_option("--out", out);
  auto* eval_hall = evaluate_cmd->add_subcommand(
      "hallucination", "hallucination detection pass rate");
  eval_hall->add_option("--titles", titles)->required();
  eval_hall->add_option("--ads", ads)->required();
  eval_hall->add_option("--out", out);
  auto* eval_abl =
      evaluate_cmd->add_subcommand("ablation", "loss-toggle / cluster grids");
  eval_abl->add_option("--grid", grid)->required();
  eval_abl->add_option("--data", data);
  eval_abl->add_option("--eval", eval_path)->required();
  eval_abl->add_option("--vocab", vocab);
  eval_abl->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints usage, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (seed_set) g.seed = seed_flag;

  try {
    if (datagen_cmd->parsed())
      return cmd_datagen(g, logs, out, stats, client_kind);
    if (train_cmd->parsed())
      return cmd_train(g, data, out, vocab, vocab_out, metrics, resume);
    if (embed_cmd->parsed()) return cmd_embed_users(g, data, ckpt, vocab, out);
    if (cluster_cmd->parsed()) return cmd_cluster(g, k, emb, out);
    if (plan_cmd->parsed())
      return cmd_plan(g, mode, ads, clusters, ckpt, vocab, out);
    if (generate_cmd->parsed())
      return cmd_generate(g, mode, ads, clusters, ckpt, vocab, out);
    if (filter_cmd->parsed()) return cmd_filter(g, candidates, ads, out);
    if (library_cmd->parsed()) {
      if (lib_put->parsed()) return cmd_library_put(g, db, candidates);
      if (lib_query->parsed()) return cmd_library_query(g, db, ad_id, mode);
      if (lib_export->parsed()) return cmd_library_export(g, db, mode, out);
    }
    if (evaluate_cmd->parsed()) {
      if (eval_gsb->parsed())
        return cmd_evaluate_gsb(g, a_path, b_path, context, out);
      if (eval_hall->parsed())
        return cmd_evaluate_hallucination(g, titles, ads, out);
      if (eval_abl->parsed())
        return cmd_evaluate_ablation(g, grid, data, eval_path, vocab, out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr, "error: no subcommand dispatched\n");
  return 2;
}
