#include "creagen/inference.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "creagen/hash.hpp"

namespace creagen {

using nlohmann::json;

UserEmbeddingTable extract_user_embeddings(
    const std::vector<DatasetRecord>& users, const Checkpoint& ckpt,
    const Vocabulary& vocab) {
  if (ckpt.vocab_hash != 0 && ckpt.vocab_hash != vocab.content_hash())
    throw std::runtime_error(
        "vocabulary hash does not match the checkpoint's training vocabulary");
  const ModelConfig& mc = ckpt.model_cfg;
  UserEmbeddingTable table;
  table.embeddings.resize(0, mc.enc_d_model);
  std::vector<Vec<float>> rows;
  for (const auto& r : users) {
    if (r.history.empty()) {
      ++table.skipped_empty_history;
      continue;
    }
    const std::size_t keep =
        std::min(r.history.size(), static_cast<std::size_t>(mc.max_history));
    std::vector<std::vector<int>> history;
    history.reserve(keep);
    for (std::size_t i = r.history.size() - keep; i < r.history.size(); ++i)
      history.push_back(
          tokenize(flatten_item_text(r.history[i]), vocab, mc.max_item_tokens));
    rows.push_back(user_embedding(ckpt.params, history));
    table.user_ids.push_back(r.user_id);
  }
  table.embeddings.resize(static_cast<Eigen::Index>(rows.size()),
                          mc.enc_d_model);
  for (std::size_t i = 0; i < rows.size(); ++i)
    table.embeddings.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return table;
}

void save_embeddings(const UserEmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
  for (std::size_t i = 0; i < table.user_ids.size(); ++i) {
    json j = {{"user_id", table.user_ids[i]},
              {"embedding", std::vector<float>(
                                table.embeddings.row(
                                    static_cast<Eigen::Index>(i)).begin(),
                                table.embeddings.row(
                                    static_cast<Eigen::Index>(i)).end())}};
    out << j.dump() << '\n';
  }
}

UserEmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  UserEmbeddingTable table;
  std::vector<std::vector<float>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    table.user_ids.push_back(j.at("user_id").get<std::string>());
    rows.push_back(j.at("embedding").get<std::vector<float>>());
  }
  if (!rows.empty()) {
    table.embeddings.resize(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t jx = 0; jx < rows[i].size(); ++jx)
        table.embeddings(static_cast<Eigen::Index>(i),
                         static_cast<Eigen::Index>(jx)) = rows[i][jx];
  }
  return table;
}

int ClusterModel::cluster_of(const std::string& user_id) const {
  for (std::size_t i = 0; i < user_ids.size(); ++i)
    if (user_ids[i] == user_id) return assignment[i];
  throw std::out_of_range("unknown user id: " + user_id);
}

ClusterModel cluster_users(const UserEmbeddingTable& table, int k,
                           const KmeansOptions& opts) {
  const KmeansResult r = kmeans(table.embeddings.cast<double>(), k, opts);
  ClusterModel model;
  model.k = k;
  model.centers = r.centers;
  model.user_ids = table.user_ids;
  model.assignment = r.assignment;
  model.inertia = r.inertia;
  return model;
}

ClusterModel identity_clusters(const UserEmbeddingTable& table) {
  ClusterModel model;
  model.k = static_cast<int>(table.user_ids.size());
  model.centers = table.embeddings.cast<double>();
  model.user_ids = table.user_ids;
  model.assignment.resize(table.user_ids.size());
  std::iota(model.assignment.begin(), model.assignment.end(), 0);
  model.inertia = 0;
  return model;
}

void save_cluster_model(const ClusterModel& model, const std::string& path) {
  json centers = json::array();
  for (Eigen::Index c = 0; c < model.centers.rows(); ++c)
    centers.push_back(std::vector<double>(model.centers.row(c).begin(),
                                          model.centers.row(c).end()));
  json assignment = json::object();
  for (std::size_t i = 0; i < model.user_ids.size(); ++i)
    assignment[model.user_ids[i]] = model.assignment[i];
  json j = {{"k", model.k},
            {"centers", centers},
            {"assignment", assignment},
            {"inertia", model.inertia}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write cluster model: " + path);
  out << j.dump(2) << '\n';
}

ClusterModel load_cluster_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cluster model: " + path);
  json j = json::parse(in);
  ClusterModel model;
  model.k = j.at("k").get<int>();
  const auto& centers = j.at("centers");
  if (!centers.empty()) {
    model.centers.resize(static_cast<Eigen::Index>(centers.size()),
                         static_cast<Eigen::Index>(centers[0].size()));
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const auto row = centers[c].get<std::vector<double>>();
      for (std::size_t d = 0; d < row.size(); ++d)
        model.centers(static_cast<Eigen::Index>(c),
                      static_cast<Eigen::Index>(d)) = row[d];
    }
  }
  for (const auto& [user, cid] : j.at("assignment").items()) {
    model.user_ids.push_back(user);
    model.assignment.push_back(cid.get<int>());
  }
  model.inertia = j.at("inertia").get<double>();
  return model;
}

std::vector<double> score_clusters(const ClusterModel& clusters, const Ad& ad,
                                   const Checkpoint& ckpt,
                                   const Vocabulary& vocab) {
  const ModelConfig& mc = ckpt.model_cfg;
  const auto tokens =
      tokenize(flatten_item_text(ad_as_item(ad)), vocab, mc.max_item_tokens);
  const Vec<float> ad_emb =
      item_embedding(ckpt.params, std::span<const int>(tokens));
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(clusters.centers.rows()));
  for (Eigen::Index c = 0; c < clusters.centers.rows(); ++c) {
    const Vec<float> center = clusters.centers.row(c).transpose().cast<float>();
    scores.push_back(
        static_cast<double>(predict_click(ckpt.params.predictor, center,
                                          ad_emb)));
  }
  return scores;
}

std::vector<int> select_topk(const std::vector<double>& scores, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > scores.size())
    throw std::invalid_argument(
        "select_topk: k must be in [1, number of scores]");
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] !=
        scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] >
             scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  ids.resize(static_cast<std::size_t>(k));
  return ids;
}

std::vector<AdInput> read_ad_inputs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ads file: " + path);
  std::vector<AdInput> ads;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    AdInput a;
    a.ad.ad_id = j.at("ad_id").get<std::string>();
    a.ad.original_title = j.at("original_title").get<std::string>();
    if (auto it = j.find("selling_points"); it != j.end())
      a.ad.selling_points = it->get<std::vector<std::string>>();
    if (auto it = j.find("queries"); it != j.end())
      a.queries = it->get<std::vector<std::string>>();
    ads.push_back(std::move(a));
  }
  return ads;
}

void write_ad_inputs(const std::vector<AdInput>& ads, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write ads file: " + path);
  for (const auto& a : ads) {
    json j = {{"ad_id", a.ad.ad_id},
              {"original_title", a.ad.original_title},
              {"selling_points", a.ad.selling_points},
              {"queries", a.queries}};
    out << j.dump() << '\n';
  }
}

GenerationPlan plan_for_ad(const AdInput& ad, const ClusterModel& clusters,
                           const Checkpoint& ckpt, const Vocabulary& vocab,
                           const PlanOptions& opts) {
  GenerationPlan plan;
  plan.ad_id = ad.ad.ad_id;
  plan.mode = opts.mode;
  if (opts.mode == GenerationMode::kQueryAware) {
    if (ad.queries.empty()) return plan;  // nothing to plan
    plan.queries = ad.queries;
  }
  const auto scores = score_clusters(clusters, ad.ad, ckpt, vocab);
  const int want = opts.mode == GenerationMode::kQueryAware
                       ? opts.top_k_query_aware
                       : opts.top_k_query_free;
  const int k = std::min<int>(want, static_cast<int>(scores.size()));
  for (int id : select_topk(scores, k))
    plan.clusters.emplace_back(id, scores[static_cast<std::size_t>(id)]);
  return plan;
}

std::string plan_to_json_line(const GenerationPlan& plan) {
  json clusters = json::array();
  for (const auto& [id, score] : plan.clusters)
    clusters.push_back({{"cluster_id", id}, {"score", score}});
  json j = {{"ad_id", plan.ad_id},
            {"mode", to_string(plan.mode)},
            {"clusters", clusters},
            {"queries", plan.queries}};
  return j.dump();
}

GenerationPlan plan_from_json_line(const std::string& line) {
  json j = json::parse(line);
  GenerationPlan plan;
  plan.ad_id = j.at("ad_id").get<std::string>();
  plan.mode = j.at("mode").get<std::string>() == "query-aware"
                  ? GenerationMode::kQueryAware
                  : GenerationMode::kQueryFree;
  for (const auto& c : j.at("clusters"))
    plan.clusters.emplace_back(c.at("cluster_id").get<int>(),
                               c.at("score").get<double>());
  plan.queries = j.at("queries").get<std::vector<std::string>>();
  return plan;
}

GenerateOutcome batch_generate(const std::vector<AdInput>& ads,
                               const ClusterModel& clusters,
                               const Checkpoint& ckpt, const Vocabulary& vocab,
                               const GenerateOptions& opts) {
  const ModelConfig& mc = ckpt.model_cfg;
  GenerateOutcome out;
  for (const auto& ad : ads) {
    if (opts.plan.mode == GenerationMode::kQueryAware && ad.queries.empty()) {
      out.skipped.push_back(ad.ad.ad_id + ": query-aware ad carries no queries");
      continue;
    }
    const GenerationPlan plan =
        plan_for_ad(ad, clusters, ckpt, vocab, opts.plan);

    auto generate_one = [&](int cluster_id, double score,
                            const std::optional<std::string>& query) {
      const Vec<float> center =
          clusters.centers.row(cluster_id).transpose().cast<float>();
      const auto prompt = build_creative_prompt(center, ad.ad, query, vocab,
                                                mc.prompt_limits());
      DecodeConfig decode = opts.decode;
      // Per-task seed so sampling outcomes do not depend on task order.
      decode.seed = fnv1a64(ad.ad.ad_id + "|" +
                                std::to_string(cluster_id) + "|" +
                                (query ? *query : std::string()),
                            opts.decode.seed ^ 0x9e3779b97f4a7c15ull);
      CreativeCandidate cand;
      cand.ad_id = ad.ad.ad_id;
      cand.cluster_id = cluster_id;
      cand.mode = opts.plan.mode;
      cand.query = query;
      cand.title = generate_title(ckpt.params.proj, ckpt.params.decoder, prompt,
                                  decode, vocab);
      cand.match_score = score;
      out.candidates.push_back(std::move(cand));
    };

    if (opts.plan.mode == GenerationMode::kQueryAware) {
      for (const auto& [cluster_id, score] : plan.clusters)
        for (const auto& q : ad.queries) generate_one(cluster_id, score, q);
    } else {
      for (const auto& [cluster_id, score] : plan.clusters)
        generate_one(cluster_id, score, std::nullopt);
    }
  }
  return out;
}

// ---- badcase rules ----

BadcaseConfig BadcaseConfig::defaults() {
  BadcaseConfig c;
  c.location_lexicon = {"paris",  "berlin", "tokyo",  "beijing",
                        "london", "moscow", "downtown"};
  c.brand_lexicon = {"acme", "brandx", "megacorp", "contoso"};
  c.sensitive_lexicon = {"miracle", "cure", "prescription", "gamble"};
  return c;
}

namespace {

std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (auto& ch : out)
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string ad_source_text(const Ad& ad) {
  std::string source = ad.original_title;
  for (const auto& sp : ad.selling_points) {
    source += ' ';
    source += sp;
  }
  return source;
}

// Maximal digit runs in the text.
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

bool word_in(const std::vector<std::string>& words, const std::string& w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

}  // namespace

FilterVerdict badcase_filter(const std::string& title, const Ad& ad,
                             const BadcaseConfig& rules) {
  const std::string source = lower_ascii(ad_source_text(ad));
  const std::string title_lower = lower_ascii(title);
  const auto title_words = Vocabulary::split_words(title_lower);
  const auto source_words = Vocabulary::split_words(source);

  // Numbers in the title must appear verbatim in the ad's own text.
  for (const auto& run : digit_runs(title))
    if (source.find(run) == std::string::npos)
      return {false, "fabricated-number"};

  for (const auto& term : rules.location_lexicon)
    if (word_in(title_words, term) && !word_in(source_words, term))
      return {false, "location"};

  for (const auto& term : rules.brand_lexicon)
    if (word_in(title_words, term) && !word_in(source_words, term))
      return {false, "brand"};

  // Sensitive terms are disallowed regardless of the source text.
  for (const auto& term : rules.sensitive_lexicon)
    if (word_in(title_words, term)) return {false, "sensitive-term"};

  const int chars = static_cast<int>(title.size());
  if (chars < rules.min_chars || chars > rules.max_chars)
    return {false, "length-bounds"};

  return {true, ""};
}

// ---- candidate codec ----

std::string candidate_to_json_line(const CreativeCandidate& c) {
  json j = {{"ad_id", c.ad_id},
            {"cluster_id", c.cluster_id},
            {"mode", to_string(c.mode)},
            {"title", c.title},
            {"match_score", c.match_score},
            {"verdict", c.verdict.pass ? "pass" : "fail"},
            {"reason", c.verdict.reason}};
  if (c.query) j["query"] = *c.query;
  return j.dump();
}

CreativeCandidate candidate_from_json_line(const std::string& line) {
  json j = json::parse(line);
  CreativeCandidate c;
  c.ad_id = j.at("ad_id").get<std::string>();
  c.cluster_id = j.at("cluster_id").get<int>();
  c.mode = j.at("mode").get<std::string>() == "query-aware"
               ? GenerationMode::kQueryAware
               : GenerationMode::kQueryFree;
  c.title = j.at("title").get<std::string>();
  c.match_score = j.at("match_score").get<double>();
  c.verdict.pass = j.at("verdict").get<std::string>() == "pass";
  c.verdict.reason = j.at("reason").get<std::string>();
  if (auto it = j.find("query"); it != j.end() && !it->is_null())
    c.query = it->get<std::string>();
  return c;
}

std::vector<CreativeCandidate> read_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open candidates file: " + path);
  std::vector<CreativeCandidate> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(candidate_from_json_line(line));
  }
  return out;
}

void write_candidates(const std::vector<CreativeCandidate>& candidates,
                      const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write candidates file: " + path);
  for (const auto& c : candidates) out << candidate_to_json_line(c) << '\n';
}

}  // namespace creagen
