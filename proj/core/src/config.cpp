#include "creagen/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "creagen/hash.hpp"

namespace creagen {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int to_int(const std::string& v) { return std::stoi(v); }
double to_double(const std::string& v) { return std::stod(v); }
std::uint64_t to_u64(const std::string& v) { return std::stoull(v); }

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true/false, got \"" + v + "\"");
}

}  // namespace

void RunConfig::apply_line(const std::string& key, const std::string& value) {
  // One handler per known key; anything else is a config error.
  static const char* kUnknown = nullptr;
  (void)kUnknown;
  if (key == "seed") { seed = to_u64(value); return; }

  if (key == "model.enc_d_model") { model.enc_d_model = to_int(value); return; }
  if (key == "model.enc_layers") { model.enc_layers = to_int(value); return; }
  if (key == "model.enc_heads") { model.enc_heads = to_int(value); return; }
  if (key == "model.dec_d_model") { model.dec_d_model = to_int(value); return; }
  if (key == "model.dec_layers") { model.dec_layers = to_int(value); return; }
  if (key == "model.dec_heads") { model.dec_heads = to_int(value); return; }
  if (key == "model.dec_max_positions") { model.dec_max_positions = to_int(value); return; }
  if (key == "model.mixer_layers") { model.mixer_layers = to_int(value); return; }
  if (key == "model.mixer_hidden") { model.mixer_hidden = to_int(value); return; }
  if (key == "model.max_history") { model.max_history = to_int(value); return; }
  if (key == "model.max_item_tokens") { model.max_item_tokens = to_int(value); return; }
  if (key == "model.max_ad_tokens") { model.max_ad_tokens = to_int(value); return; }
  if (key == "model.max_query_tokens") { model.max_query_tokens = to_int(value); return; }
  if (key == "model.max_response_tokens") { model.max_response_tokens = to_int(value); return; }
  if (key == "model.max_interest_tokens") { model.max_interest_tokens = to_int(value); return; }
  if (key == "model.share_decoder_weights") { model.share_decoder_weights = to_bool(value); return; }
  if (key == "model.align_stop_grad_features") { model.align_stop_grad_features = to_bool(value); return; }
  if (key == "model.init_std") { model.init_std = to_double(value); return; }

  if (key == "train.lr") { train.lr = to_double(value); return; }
  if (key == "train.epochs") { train.epochs = to_int(value); return; }
  if (key == "train.batch_size") { train.batch_size = to_int(value); return; }
  if (key == "train.max_steps") { train.max_steps = to_int(value); return; }
  if (key == "train.lambda_cls") { train.lambda_cls = to_double(value); return; }
  if (key == "train.lambda_align") { train.lambda_align = to_double(value); return; }
  if (key == "train.lambda_recon") { train.lambda_recon = to_double(value); return; }
  if (key == "train.tau") { train.tau = to_double(value); return; }
  if (key == "train.n_neg") { train.n_neg = to_int(value); return; }
  if (key == "train.beta1") { train.beta1 = to_double(value); return; }
  if (key == "train.beta2") { train.beta2 = to_double(value); return; }
  if (key == "train.adam_eps") { train.adam_eps = to_double(value); return; }
  if (key == "train.clip_norm") { train.clip_norm = to_double(value); return; }
  if (key == "train.log_unweighted") { train.log_unweighted = to_bool(value); return; }

  if (key == "inference.cluster_k") { inference.cluster_k = to_int(value); return; }
  if (key == "inference.kmeans_max_iters") { inference.kmeans_max_iters = to_int(value); return; }
  if (key == "inference.kmeans_plus_plus") { inference.kmeans_plus_plus = to_bool(value); return; }
  if (key == "inference.top_k_query_aware") { inference.top_k_query_aware = to_int(value); return; }
  if (key == "inference.top_k_query_free") { inference.top_k_query_free = to_int(value); return; }

  if (key == "decode.mode") {
    if (value == "greedy") decode.mode = DecodeConfig::Mode::kGreedy;
    else if (value == "sampling") decode.mode = DecodeConfig::Mode::kSampling;
    else throw std::invalid_argument("decode.mode must be greedy or sampling");
    return;
  }
  if (key == "decode.temperature") { decode.temperature = to_double(value); return; }
  if (key == "decode.seed") { decode.seed = to_u64(value); return; }
  if (key == "decode.max_new_tokens") { decode.max_new_tokens = to_int(value); return; }

  if (key == "client.kind") {
    if (value != "mock" && value != "http")
      throw std::invalid_argument("client.kind must be mock or http");
    client.kind = value;
    return;
  }
  if (key == "client.mock_hallucination_rate") { client.mock_hallucination_rate = to_double(value); return; }
  if (key == "client.base_url") { client.http.base_url = value; return; }
  if (key == "client.path") { client.http.path = value; return; }
  if (key == "client.model") { client.http.model = value; return; }
  if (key == "client.auth_token_env") { client.http.auth_token_env = value; return; }
  if (key == "client.timeout_ms") { client.http.timeout_ms = to_int(value); return; }

  if (key == "datagen.max_attempts") { datagen.max_attempts = to_int(value); return; }
  if (key == "datagen.backoff_ms") { datagen.backoff_ms = to_int(value); return; }
  if (key == "datagen.concurrency") { datagen.concurrency = to_int(value); return; }
  if (key == "datagen.history_render_limit") { datagen.history_render_limit = to_int(value); return; }

  if (key == "eval.limit") { eval_limit = to_int(value); return; }

  throw std::invalid_argument("unknown config key: " + key);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.apply_line(key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": " +
                               e.what());
    }
  }
  // Keep the training seed tied to the global one unless set explicitly.
  if (cfg.train.seed == 0) cfg.train.seed = cfg.seed;
  return cfg;
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  out << "seed = " << seed << '\n';
  out << "model.enc_d_model = " << model.enc_d_model << '\n';
  out << "model.enc_layers = " << model.enc_layers << '\n';
  out << "model.enc_heads = " << model.enc_heads << '\n';
  out << "model.dec_d_model = " << model.dec_d_model << '\n';
  out << "model.dec_layers = " << model.dec_layers << '\n';
  out << "model.dec_heads = " << model.dec_heads << '\n';
  out << "model.dec_max_positions = " << model.dec_max_positions << '\n';
  out << "model.mixer_layers = " << model.mixer_layers << '\n';
  out << "model.mixer_hidden = " << model.mixer_hidden << '\n';
  out << "model.max_history = " << model.max_history << '\n';
  out << "model.max_item_tokens = " << model.max_item_tokens << '\n';
  out << "model.max_ad_tokens = " << model.max_ad_tokens << '\n';
  out << "model.max_query_tokens = " << model.max_query_tokens << '\n';
  out << "model.max_response_tokens = " << model.max_response_tokens << '\n';
  out << "model.max_interest_tokens = " << model.max_interest_tokens << '\n';
  out << "model.share_decoder_weights = "
      << (model.share_decoder_weights ? "true" : "false") << '\n';
  out << "model.align_stop_grad_features = "
      << (model.align_stop_grad_features ? "true" : "false") << '\n';
  out << "model.init_std = " << model.init_std << '\n';
  out << "train.lr = " << train.lr << '\n';
  out << "train.epochs = " << train.epochs << '\n';
  out << "train.batch_size = " << train.batch_size << '\n';
  out << "train.max_steps = " << train.max_steps << '\n';
  out << "train.lambda_cls = " << train.lambda_cls << '\n';
  out << "train.lambda_align = " << train.lambda_align << '\n';
  out << "train.lambda_recon = " << train.lambda_recon << '\n';
  out << "train.tau = " << train.tau << '\n';
  out << "train.n_neg = " << train.n_neg << '\n';
  out << "train.beta1 = " << train.beta1 << '\n';
  out << "train.beta2 = " << train.beta2 << '\n';
  out << "train.adam_eps = " << train.adam_eps << '\n';
  out << "train.clip_norm = " << train.clip_norm << '\n';
  out << "train.log_unweighted = " << (train.log_unweighted ? "true" : "false")
      << '\n';
  out << "inference.cluster_k = " << inference.cluster_k << '\n';
  out << "inference.kmeans_max_iters = " << inference.kmeans_max_iters << '\n';
  out << "inference.kmeans_plus_plus = "
      << (inference.kmeans_plus_plus ? "true" : "false") << '\n';
  out << "inference.top_k_query_aware = " << inference.top_k_query_aware
      << '\n';
  out << "inference.top_k_query_free = " << inference.top_k_query_free << '\n';
  out << "decode.mode = "
      << (decode.mode == DecodeConfig::Mode::kGreedy ? "greedy" : "sampling")
      << '\n';
  out << "decode.temperature = " << decode.temperature << '\n';
  out << "decode.seed = " << decode.seed << '\n';
  out << "decode.max_new_tokens = " << decode.max_new_tokens << '\n';
  out << "client.kind = " << client.kind << '\n';
  out << "client.mock_hallucination_rate = " << client.mock_hallucination_rate
      << '\n';
  out << "client.base_url = " << client.http.base_url << '\n';
  out << "client.path = " << client.http.path << '\n';
  out << "client.model = " << client.http.model << '\n';
  out << "client.auth_token_env = " << client.http.auth_token_env << '\n';
  out << "client.timeout_ms = " << client.http.timeout_ms << '\n';
  out << "datagen.max_attempts = " << datagen.max_attempts << '\n';
  out << "datagen.backoff_ms = " << datagen.backoff_ms << '\n';
  out << "datagen.concurrency = " << datagen.concurrency << '\n';
  out << "datagen.history_render_limit = " << datagen.history_render_limit
      << '\n';
  out << "eval.limit = " << eval_limit << '\n';
  return out.str();
}

std::uint64_t RunConfig::content_hash() const { return fnv1a64(dump()); }

std::unique_ptr<TeacherClient> make_teacher_client(const ClientConfig& cfg) {
  if (cfg.kind == "http")
    return std::make_unique<HttpTeacherClient>(cfg.http);
  MockTeacherClient::Config mock;
  mock.hallucination_rate = cfg.mock_hallucination_rate;
  return std::make_unique<MockTeacherClient>(mock);
}

}  // namespace creagen
