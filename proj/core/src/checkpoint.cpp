#include "creagen/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "creagen/hash.hpp"

namespace creagen {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "CGCKPT";
constexpr std::uint32_t kFormatVersion = 1;

std::string u64_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hex_u64(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

json model_cfg_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"enc_d_model", c.enc_d_model},
          {"enc_layers", c.enc_layers},
          {"enc_heads", c.enc_heads},
          {"dec_d_model", c.dec_d_model},
          {"dec_layers", c.dec_layers},
          {"dec_heads", c.dec_heads},
          {"dec_max_positions", c.dec_max_positions},
          {"mixer_layers", c.mixer_layers},
          {"mixer_hidden", c.mixer_hidden},
          {"max_history", c.max_history},
          {"max_item_tokens", c.max_item_tokens},
          {"max_ad_tokens", c.max_ad_tokens},
          {"max_query_tokens", c.max_query_tokens},
          {"share_decoder_weights", c.share_decoder_weights},
          {"align_stop_grad_features", c.align_stop_grad_features},
          {"init_std", c.init_std}};
}

ModelConfig model_cfg_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.enc_d_model = j.at("enc_d_model").get<int>();
  c.enc_layers = j.at("enc_layers").get<int>();
  c.enc_heads = j.at("enc_heads").get<int>();
  c.dec_d_model = j.at("dec_d_model").get<int>();
  c.dec_layers = j.at("dec_layers").get<int>();
  c.dec_heads = j.at("dec_heads").get<int>();
  c.dec_max_positions = j.at("dec_max_positions").get<int>();
  c.mixer_layers = j.at("mixer_layers").get<int>();
  c.mixer_hidden = j.at("mixer_hidden").get<int>();
  c.max_history = j.at("max_history").get<int>();
  c.max_item_tokens = j.at("max_item_tokens").get<int>();
  c.max_ad_tokens = j.at("max_ad_tokens").get<int>();
  c.max_query_tokens = j.at("max_query_tokens").get<int>();
  c.share_decoder_weights = j.at("share_decoder_weights").get<bool>();
  c.align_stop_grad_features = j.at("align_stop_grad_features").get<bool>();
  c.init_std = j.at("init_std").get<double>();
  return c;
}

json train_cfg_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", u64_hex(c.seed)},
          {"max_steps", c.max_steps},
          {"lambda_cls", c.lambda_cls},
          {"lambda_align", c.lambda_align},
          {"lambda_recon", c.lambda_recon},
          {"tau", c.tau},
          {"n_neg", c.n_neg},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"clip_norm", c.clip_norm},
          {"log_unweighted", c.log_unweighted}};
}

TrainConfig train_cfg_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = hex_u64(j.at("seed").get<std::string>());
  c.max_steps = j.at("max_steps").get<int>();
  c.lambda_cls = j.at("lambda_cls").get<double>();
  c.lambda_align = j.at("lambda_align").get<double>();
  c.lambda_recon = j.at("lambda_recon").get<double>();
  c.tau = j.at("tau").get<double>();
  c.n_neg = j.at("n_neg").get<int>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.log_unweighted = j.at("log_unweighted").get<bool>();
  return c;
}

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void append_array(std::string& out, const std::string& name,
                  const Mat<float>& m) {
  append_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  append_u32(out, static_cast<std::uint32_t>(m.rows()));
  append_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.append(reinterpret_cast<const char*>(m.data()),
             static_cast<std::size_t>(m.size()) * sizeof(float));
}

class Reader {
 public:
  Reader(const std::string& data, std::size_t pos) : data_(data), pos_(pos) {}

  std::uint32_t read_u32() {
    require(4);
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  std::string read_bytes(std::size_t n) {
    require(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void read_array(std::string& name, Mat<float>& m) {
    const std::uint32_t name_len = read_u32();
    name = read_bytes(name_len);
    const std::uint32_t rows = read_u32();
    const std::uint32_t cols = read_u32();
    m.resize(rows, cols);
    const std::size_t bytes = std::size_t{rows} * cols * sizeof(float);
    require(bytes);
    std::memcpy(m.data(), data_.data() + pos_, bytes);
    pos_ += bytes;
  }

  std::size_t pos() const { return pos_; }

 private:
  void require(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw std::runtime_error("checkpoint truncated");
  }
  const std::string& data_;
  std::size_t pos_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header = {{"format_version", kFormatVersion},
                 {"model", model_cfg_to_json(ckpt.model_cfg)},
                 {"train", train_cfg_to_json(ckpt.train_cfg)},
                 {"step", ckpt.step},
                 {"adam_step", ckpt.adam_step},
                 {"rng_state",
                  {u64_hex(ckpt.rng_state[0]), u64_hex(ckpt.rng_state[1]),
                   u64_hex(ckpt.rng_state[2]), u64_hex(ckpt.rng_state[3])}},
                 {"vocab_hash", u64_hex(ckpt.vocab_hash)},
                 {"has_optimizer_state", !ckpt.adam_m.empty()}};
  const std::string header_str = header.dump();

  std::string out;
  out += kMagic;
  append_u32(out, kFormatVersion);
  append_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out += header_str;

  auto params = model_params(const_cast<ModelParams<float>&>(ckpt.params));
  append_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) append_array(out, p.name, *p.value);

  if (!ckpt.adam_m.empty()) {
    if (ckpt.adam_m.size() != params.size() ||
        ckpt.adam_v.size() != params.size())
      throw std::invalid_argument(
          "save_checkpoint: optimizer moment count does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
      append_array(out, "adam_m." + params[i].name, ckpt.adam_m[i]);
    for (std::size_t i = 0; i < params.size(); ++i)
      append_array(out, "adam_v." + params[i].name, ckpt.adam_v[i]);
  }

  const std::uint64_t checksum = fnv1a64_bytes(out.data(), out.size());
  out.append(reinterpret_cast<const char*>(&checksum), 8);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string data = ss.str();

  const std::size_t magic_len = std::strlen(kMagic);
  if (data.size() < magic_len + 4 + 8 ||
      data.compare(0, magic_len, kMagic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  std::uint64_t stored_checksum;
  std::memcpy(&stored_checksum, data.data() + data.size() - 8, 8);
  const std::uint64_t actual = fnv1a64_bytes(data.data(), data.size() - 8);
  if (stored_checksum != actual)
    throw std::runtime_error("checkpoint checksum mismatch (corrupted file): " +
                             path);

  Reader r(data, magic_len);
  const std::uint32_t version = r.read_u32();
  if (version != kFormatVersion)
    throw std::runtime_error(
        "checkpoint version mismatch: file has version " +
        std::to_string(version) + ", this build reads version " +
        std::to_string(kFormatVersion));

  const std::uint32_t header_len = r.read_u32();
  const json header = json::parse(r.read_bytes(header_len));

  Checkpoint ckpt;
  ckpt.model_cfg = model_cfg_from_json(header.at("model"));
  ckpt.train_cfg = train_cfg_from_json(header.at("train"));
  ckpt.step = header.at("step").get<long>();
  ckpt.adam_step = header.at("adam_step").get<long>();
  const auto& rng = header.at("rng_state");
  for (int i = 0; i < 4; ++i)
    ckpt.rng_state[static_cast<std::size_t>(i)] =
        hex_u64(rng[static_cast<std::size_t>(i)].get<std::string>());
  ckpt.vocab_hash = hex_u64(header.at("vocab_hash").get<std::string>());

  // Allocate parameter shapes from the config, then fill by name.
  Rng scratch(0);
  model_init(ckpt.params, ckpt.model_cfg, scratch);
  auto params = model_params(ckpt.params);

  const std::uint32_t count = r.read_u32();
  if (count != params.size())
    throw std::runtime_error(
        "checkpoint parameter count mismatch: file has " +
        std::to_string(count) + ", config implies " +
        std::to_string(params.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Mat<float> m;
    r.read_array(name, m);
    if (name != params[i].name)
      throw std::runtime_error("checkpoint parameter order mismatch at \"" +
                               name + "\", expected \"" + params[i].name +
                               "\"");
    if (m.rows() != params[i].value->rows() ||
        m.cols() != params[i].value->cols())
      throw std::runtime_error("checkpoint array shape mismatch for \"" + name +
                               "\"");
    *params[i].value = std::move(m);
  }

  if (header.at("has_optimizer_state").get<bool>()) {
    ckpt.adam_m.resize(params.size());
    ckpt.adam_v.resize(params.size());
    std::string name;
    for (std::size_t i = 0; i < params.size(); ++i)
      r.read_array(name, ckpt.adam_m[i]);
    for (std::size_t i = 0; i < params.size(); ++i)
      r.read_array(name, ckpt.adam_v[i]);
  }
  return ckpt;
}

}  // namespace creagen
