#include <bit>

#include "cgat/checkpoint.hpp"
#include "cgat/error.hpp"

namespace cgat {

nlohmann::json to_json(const ModelConfig& c) {
  return {{"architecture", to_string(c.architecture)},
          {"blocks", c.blocks},
          {"heads", c.heads},
          {"hidden", c.hidden},
          {"features", to_string(c.features)},
          {"cls", to_string(c.cls_mode)},
          {"attention", to_string(c.attention)},
          {"head_merge", to_string(c.head_merge)},
          {"head_bias", c.head_bias},
          {"classes", c.classes},
          {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("architecture")) c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    if (j.contains("blocks")) c.blocks = j.at("blocks").get<int>();
    if (j.contains("heads")) c.heads = j.at("heads").get<int>();
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<int>();
    if (j.contains("features")) c.features = parse_feature_channels(j.at("features").get<std::string>());
    if (j.contains("cls")) c.cls_mode = parse_cls_mode(j.at("cls").get<std::string>());
    if (j.contains("attention")) c.attention = parse_attention_kind(j.at("attention").get<std::string>());
    if (j.contains("head_merge")) c.head_merge = parse_head_merge(j.at("head_merge").get<std::string>());
    if (j.contains("head_bias")) c.head_bias = j.at("head_bias").get<bool>();
    if (j.contains("classes")) c.classes = j.at("classes").get<int>();
    if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, e.what());
  }
  validate(c);
  return c;
}

namespace {

constexpr std::string_view kMagic = "CGAT1\n";

void append_float(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double read_float(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) fail(ErrorCode::malformed_file, "checkpoint truncated");
    std::string out(bytes_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::malformed_file, "checkpoint truncated");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < line.size()) {
    auto end = line.find(' ', start);
    if (end == std::string::npos) end = line.size();
    if (end > start) words.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

std::size_t parse_count(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return value;
  } catch (const std::exception&) {
    fail(ErrorCode::malformed_file, "bad number '" + text + "' in checkpoint");
  }
}

}  // namespace

std::string serialize_checkpoint(const Model& model, const nlohmann::json& metadata) {
  const std::string config = nlohmann::json{{"model", to_json(model.config)}, {"metadata", metadata}}.dump(2);
  std::string out(kMagic);
  out += "config " + std::to_string(config.size()) + "\n" + config + "\n";
  out += "params " + std::to_string(model.params.size()) + "\n";
  for (const auto& p : model.params.params()) {
    out += p.name + " " + std::to_string(p.value.rank());
    for (auto d : p.value.shape()) out += " " + std::to_string(d);
    out += "\n";
    for (std::size_t i = 0; i < p.value.size(); ++i) append_float(out, p.value[i]);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) fail(ErrorCode::malformed_file, "not a CGAT1 checkpoint");
  Reader in(bytes.substr(kMagic.size()));
  auto header = split_words(in.line());
  if (header.size() != 2 || header[0] != "config") fail(ErrorCode::malformed_file, "missing config block");
  const auto config_text = in.take(parse_count(header[1]));
  if (!in.line().empty()) fail(ErrorCode::malformed_file, "config block not terminated");
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::malformed_file, std::string("config block: ") + e.what());
  }
  if (!config.is_object() || !config.contains("model")) fail(ErrorCode::malformed_file, "config block lacks model");

  Checkpoint ckpt;
  ckpt.model = init_model(model_config_from_json(config.at("model")), 0);
  if (config.contains("metadata")) ckpt.metadata = config.at("metadata");

  auto params_header = split_words(in.line());
  if (params_header.size() != 2 || params_header[0] != "params") {
    fail(ErrorCode::malformed_file, "missing parameter table");
  }
  const std::size_t count = parse_count(params_header[1]);
  auto& params = ckpt.model.params.params();
  if (count != params.size()) {
    fail(ErrorCode::malformed_file, "checkpoint lists " + std::to_string(count) + " parameters, config implies " +
                                        std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto words = split_words(in.line());
    if (words.size() < 2 || words[0] != p.name) {
      fail(ErrorCode::malformed_file, "expected parameter '" + p.name + "'");
    }
    const std::size_t rank = parse_count(words[1]);
    if (words.size() != 2 + rank) fail(ErrorCode::malformed_file, "bad shape for '" + p.name + "'");
    Shape shape;
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(parse_count(words[2 + i]));
    if (shape != p.value.shape()) fail(ErrorCode::malformed_file, "shape mismatch for '" + p.name + "'");
    const auto blob = in.take(4 * p.value.size());
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = read_float(blob.data() + 4 * i);
  }
  if (!in.done()) fail(ErrorCode::malformed_file, "trailing bytes after parameters");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const nlohmann::json& metadata) {
  write_file(path, serialize_checkpoint(model, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

void round_to_float32(Model& model) {
  for (auto& p : model.params.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = static_cast<float>(p.value[i]);
  }
}

}  // namespace cgat
