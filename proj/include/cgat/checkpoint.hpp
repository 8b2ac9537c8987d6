#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cgat/model.hpp"

namespace cgat {

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown enum values throw InvalidConfig.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// A model plus free-form metadata (preprocessing settings, scaler, ...).
struct Checkpoint {
  Model model;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Layout: the line "CGAT1", a line "config <bytes>" followed by that many
/// bytes of JSON and a newline, a line "params <count>", then per parameter
/// a line "<name> <rank> <dims...>" followed by little-endian float32 values.
std::string serialize_checkpoint(const Model& model, const nlohmann::json& metadata = nlohmann::json::object());
/// Throws MalformedFile on bad magic, truncation or trailing bytes.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter to float32 precision, i.e. what a save/load round
/// trip yields.
void round_to_float32(Model& model);

}  // namespace cgat
