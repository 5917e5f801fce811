#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvsr/cost_model.hpp"
#include "lvsr/model_spec.hpp"
#include "lvsr/tables.hpp"
#include "lvsr/trainer.hpp"

namespace lvsr::cli {

inline constexpr int kConfigVersion = 1;

/// One JSON document drives every command.
struct RunConfig {
  int version = kConfigVersion;
  ModelSpec model;
  TrainConfig train;
  SyntheticDatasetSpec data;
  CountingConvention cost;
  /// Rows for `analyze`; each entry overlays its "spec" onto the "model" section.
  std::vector<TableEntry> models;
  bool has_models = false;
};

/// Unknown keys and wrong types raise ConfigError carrying the JSON path.
RunConfig parse_run_config(const nlohmann::json& doc);
/// IoError when unreadable, ConfigError for malformed JSON.
RunConfig load_run_config(const std::filesystem::path& path);

ModelSpec parse_model(const nlohmann::json& j, const std::string& path, ModelSpec base = {});

nlohmann::ordered_json to_json(const ModelSpec& m);
nlohmann::ordered_json to_json(const TrainConfig& t);
nlohmann::ordered_json to_json(const SyntheticDatasetSpec& d);
nlohmann::ordered_json to_json(const CountingConvention& c);
/// Every section with its defaults.
nlohmann::ordered_json default_config();

}  // namespace lvsr::cli
