#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "waytrain/engine.hpp"
#include "waytrain/indicators.hpp"

namespace waytrain {

struct Config {
  EngineThresholds thresholds;
  IndicatorPolicy policy;
  double simplify_tolerance_m = kDefaultSimplifyToleranceM;
};

/// Overrides defaults with the keys present in `j`. Unknown keys are an Input error.
Config config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Config& c);
Config load_config(const std::filesystem::path& file);

}  // namespace waytrain
