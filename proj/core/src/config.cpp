#include "waytrain/config.hpp"

#include <fstream>
#include <set>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::Input, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    require(allowed.contains(key), ErrorCode::Input, "unknown config key " + where + "." + key);
  }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

Config config_from_json(const nlohmann::json& j) {
  Config c;
  try {
    check_keys(j, {"thresholds", "policy", "simplify_tolerance_m"}, "config");
    take(j, "simplify_tolerance_m", c.simplify_tolerance_m);
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      check_keys(t,
                 {"geofence_hysteresis_m", "off_track_m", "off_track_fixes", "back_on_track_m", "reward_commit_m",
                  "mistake_window_m", "signal_gap_ms", "projection_window_m"},
                 "thresholds");
      auto& e = c.thresholds;
      take(t, "geofence_hysteresis_m", e.geofence_hysteresis_m);
      take(t, "off_track_m", e.off_track_m);
      take(t, "off_track_fixes", e.off_track_fixes);
      take(t, "back_on_track_m", e.back_on_track_m);
      take(t, "reward_commit_m", e.reward_commit_m);
      take(t, "mistake_window_m", e.mistake_window_m);
      take(t, "signal_gap_ms", e.signal_gap_ms);
      take(t, "projection_window_m", e.projection_window_m);
      c.policy.mistake_window_m = e.mistake_window_m;
    }
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      check_keys(p, {"clean_sessions", "advance_accuracy", "regress_accuracy"}, "policy");
      take(p, "clean_sessions", c.policy.clean_sessions);
      take(p, "advance_accuracy", c.policy.advance_accuracy);
      take(p, "regress_accuracy", c.policy.regress_accuracy);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Input, std::string("bad config value: ") + e.what());
  }
  const auto& t = c.thresholds;
  require(t.off_track_fixes >= 1 && t.off_track_m > t.back_on_track_m && t.back_on_track_m > 0.0 &&
              t.projection_window_m > 0.0 && t.signal_gap_ms > 0,
          ErrorCode::Input, "inconsistent thresholds");
  return c;
}

nlohmann::json to_json(const Config& c) {
  const auto& t = c.thresholds;
  return {{"thresholds",
           {{"geofence_hysteresis_m", t.geofence_hysteresis_m},
            {"off_track_m", t.off_track_m},
            {"off_track_fixes", t.off_track_fixes},
            {"back_on_track_m", t.back_on_track_m},
            {"reward_commit_m", t.reward_commit_m},
            {"mistake_window_m", t.mistake_window_m},
            {"signal_gap_ms", t.signal_gap_ms},
            {"projection_window_m", t.projection_window_m}}},
          {"policy",
           {{"clean_sessions", c.policy.clean_sessions},
            {"advance_accuracy", c.policy.advance_accuracy},
            {"regress_accuracy", c.policy.regress_accuracy}}},
          {"simplify_tolerance_m", c.simplify_tolerance_m}};
}

Config load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  require(static_cast<bool>(in), ErrorCode::NotFound, "config file " + file.string() + " not found");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Input, std::string("config is not JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace waytrain
