#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/engine.hpp"

namespace waytrain {

/// Raw counts behind the indicators.
///   D  landmark geofence entries (decision points met)
///   C  of those, landmarks passed cleanly
///   A  assist-like events: AssistLogged, ARActivated, fallback Instructions
///   O  off-track episodes, Rs of which ended by the trainee alone
///   U  trainee reports of unexpected situations
///   E  POI geofence entries of any kind
struct IndicatorCounters {
  long D = 0;
  long C = 0;
  long A = 0;
  long O = 0;
  long Rs = 0;
  long U = 0;
  long E = 0;
  double L_km = 0.0;

  friend bool operator==(const IndicatorCounters&, const IndicatorCounters&) = default;
};

/// Ratios are empty when their denominator is zero.
struct IndicatorSet {
  std::optional<double> autonomy;
  std::optional<double> accuracy;
  std::optional<double> error_rate_per_km;
  std::optional<double> recovery;
  std::optional<int> confidence;
  IndicatorCounters counters;
};

struct IndicatorPolicy {
  /// Assists this far past a landmark count against it.
  double mistake_window_m = 50.0;
  int clean_sessions = 2;          // k
  double advance_accuracy = 0.9;
  double regress_accuracy = 0.5;
};

/// Throws Integrity on an unpaired off-track episode.
IndicatorSet compute_indicators(const SessionRecord& record, const IndicatorPolicy& policy = {});

struct SubpathIndicators {
  std::size_t index = 0;
  SubPath subpath;
  /// False when no event fell into this sub-path; all ratios are then empty.
  bool observed = false;
  IndicatorSet indicators;
};

std::vector<SubpathIndicators> subpath_breakdown(const SessionRecord& record, const IndicatorPolicy& policy = {});

/// Derives the ratios from counters. Sub-path rows pass `observed`; a session
/// row is always observed.
IndicatorSet indicators_from_counters(const IndicatorCounters& c, std::optional<int> confidence, bool observed = true);

struct TrendPoint {
  std::string session_id;
  std::string route_id;
  int route_version = 0;
  TimestampMs started_ts = 0;
  TrainingConfig config;
  IndicatorSet indicators;
  std::vector<SubpathIndicators> subpaths;
};

/// Difference between consecutive sessions; empty where either side is undefined.
struct TrendDelta {
  std::string from_session;
  std::string to_session;
  std::optional<double> autonomy;
  std::optional<double> accuracy;
  std::optional<double> error_rate_per_km;
  std::optional<double> recovery;
  std::optional<double> confidence;
};

struct TrendReport {
  std::string way_id;
  std::vector<TrendPoint> series;  // ascending start time
  std::vector<TrendDelta> deltas;
};

/// Throws Input for an empty list or records of different ways.
TrendReport learning_trend(std::vector<SessionRecord> records, const IndicatorPolicy& policy = {});

enum class SuggestionKind { SubpathMode, Supervision };

struct AdaptationSuggestion {
  SuggestionKind kind = SuggestionKind::SubpathMode;
  std::string route_id;
  std::optional<std::size_t> subpath_index;
  std::string from;
  std::string to;
  std::string reason;
  /// Route edit that applies the suggestion, for sub-path mode suggestions.
  nlohmann::json edit;
};

/// Suggestions for the trainer; nothing here changes a route.
std::vector<AdaptationSuggestion> recommend_adaptation(const TrendReport& trend, const IndicatorPolicy& policy = {});

nlohmann::json to_json(const IndicatorCounters& c);
nlohmann::json to_json(const IndicatorSet& s);
nlohmann::json indicator_report(const SessionRecord& record, const IndicatorPolicy& policy = {});
nlohmann::json to_json(const AdaptationSuggestion& s);
nlohmann::json to_json(const TrendReport& t, const std::vector<AdaptationSuggestion>& suggestions);

}  // namespace waytrain
