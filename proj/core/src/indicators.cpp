#include "waytrain/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

struct Tally {
  std::vector<IndicatorCounters> counters;
  std::vector<bool> observed;
};

double payload_along(const TrainingEvent& e, const char* key = "along_m") {
  const auto it = e.payload.find(key);
  if (it == e.payload.end() || !it->is_number()) {
    fail(ErrorCode::Integrity, std::string(to_string(e.type)) + " event " + std::to_string(e.seq) + " lacks " + key);
  }
  return it->get<double>();
}

std::string payload_string(const TrainingEvent& e, const char* key) {
  const auto it = e.payload.find(key);
  return it != e.payload.end() && it->is_string() ? it->get<std::string>() : std::string();
}

bool payload_flag(const TrainingEvent& e, const char* key) {
  const auto it = e.payload.find(key);
  return it != e.payload.end() && it->is_boolean() && it->get<bool>();
}

// One pass over the log. `bucket` maps an along-track position to a counter
// slot; the session total uses a single slot.
Tally tally(const SessionRecord& record, const IndicatorPolicy& policy, std::size_t slots,
            const std::function<std::size_t(double)>& bucket) {
  Tally t{std::vector<IndicatorCounters>(slots), std::vector<bool>(slots, false)};
  const RouteDefinition& route = record.route;

  struct Entered {
    const Poi* poi;
    std::size_t slot;
  };
  std::vector<Entered> landmarks;
  std::set<std::string> failed;
  std::vector<double> assist_alongs;
  bool open_episode = false;
  bool ended_off_track = false;

  for (const auto& e : record.events) {
    switch (e.type) {
      case EventType::VicinityAlert: {
        const std::string poi_id = payload_string(e, "poi_id");
        const Poi* poi = route.find_poi(poi_id);
        require(poi != nullptr, ErrorCode::Integrity, "alert for unknown POI '" + poi_id + "'");
        const std::size_t slot = bucket(poi->along_m);
        t.observed[slot] = true;
        t.counters[slot].E += 1;
        if (poi->kind == PoiKind::Landmark) {
          t.counters[slot].D += 1;
          landmarks.push_back({poi, slot});
        }
        break;
      }
      case EventType::QuizAnswer:
        if (!payload_flag(e, "correct")) failed.insert(payload_string(e, "poi_id"));
        t.observed[bucket(payload_along(e))] = true;
        break;
      case EventType::Instruction: {
        const std::size_t slot = bucket(payload_along(e));
        t.observed[slot] = true;
        if (payload_flag(e, "fallback")) t.counters[slot].A += 1;
        break;
      }
      case EventType::AssistLogged:
      case EventType::ARActivated: {
        const double along = payload_along(e);
        const std::size_t slot = bucket(along);
        t.observed[slot] = true;
        t.counters[slot].A += 1;
        assist_alongs.push_back(along);
        break;
      }
      case EventType::OffTrackBegin: {
        require(!open_episode, ErrorCode::Integrity, "off-track episode opened twice at seq " + std::to_string(e.seq));
        open_episode = true;
        const std::size_t slot = bucket(payload_along(e, "start_along_m"));
        t.observed[slot] = true;
        t.counters[slot].O += 1;
        const std::string attributed = payload_string(e, "attributed_poi");
        if (!attributed.empty()) failed.insert(attributed);
        break;
      }
      case EventType::OffTrackEnd: {
        require(open_episode, ErrorCode::Integrity, "off-track end without begin at seq " + std::to_string(e.seq));
        open_episode = false;
        const std::size_t slot = bucket(payload_along(e, "start_along_m"));
        if (payload_string(e, "how") == "self") t.counters[slot].Rs += 1;
        break;
      }
      case EventType::UnexpectedReport: {
        const std::size_t slot = bucket(payload_along(e));
        t.observed[slot] = true;
        t.counters[slot].U += 1;
        break;
      }
      case EventType::SessionEnd:
        ended_off_track = payload_flag(e, "ended_off_track");
        break;
      default:
        break;
    }
  }
  require(!open_episode || ended_off_track, ErrorCode::Integrity,
          "session " + record.session_id + " has an off-track episode that never ended");

  for (const auto& lm : landmarks) {
    bool clean = !failed.contains(lm.poi->id);
    for (double a : assist_alongs) {
      if (a >= lm.poi->along_m - lm.poi->geofence_radius_m && a <= lm.poi->along_m + policy.mistake_window_m) {
        clean = false;
      }
    }
    if (clean) t.counters[lm.slot].C += 1;
  }
  return t;
}

std::size_t clamp_subpath(const RouteDefinition& route, double along) {
  return subpath_index_at(route, std::clamp(along, 0.0, route.length()));
}

std::optional<double> diff(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return std::nullopt;
  return *b - *a;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
nlohmann::json opt(const std::optional<int>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json subpath_rows(const std::vector<SubpathIndicators>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = to_json(r.indicators);
    j["index"] = r.index;
    j["start_m"] = r.subpath.start_m;
    j["end_m"] = r.subpath.end_m;
    j["mode"] = to_string(r.subpath.mode);
    j["observed"] = r.observed;
    out.push_back(std::move(j));
  }
  return out;
}

const SubpathIndicators* matching_row(const TrendPoint& p, const SubPath& sp) {
  for (const auto& r : p.subpaths) {
    if (std::abs(r.subpath.start_m - sp.start_m) < 1e-6 && std::abs(r.subpath.end_m - sp.end_m) < 1e-6) return &r;
  }
  return nullptr;
}

}  // namespace

IndicatorSet indicators_from_counters(const IndicatorCounters& c, std::optional<int> confidence, bool observed) {
  IndicatorSet s;
  s.counters = c;
  s.confidence = confidence;
  if (observed) {
    s.autonomy = 1.0 - std::min(1.0, static_cast<double>(c.A) / static_cast<double>(std::max<long>(1, c.E)));
    if (c.L_km > 0.0) s.error_rate_per_km = static_cast<double>(c.D - c.C + c.O + c.U) / c.L_km;
  }
  if (c.D > 0) s.accuracy = static_cast<double>(c.C) / static_cast<double>(c.D);
  if (c.O > 0) s.recovery = static_cast<double>(c.Rs) / static_cast<double>(c.O);
  return s;
}

IndicatorSet compute_indicators(const SessionRecord& record, const IndicatorPolicy& policy) {
  Tally t = tally(record, policy, 1, [](double) { return std::size_t{0}; });
  t.counters[0].L_km = record.route.length() / 1000.0;
  return indicators_from_counters(t.counters[0], record.confidence, true);
}

std::vector<SubpathIndicators> subpath_breakdown(const SessionRecord& record, const IndicatorPolicy& policy) {
  const RouteDefinition& route = record.route;
  require(!route.subpaths.empty(), ErrorCode::Integrity, "route " + route.id + " has no sub-paths");
  Tally t = tally(record, policy, route.subpaths.size(),
                  [&](double along) { return clamp_subpath(route, along); });
  std::vector<SubpathIndicators> rows;
  for (std::size_t i = 0; i < route.subpaths.size(); ++i) {
    t.counters[i].L_km = route.subpaths[i].length() / 1000.0;
    rows.push_back({i, route.subpaths[i], t.observed[i], indicators_from_counters(t.counters[i], std::nullopt, t.observed[i])});
  }
  return rows;
}

TrendReport learning_trend(std::vector<SessionRecord> records, const IndicatorPolicy& policy) {
  require(!records.empty(), ErrorCode::Input, "a trend needs at least one session");
  const std::string way = records.front().route.way_id;
  for (const auto& r : records) {
    require(r.route.way_id == way, ErrorCode::Input,
            "session " + r.session_id + " belongs to way " + r.route.way_id + ", not " + way);
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const SessionRecord& a, const SessionRecord& b) { return a.started_ts < b.started_ts; });
  TrendReport report;
  report.way_id = way;
  for (const auto& r : records) {
    report.series.push_back({r.session_id, r.route.id, r.route.version, r.started_ts, r.config,
                             compute_indicators(r, policy), subpath_breakdown(r, policy)});
  }
  for (std::size_t i = 1; i < report.series.size(); ++i) {
    const auto& a = report.series[i - 1].indicators;
    const auto& b = report.series[i].indicators;
    std::optional<double> conf_a, conf_b;
    if (a.confidence) conf_a = *a.confidence;
    if (b.confidence) conf_b = *b.confidence;
    report.deltas.push_back({report.series[i - 1].session_id, report.series[i].session_id, diff(a.autonomy, b.autonomy),
                             diff(a.accuracy, b.accuracy), diff(a.error_rate_per_km, b.error_rate_per_km),
                             diff(a.recovery, b.recovery), diff(conf_a, conf_b)});
  }
  return report;
}

std::vector<AdaptationSuggestion> recommend_adaptation(const TrendReport& trend, const IndicatorPolicy& policy) {
  std::vector<AdaptationSuggestion> out;
  if (trend.series.empty()) return out;
  const TrendPoint& latest = trend.series.back();
  const int k = std::max(1, policy.clean_sessions);

  bool all_withdrawn = !latest.subpaths.empty();
  for (const auto& row : latest.subpaths) {
    const SupportMode mode = row.subpath.mode;
    if (mode < SupportMode::Reward) all_withdrawn = false;

    int clean = 0;
    for (auto it = trend.series.rbegin(); it != trend.series.rend() && clean < k; ++it) {
      const SubpathIndicators* r = matching_row(*it, row.subpath);
      if (r == nullptr || r->subpath.mode != mode) break;
      const auto& ind = r->indicators;
      if (!ind.accuracy || *ind.accuracy < policy.advance_accuracy || ind.counters.O != 0) break;
      ++clean;
    }

    const auto& acc = row.indicators.accuracy;
    std::optional<SupportMode> target;
    std::string reason;
    if (clean >= k && mode != SupportMode::Mute) {
      target = static_cast<SupportMode>(static_cast<int>(mode) + 1);
      reason = std::to_string(k) + " consecutive sessions with accuracy >= " + std::to_string(policy.advance_accuracy) +
               " and no off-track episode";
    } else if (acc && *acc < policy.regress_accuracy && mode != SupportMode::Actionable) {
      target = static_cast<SupportMode>(static_cast<int>(mode) - 1);
      reason = "accuracy " + std::to_string(*acc) + " below " + std::to_string(policy.regress_accuracy);
    }
    if (target) {
      out.push_back({SuggestionKind::SubpathMode, latest.route_id, row.index, std::string(to_string(mode)),
                     std::string(to_string(*target)), reason,
                     {{"op", "SetSubpathMode"}, {"index", row.index}, {"mode", to_string(*target)}}});
    }
  }

  const Supervision sup = latest.config.supervision;
  if (all_withdrawn && sup != Supervision::AppOnly) {
    const auto next = static_cast<Supervision>(static_cast<int>(sup) + 1);
    out.push_back({SuggestionKind::Supervision, latest.route_id, std::nullopt, std::string(to_string(sup)),
                   std::string(to_string(next)), "every sub-path runs in Reward or Mute mode", nullptr});
  }
  return out;
}

nlohmann::json to_json(const IndicatorCounters& c) {
  return {{"D", c.D}, {"C", c.C}, {"A", c.A}, {"O", c.O}, {"Rs", c.Rs}, {"U", c.U}, {"E", c.E}, {"L_km", c.L_km}};
}

nlohmann::json to_json(const IndicatorSet& s) {
  return {{"autonomy", opt(s.autonomy)},
          {"accuracy", opt(s.accuracy)},
          {"error_rate_per_km", opt(s.error_rate_per_km)},
          {"recovery", opt(s.recovery)},
          {"confidence", opt(s.confidence)},
          {"counters", to_json(s.counters)}};
}

nlohmann::json indicator_report(const SessionRecord& record, const IndicatorPolicy& policy) {
  nlohmann::json j = to_json(compute_indicators(record, policy));
  j["session_id"] = record.session_id;
  j["route_id"] = record.route.id;
  j["route_version"] = record.route.version;
  j["subpaths"] = subpath_rows(subpath_breakdown(record, policy));
  return j;
}

nlohmann::json to_json(const AdaptationSuggestion& s) {
  return {{"kind", s.kind == SuggestionKind::SubpathMode ? "SubpathMode" : "Supervision"},
          {"route_id", s.route_id},
          {"subpath_index", s.subpath_index ? nlohmann::json(*s.subpath_index) : nlohmann::json(nullptr)},
          {"from", s.from},
          {"to", s.to},
          {"reason", s.reason},
          {"edit", s.edit}};
}

nlohmann::json to_json(const TrendReport& t, const std::vector<AdaptationSuggestion>& suggestions) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& p : t.series) {
    nlohmann::json j = to_json(p.indicators);
    j["session_id"] = p.session_id;
    j["route_id"] = p.route_id;
    j["route_version"] = p.route_version;
    j["started_ts_ms"] = p.started_ts;
    j["supervision"] = to_string(p.config.supervision);
    j["subpaths"] = subpath_rows(p.subpaths);
    series.push_back(std::move(j));
  }
  nlohmann::json deltas = nlohmann::json::array();
  for (const auto& d : t.deltas) {
    deltas.push_back({{"from_session", d.from_session},
                      {"to_session", d.to_session},
                      {"autonomy", opt(d.autonomy)},
                      {"accuracy", opt(d.accuracy)},
                      {"error_rate_per_km", opt(d.error_rate_per_km)},
                      {"recovery", opt(d.recovery)},
                      {"confidence", opt(d.confidence)}});
  }
  nlohmann::json sugg = nlohmann::json::array();
  for (const auto& s : suggestions) sugg.push_back(to_json(s));
  return {{"way_id", t.way_id}, {"series", series}, {"deltas", deltas}, {"suggestions", sugg}};
}

}  // namespace waytrain
