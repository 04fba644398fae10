#include "waytrain/route.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

constexpr double kBoundaryEpsM = 1e-6;

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& values, std::string_view what) {
  for (Enum v : values) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorCode::Input, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(PoiKind v) {
  switch (v) {
    case PoiKind::Landmark: return "Landmark";
    case PoiKind::Reassurance: return "Reassurance";
    case PoiKind::Candidate: return "Candidate";
  }
  return "?";
}

std::string_view to_string(PoiStatus v) {
  switch (v) {
    case PoiStatus::Pending: return "Pending";
    case PoiStatus::Confirmed: return "Confirmed";
    case PoiStatus::Rejected: return "Rejected";
  }
  return "?";
}

std::string_view to_string(SupportMode v) {
  switch (v) {
    case SupportMode::Actionable: return "Actionable";
    case SupportMode::Quiz: return "Quiz";
    case SupportMode::Reward: return "Reward";
    case SupportMode::Mute: return "Mute";
  }
  return "?";
}

std::string_view to_string(RouteStatus v) {
  switch (v) {
    case RouteStatus::Draft: return "Draft";
    case RouteStatus::UnderNegotiation: return "UnderNegotiation";
    case RouteStatus::Working: return "Working";
  }
  return "?";
}

PoiKind parse_poi_kind(std::string_view s) {
  return parse_enum(s, std::array{PoiKind::Landmark, PoiKind::Reassurance, PoiKind::Candidate},
                    "poi kind");
}

PoiStatus parse_poi_status(std::string_view s) {
  return parse_enum(s, std::array{PoiStatus::Pending, PoiStatus::Confirmed, PoiStatus::Rejected},
                    "poi status");
}

SupportMode parse_support_mode(std::string_view s) {
  return parse_enum(
      s, std::array{SupportMode::Actionable, SupportMode::Quiz, SupportMode::Reward, SupportMode::Mute},
      "support mode");
}

RouteStatus parse_route_status(std::string_view s) {
  return parse_enum(
      s, std::array{RouteStatus::Draft, RouteStatus::UnderNegotiation, RouteStatus::Working},
      "route status");
}

nlohmann::json to_json(const Way& way) {
  return {{"id", way.id},
          {"origin_label", way.origin_label},
          {"origin", {{"lat", way.origin.lat}, {"lon", way.origin.lon}}},
          {"destination_label", way.destination_label},
          {"destination", {{"lat", way.destination.lat}, {"lon", way.destination.lon}}},
          {"owner_user_id", way.owner_user_id},
          {"direction_note", way.direction_note}};
}

Way way_from_json(const nlohmann::json& j) {
  Way w;
  w.id = j.at("id").get<std::string>();
  w.origin_label = j.value("origin_label", "");
  w.origin = {j.at("origin").at("lat").get<double>(), j.at("origin").at("lon").get<double>()};
  w.destination_label = j.value("destination_label", "");
  w.destination = {j.at("destination").at("lat").get<double>(),
                   j.at("destination").at("lon").get<double>()};
  w.owner_user_id = j.value("owner_user_id", "");
  w.direction_note = j.value("direction_note", "");
  check_valid(w.origin);
  check_valid(w.destination);
  return w;
}

const std::string& Poi::primary_photo() const {
  static const std::string empty;
  return photos.empty() ? empty : photos.front();
}

const Poi* RouteDefinition::find_poi(std::string_view poi_id) const {
  const auto it = std::find_if(pois.begin(), pois.end(), [&](const Poi& p) { return p.id == poi_id; });
  return it == pois.end() ? nullptr : &*it;
}

Poi* RouteDefinition::find_poi(std::string_view poi_id) {
  const auto it = std::find_if(pois.begin(), pois.end(), [&](const Poi& p) { return p.id == poi_id; });
  return it == pois.end() ? nullptr : &*it;
}

void RouteDefinition::reindex() {
  for (auto& poi : pois) {
    const auto proj = project_onto_polyline(poi.coordinate, geometry);
    poi.along_m = proj.along_track;
    poi.cross_m = proj.cross_track;
  }
  std::stable_sort(pois.begin(), pois.end(),
                   [](const Poi& a, const Poi& b) { return a.along_m < b.along_m; });

  if (subpaths.empty()) return;
  const double old_len = subpaths.back().end_m;
  const double new_len = geometry.length();
  if (std::abs(old_len - new_len) <= kBoundaryEpsM || old_len <= 0.0) {
    subpaths.back().end_m = new_len;
    return;
  }
  const double scale = new_len / old_len;
  double prev_end = 0.0;
  for (auto& sp : subpaths) {
    sp.start_m = prev_end;
    sp.end_m = sp.end_m * scale;
    prev_end = sp.end_m;
  }
  subpaths.back().end_m = new_len;
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_route(const RouteDefinition& def) {
  ValidationReport report;
  auto add = [&](std::string code, std::string subject, std::string detail = {}) {
    report.violations.push_back({std::move(code), std::move(subject), std::move(detail)});
  };

  if (def.version < 1) add("version", "", "version must be >= 1");

  std::set<std::string> ids;
  double prev_along = -1.0;
  bool has_confirmed_landmark = false;
  for (const auto& poi : def.pois) {
    if (!ids.insert(poi.id).second) add("duplicate-poi-id", poi.id);
    if (!is_valid(poi.coordinate)) {
      add("invalid-coordinate", poi.id);
      continue;
    }
    if (poi.photos.empty()) add("photo-required", poi.id, "a POI needs at least one photo");
    if (poi.kind == PoiKind::Landmark && poi.status == PoiStatus::Confirmed &&
        poi.instruction.text.empty()) {
      add("landmark-instruction-required", poi.id);
    }
    if (poi.geofence_radius_m < kMinGeofenceRadiusM || poi.geofence_radius_m > kMaxGeofenceRadiusM) {
      add("radius-range", poi.id, "geofence radius outside [10, 60] m");
    }
    const auto proj = project_onto_polyline(poi.coordinate, def.geometry);
    if (proj.cross_track > kMaxPoiCrossTrackM) {
      add("poi-off-path", poi.id, "cross-track " + std::to_string(proj.cross_track) + " m");
    }
    if (proj.along_track < prev_along - kBoundaryEpsM) add("poi-order", poi.id);
    prev_along = std::max(prev_along, proj.along_track);
    if (poi.kind == PoiKind::Landmark && poi.status == PoiStatus::Confirmed) has_confirmed_landmark = true;

    if (def.status == RouteStatus::Working) {
      if (poi.status == PoiStatus::Pending) add("working-has-pending", poi.id);
      if (poi.status == PoiStatus::Rejected) add("working-has-rejected", poi.id);
      if (poi.kind == PoiKind::Candidate) add("working-has-candidate", poi.id);
    }
  }
  if (def.status == RouteStatus::Working && !has_confirmed_landmark) {
    add("working-no-landmark", "", "a Working route needs at least one Confirmed Landmark");
  }

  if (!def.subpaths.empty()) {
    const double len = def.length();
    double expected_start = 0.0;
    for (std::size_t i = 0; i < def.subpaths.size(); ++i) {
      const auto& sp = def.subpaths[i];
      const std::string subject = std::to_string(i);
      if (sp.end_m <= sp.start_m) add("subpath-empty", subject);
      if (sp.start_m < expected_start - kBoundaryEpsM) add("subpath-overlap", subject);
      if (sp.start_m > expected_start + kBoundaryEpsM) add("subpath-gap", subject);
      expected_start = sp.end_m;
    }
    if (std::abs(def.subpaths.front().start_m) > kBoundaryEpsM ||
        std::abs(def.subpaths.back().end_m - len) > kBoundaryEpsM) {
      add("subpath-bounds", "", "sub-paths must cover [0, route length)");
    }
  } else if (def.status == RouteStatus::Working) {
    add("subpath-missing", "", "a Working route needs a sub-path partition");
  }
  return report;
}

std::vector<Poi> decision_points(const RouteDefinition& def) {
  const auto report = validate_route(def);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    fail(ErrorCode::Validation, "route " + def.id + " is invalid: " + v.code + " " + v.subject);
  }
  std::vector<Poi> out;
  for (const auto& poi : def.pois) {
    if (poi.kind == PoiKind::Landmark && poi.status == PoiStatus::Confirmed) out.push_back(poi);
  }
  return out;
}

std::size_t subpath_index_at(const RouteDefinition& def, double along_m) {
  require(!def.subpaths.empty(), ErrorCode::ContractViolation, "route has no sub-paths");
  require(along_m >= 0.0 && along_m <= def.length() + kBoundaryEpsM, ErrorCode::ContractViolation,
          "position " + std::to_string(along_m) + " outside route");
  for (std::size_t i = 0; i < def.subpaths.size(); ++i) {
    if (along_m < def.subpaths[i].end_m) return i;
  }
  return def.subpaths.size() - 1;
}

const SubPath& subpath_at(const RouteDefinition& def, double along_m) {
  return def.subpaths[subpath_index_at(def, along_m)];
}

void install_default_subpath(RouteDefinition& def) {
  def.subpaths = {SubPath{0.0, def.length(), SupportMode::Actionable}};
}

void split_subpath(RouteDefinition& def, double at_m) {
  const std::size_t i = subpath_index_at(def, at_m);
  SubPath& sp = def.subpaths[i];
  require(at_m > sp.start_m && at_m < sp.end_m, ErrorCode::ContractViolation,
          "split point must lie strictly inside a sub-path");
  SubPath right{at_m, sp.end_m, sp.mode};
  sp.end_m = at_m;
  def.subpaths.insert(def.subpaths.begin() + static_cast<std::ptrdiff_t>(i) + 1, right);
}

void merge_subpaths(RouteDefinition& def, std::size_t index) {
  require(index + 1 < def.subpaths.size(), ErrorCode::ContractViolation, "no successor sub-path to merge");
  def.subpaths[index].end_m = def.subpaths[index + 1].end_m;
  def.subpaths.erase(def.subpaths.begin() + static_cast<std::ptrdiff_t>(index) + 1);
}

void set_subpath_mode(RouteDefinition& def, std::size_t index, SupportMode mode) {
  require(index < def.subpaths.size(), ErrorCode::ContractViolation, "sub-path index out of range");
  def.subpaths[index].mode = mode;
}

nlohmann::json guidance_payload(const Poi& poi) {
  nlohmann::json j{{"poi_id", poi.id},
                   {"kind", to_string(poi.kind)},
                   {"photo", poi.primary_photo()},
                   {"text", poi.instruction.text}};
  if (!poi.instruction.symbol.empty()) j["symbol"] = poi.instruction.symbol;
  if (!poi.instruction.audio_asset.empty()) j["audio"] = poi.instruction.audio_asset;
  return j;
}

nlohmann::json poi_to_json(const Poi& poi) {
  nlohmann::json j{{"id", poi.id},
                   {"lat", poi.coordinate.lat},
                   {"lon", poi.coordinate.lon},
                   {"ts_ms", poi.captured_ts},
                   {"kind", to_string(poi.kind)},
                   {"status", to_string(poi.status)},
                   {"radius_m", poi.geofence_radius_m},
                   {"photos", poi.photos},
                   {"instruction", poi.instruction.text},
                   {"notes", poi.notes}};
  if (!poi.instruction.symbol.empty()) j["symbol"] = poi.instruction.symbol;
  if (!poi.instruction.audio_asset.empty()) j["audio"] = poi.instruction.audio_asset;
  return j;
}

Poi poi_from_json(const nlohmann::json& j) {
  Poi poi;
  poi.id = j.at("id").get<std::string>();
  poi.coordinate = {j.at("lat").get<double>(), j.at("lon").get<double>()};
  poi.captured_ts = j.value("ts_ms", TimestampMs{0});
  poi.kind = parse_poi_kind(j.value("kind", "Candidate"));
  poi.status = parse_poi_status(j.value("status", "Pending"));
  poi.geofence_radius_m = j.value("radius_m", kDefaultGeofenceRadiusM);
  poi.photos = j.value("photos", std::vector<std::string>{});
  poi.instruction.text = j.value("instruction", "");
  poi.instruction.symbol = j.value("symbol", "");
  poi.instruction.audio_asset = j.value("audio", "");
  poi.notes = j.value("notes", "");
  return poi;
}

nlohmann::json to_json(const RouteDefinition& def) {
  nlohmann::json geometry = nlohmann::json::array();
  for (const auto& v : def.geometry.vertices()) geometry.push_back({{"lat", v.lat}, {"lon", v.lon}});
  nlohmann::json pois = nlohmann::json::array();
  for (const auto& p : def.pois) pois.push_back(poi_to_json(p));
  nlohmann::json subpaths = nlohmann::json::array();
  for (const auto& sp : def.subpaths) {
    subpaths.push_back({{"start_m", sp.start_m}, {"end_m", sp.end_m}, {"mode", to_string(sp.mode)}});
  }
  return {{"id", def.id},         {"way_id", def.way_id},     {"status", to_string(def.status)},
          {"version", def.version}, {"geometry", geometry}, {"pois", pois},
          {"subpaths", subpaths}};
}

namespace {

RouteDefinition parse_route(const nlohmann::json& j) {
  std::vector<GeoPoint> verts;
  for (const auto& v : j.at("geometry")) verts.push_back({v.at("lat").get<double>(), v.at("lon").get<double>()});
  RouteDefinition def{.id = j.at("id").get<std::string>(),
                      .way_id = j.at("way_id").get<std::string>(),
                      .geometry = Polyline(std::move(verts)),
                      .pois = {},
                      .subpaths = {}};
  def.status = parse_route_status(j.at("status").get<std::string>());
  def.version = j.at("version").get<int>();
  for (const auto& p : j.at("pois")) def.pois.push_back(poi_from_json(p));
  for (const auto& sp : j.at("subpaths")) {
    def.subpaths.push_back({sp.at("start_m").get<double>(), sp.at("end_m").get<double>(),
                            parse_support_mode(sp.at("mode").get<std::string>())});
  }
  for (auto& poi : def.pois) {
    const auto proj = project_onto_polyline(poi.coordinate, def.geometry);
    poi.along_m = proj.along_track;
    poi.cross_m = proj.cross_track;
  }
  return def;
}

}  // namespace

RouteDefinition route_from_json(const nlohmann::json& j) {
  try {
    return parse_route(j);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Input, std::string("malformed route: ") + e.what());
  }
}

std::string canonical_dump(const nlohmann::json& j) { return j.dump(); }

}  // namespace waytrain
