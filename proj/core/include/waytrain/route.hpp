#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/geo.hpp"

namespace waytrain {

enum class PoiKind { Landmark, Reassurance, Candidate };
enum class PoiStatus { Pending, Confirmed, Rejected };
enum class SupportMode { Actionable, Quiz, Reward, Mute };
enum class RouteStatus { Draft, UnderNegotiation, Working };

std::string_view to_string(PoiKind v);
std::string_view to_string(PoiStatus v);
std::string_view to_string(SupportMode v);
std::string_view to_string(RouteStatus v);
PoiKind parse_poi_kind(std::string_view s);
PoiStatus parse_poi_status(std::string_view s);
SupportMode parse_support_mode(std::string_view s);
RouteStatus parse_route_status(std::string_view s);

/// Directional origin -> destination connection. The reverse direction is a
/// different Way.
struct Way {
  std::string id;
  std::string origin_label;
  GeoPoint origin;
  std::string destination_label;
  GeoPoint destination;
  std::string owner_user_id;
  std::string direction_note;

  friend bool operator==(const Way&, const Way&) = default;
};

nlohmann::json to_json(const Way& way);
Way way_from_json(const nlohmann::json& j);

struct Instruction {
  std::string text;
  std::string symbol;       // optional symbol code, e.g. "turn-right"
  std::string audio_asset;  // optional audio asset id

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

inline constexpr double kDefaultGeofenceRadiusM = 25.0;
inline constexpr double kMinGeofenceRadiusM = 10.0;
inline constexpr double kMaxGeofenceRadiusM = 60.0;
/// POIs further than this from the route geometry are rejected.
inline constexpr double kMaxPoiCrossTrackM = 30.0;

struct Poi {
  std::string id;
  GeoPoint coordinate;
  TimestampMs captured_ts = 0;
  PoiKind kind = PoiKind::Candidate;
  /// The first photo is the primary one.
  std::vector<std::string> photos;
  Instruction instruction;
  std::string notes;
  PoiStatus status = PoiStatus::Pending;
  double geofence_radius_m = kDefaultGeofenceRadiusM;

  // Derived from the route geometry by RouteDefinition::reindex(); not serialized.
  double along_m = 0.0;
  double cross_m = 0.0;

  const std::string& primary_photo() const;

  friend bool operator==(const Poi& a, const Poi& b) {
    return a.id == b.id && a.coordinate == b.coordinate && a.captured_ts == b.captured_ts &&
           a.kind == b.kind && a.photos == b.photos && a.instruction == b.instruction &&
           a.notes == b.notes && a.status == b.status && a.geofence_radius_m == b.geofence_radius_m;
  }
};

/// Half-open along-track interval [start_m, end_m); the last sub-path of a
/// route is closed at the route end.
struct SubPath {
  double start_m = 0.0;
  double end_m = 0.0;
  SupportMode mode = SupportMode::Actionable;

  double length() const { return end_m - start_m; }
  friend bool operator==(const SubPath&, const SubPath&) = default;
};

struct RouteDefinition {
  std::string id;
  std::string way_id;
  Polyline geometry;
  std::vector<Poi> pois;
  std::vector<SubPath> subpaths;
  RouteStatus status = RouteStatus::Draft;
  int version = 1;

  double length() const { return geometry.length(); }
  const Poi* find_poi(std::string_view poi_id) const;
  Poi* find_poi(std::string_view poi_id);

  /// Recomputes POI along-track positions, re-sorts POIs by them, and rescales
  /// sub-path bounds when the geometry length changed.
  void reindex();

  friend bool operator==(const RouteDefinition&, const RouteDefinition&) = default;
};

struct Violation {
  std::string code;
  std::string subject;  // POI id, sub-path index, or empty for route-level
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
};

/// Lists every broken route invariant. Never throws.
ValidationReport validate_route(const RouteDefinition& def);

/// Confirmed Landmark POIs in along-track order. Throws Validation on an invalid route.
std::vector<Poi> decision_points(const RouteDefinition& def);

/// The sub-path containing along_m. Throws ContractViolation when out of range
/// or when the route carries no sub-paths.
const SubPath& subpath_at(const RouteDefinition& def, double along_m);
std::size_t subpath_index_at(const RouteDefinition& def, double along_m);

/// Single Actionable sub-path over the whole route.
void install_default_subpath(RouteDefinition& def);
void split_subpath(RouteDefinition& def, double at_m);
/// Merges sub-path `index` with its successor; the left mode wins.
void merge_subpaths(RouteDefinition& def, std::size_t index);
void set_subpath_mode(RouteDefinition& def, std::size_t index, SupportMode mode);

/// The POI guidance card shown to the trainee. Preview and live training both
/// render from this payload.
nlohmann::json guidance_payload(const Poi& poi);

// Canonical route file.
nlohmann::json to_json(const RouteDefinition& def);
RouteDefinition route_from_json(const nlohmann::json& j);
nlohmann::json poi_to_json(const Poi& poi);
Poi poi_from_json(const nlohmann::json& j);

/// Serialization used for byte comparisons and persistence.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace waytrain
