#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "waytrain/engine.hpp"
#include "waytrain/indicators.hpp"
#include "waytrain/route.hpp"
#include "waytrain/service.hpp"
#include "waytrain/sim.hpp"

namespace wt_test {

using namespace waytrain;

inline constexpr TimestampMs kT0 = 1'750'000'000'000;

struct PoiSpec {
  double along_m;
  PoiKind kind;
  double lateral_m = 0.0;
};

/// Working route along the given vertices with confirmed POIs at the
/// requested along-track positions and one sub-path per entry of `modes`
/// (equal lengths).
RouteDefinition make_route(const std::vector<GeoPoint>& vertices, const std::vector<PoiSpec>& pois,
                           const std::vector<SupportMode>& modes = {SupportMode::Actionable},
                           const std::string& id = "r1");

/// East 600 m, then north 600 m, starting at 52.0 N 8.5 E.
std::vector<GeoPoint> l_shape();
/// Straight east line of the given length.
std::vector<GeoPoint> straight_east(double length_m);

/// Point `lateral_m` to the right of the route at along_m.
GeoPoint beside(const Polyline& line, double along_m, double lateral_m);

/// Fixes every `step_m` along the route between two along positions, 1 s apart.
std::vector<GpsFix> walk_fixes(const Polyline& line, double from_m, double to_m, double step_m, TimestampMs t0,
                               double lateral_m = 0.0);

/// Grants a fresh training consent in `ledger` and returns its id.
std::string fresh_consent(ConsentLedger& ledger, TimestampMs ts = kT0, const std::string& user = "trainee");

/// Unique empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::vector<const TrainingEvent*> of_type(const std::vector<TrainingEvent>& events, EventType type);
std::size_t count_type(const std::vector<TrainingEvent>& events, EventType type);

struct DesignedRoute {
  std::string erw_id;
  std::string video_id;
  RouteDefinition working;
};

/// Records a walk of the L-shape through the service (video plus three photo
/// captures), classifies the candidates and negotiates them into a Working
/// route. Creates the way when missing.
DesignedRoute design_through_service(Service& service, const std::string& way_id, const std::string& tag,
                                     TimestampMs t0 = kT0);

// ---------------------------------------------------------------------------
// Independent oracles

/// Great-circle distance from the angle between 3D unit vectors.
double vector_distance(GeoPoint a, GeoPoint b);
/// Spherical law of cosines.
double cosine_law_distance(GeoPoint a, GeoPoint b);
/// Meters per degree of latitude on the reference sphere.
double meters_per_degree_lat();
/// Offset by (east, north) meters using the per-degree scale.
GeoPoint offset_by_meters(GeoPoint p, double east_m, double north_m);

/// Nearest point over densely sampled segments whose along-track lies in
/// [lo, hi]. Returns {along, distance}.
std::pair<double, double> brute_force_projection(GeoPoint p, const Polyline& line, double lo, double hi,
                                                 int samples_per_segment = 4000);

/// Naive event-log counter mirroring the published indicator definitions.
IndicatorCounters brute_force_counters(const SessionRecord& record, double mistake_window_m = 50.0);
/// Same, restricted to the events attributed to sub-path `index`.
IndicatorCounters brute_force_subpath_counters(const SessionRecord& record, std::size_t index,
                                               double mistake_window_m = 50.0);

/// Record with no events or fixes.
SessionRecord empty_record(std::string session_id, const RouteDefinition& route);

/// Random well-formed event log over `route` (paired episodes, ordered seq/ts).
SessionRecord random_event_log(const RouteDefinition& route, std::uint64_t seed);

}  // namespace wt_test
