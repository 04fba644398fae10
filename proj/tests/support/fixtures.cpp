#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace wt_test {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kR = 6'371'000.0;

double rad(double deg) { return deg * kPi / 180.0; }

std::array<double, 3> unit_vector(GeoPoint p) {
  return {std::cos(rad(p.lat)) * std::cos(rad(p.lon)), std::cos(rad(p.lat)) * std::sin(rad(p.lon)),
          std::sin(rad(p.lat))};
}

double along_of(const TrainingEvent& e, const RouteDefinition& route) {
  switch (e.type) {
    case EventType::VicinityAlert:
      return route.find_poi(e.payload.at("poi_id").get<std::string>())->along_m;
    case EventType::OffTrackBegin:
    case EventType::OffTrackEnd:
      return e.payload.at("start_along_m").get<double>();
    default:
      return e.payload.at("along_m").get<double>();
  }
}

std::size_t subpath_of(const RouteDefinition& route, double along) {
  along = std::max(0.0, std::min(along, route.length()));
  for (std::size_t i = 0; i < route.subpaths.size(); ++i) {
    const bool last = i + 1 == route.subpaths.size();
    if (along >= route.subpaths[i].start_m && (along < route.subpaths[i].end_m || last)) return i;
  }
  throw std::logic_error("no sub-path");
}

IndicatorCounters count(const SessionRecord& record, double window, const std::function<bool(double)>& keep) {
  const RouteDefinition& route = record.route;
  IndicatorCounters c;
  std::vector<const Poi*> entered;
  for (const auto& e : record.events) {
    const bool mine = e.type == EventType::SessionStart || e.type == EventType::SessionEnd ||
                      keep(along_of(e, route));
    if (!mine) continue;
    if (e.type == EventType::VicinityAlert) {
      ++c.E;
      const Poi* poi = route.find_poi(e.payload.at("poi_id").get<std::string>());
      if (poi->kind == PoiKind::Landmark) {
        ++c.D;
        entered.push_back(poi);
      }
    }
    if (e.type == EventType::AssistLogged || e.type == EventType::ARActivated) ++c.A;
    if (e.type == EventType::Instruction && e.payload.value("fallback", false)) ++c.A;
    if (e.type == EventType::OffTrackBegin) ++c.O;
    if (e.type == EventType::OffTrackEnd && e.payload.at("how") == "self") ++c.Rs;
    if (e.type == EventType::UnexpectedReport) ++c.U;
  }
  for (const Poi* lm : entered) {
    bool bad = false;
    for (const auto& e : record.events) {
      if (e.type == EventType::OffTrackBegin && e.payload.at("attributed_poi") == lm->id) bad = true;
      if (e.type == EventType::QuizAnswer && e.payload.at("poi_id") == lm->id && !e.payload.at("correct").get<bool>()) {
        bad = true;
      }
      if (e.type == EventType::AssistLogged || e.type == EventType::ARActivated) {
        const double a = e.payload.at("along_m").get<double>();
        if (a >= lm->along_m - lm->geofence_radius_m && a <= lm->along_m + window) bad = true;
      }
    }
    if (!bad) ++c.C;
  }
  return c;
}

}  // namespace

RouteDefinition make_route(const std::vector<GeoPoint>& vertices, const std::vector<PoiSpec>& pois,
                           const std::vector<SupportMode>& modes, const std::string& id) {
  RouteDefinition r{id, "w1", Polyline(vertices), {}, {}, RouteStatus::Working, 1};
  int n = 0;
  for (const auto& spec : pois) {
    ++n;
    Poi poi;
    poi.id = id + "-p" + std::to_string(n);
    poi.coordinate = beside(r.geometry, spec.along_m, spec.lateral_m);
    poi.captured_ts = kT0 - 100'000 + n;
    poi.kind = spec.kind;
    poi.photos = {id + "-photo-" + std::to_string(n)};
    poi.instruction = spec.kind == PoiKind::Landmark ? Instruction{"Turn at the bakery", "turn-left", ""}
                                                     : Instruction{"Keep going", "straight", ""};
    poi.status = PoiStatus::Confirmed;
    r.pois.push_back(poi);
  }
  r.reindex();
  install_default_subpath(r);
  for (std::size_t i = 1; i < modes.size(); ++i) {
    split_subpath(r, r.length() * static_cast<double>(i) / static_cast<double>(modes.size()));
  }
  for (std::size_t i = 0; i < modes.size(); ++i) set_subpath_mode(r, i, modes[i]);
  const auto report = validate_route(r);
  if (!report.ok()) throw std::logic_error("fixture route invalid: " + report.violations.front().code);
  return r;
}

std::vector<GeoPoint> l_shape() {
  const GeoPoint a{52.0, 8.5};
  const GeoPoint b = destination_point(a, 90.0, 600.0);
  const GeoPoint c = destination_point(b, 0.0, 600.0);
  return {a, b, c};
}

std::vector<GeoPoint> straight_east(double length_m) {
  const GeoPoint a{52.0, 8.5};
  return {a, destination_point(a, 90.0, length_m)};
}

GeoPoint beside(const Polyline& line, double along_m, double lateral_m) {
  const GeoPoint base = line.point_at(along_m);
  if (lateral_m == 0.0) return base;
  const double bearing = line.segment_bearing(line.segment_at(along_m));
  return lateral_m > 0 ? destination_point(base, bearing + 90.0, lateral_m)
                       : destination_point(base, bearing - 90.0, -lateral_m);
}

std::vector<GpsFix> walk_fixes(const Polyline& line, double from_m, double to_m, double step_m, TimestampMs t0,
                               double lateral_m) {
  std::vector<GpsFix> out;
  int i = 0;
  for (double s = from_m; s <= to_m + 1e-9; s += step_m, ++i) {
    out.push_back({beside(line, s, lateral_m), t0 + i * 1000, std::nullopt});
  }
  return out;
}

std::string fresh_consent(ConsentLedger& ledger, TimestampMs ts, const std::string& user) {
  return ledger.grant(user, ConsentScope::TrainingTelemetry, "We record your position and answers during practice.", ts)
      .id();
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("waytrain-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<const TrainingEvent*> of_type(const std::vector<TrainingEvent>& events, EventType type) {
  std::vector<const TrainingEvent*> out;
  for (const auto& e : events) {
    if (e.type == type) out.push_back(&e);
  }
  return out;
}

std::size_t count_type(const std::vector<TrainingEvent>& events, EventType type) { return of_type(events, type).size(); }

double vector_distance(GeoPoint a, GeoPoint b) {
  const auto u = unit_vector(a);
  const auto v = unit_vector(b);
  const std::array<double, 3> cross{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double sin_angle = std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
  const double cos_angle = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return std::atan2(sin_angle, cos_angle) * kR;
}

double cosine_law_distance(GeoPoint a, GeoPoint b) {
  const double c = std::sin(rad(a.lat)) * std::sin(rad(b.lat)) +
                   std::cos(rad(a.lat)) * std::cos(rad(b.lat)) * std::cos(rad(b.lon - a.lon));
  return std::acos(std::max(-1.0, std::min(1.0, c))) * kR;
}

double meters_per_degree_lat() { return kR * kPi / 180.0; }

GeoPoint offset_by_meters(GeoPoint p, double east_m, double north_m) {
  const double per_lat = meters_per_degree_lat();
  const double per_lon = per_lat * std::cos(rad(p.lat));
  return {p.lat + north_m / per_lat, p.lon + east_m / per_lon};
}

std::pair<double, double> brute_force_projection(GeoPoint p, const Polyline& line, double lo, double hi,
                                                 int samples_per_segment) {
  const auto& v = line.vertices();
  const auto& cum = line.cumulative();
  double best_d = std::numeric_limits<double>::infinity();
  double best_a = lo;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    for (int k = 0; k <= samples_per_segment; ++k) {
      const double t = static_cast<double>(k) / samples_per_segment;
      const double along = cum[i] + t * (cum[i + 1] - cum[i]);
      if (along < lo || along > hi) continue;
      const GeoPoint q{v[i].lat + t * (v[i + 1].lat - v[i].lat), v[i].lon + t * (v[i + 1].lon - v[i].lon)};
      const double d = vector_distance(p, q);
      if (d < best_d) {
        best_d = d;
        best_a = along;
      }
    }
  }
  return {best_a, best_d};
}

IndicatorCounters brute_force_counters(const SessionRecord& record, double mistake_window_m) {
  IndicatorCounters c = count(record, mistake_window_m, [](double) { return true; });
  c.L_km = record.route.length() / 1000.0;
  return c;
}

IndicatorCounters brute_force_subpath_counters(const SessionRecord& record, std::size_t index,
                                               double mistake_window_m) {
  IndicatorCounters c =
      count(record, mistake_window_m, [&](double a) { return subpath_of(record.route, a) == index; });
  c.L_km = record.route.subpaths[index].length() / 1000.0;
  return c;
}

SessionRecord empty_record(std::string session_id, const RouteDefinition& route) {
  return {std::move(session_id), route, {}, {}, 0, 0, std::nullopt, {}, {}};
}

SessionRecord random_event_log(const RouteDefinition& route, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto chance = [&](double p) { return unit(rng) < p; };

  SessionRecord rec = empty_record("rand-" + std::to_string(seed), route);
  rec.consent_id = "consent-x";
  rec.started_ts = kT0;
  TimestampMs ts = kT0;
  auto push = [&](EventType type, nlohmann::json payload) {
    rec.events.push_back({ts, rec.session_id, rec.events.size() + 1, type, std::move(payload)});
    ts += 1 + static_cast<TimestampMs>(unit(rng) * 5000);
  };
  push(EventType::SessionStart, {{"along_m", 0.0}});

  bool open = false;
  double open_start = 0.0;
  std::vector<const Poi*> visited;
  double along = 0.0;
  for (const auto& poi : route.pois) {
    // Filler between POIs.
    const int extras = static_cast<int>(unit(rng) * 4);
    for (int k = 0; k < extras; ++k) {
      along = std::min(route.length(), along + unit(rng) * std::max(1.0, poi.along_m - along));
      const double r = unit(rng);
      if (r < 0.2) {
        push(EventType::AssistLogged, {{"along_m", along}, {"source", "InPersonTrainer"}});
        if (open) {
          push(EventType::OffTrackEnd, {{"along_m", along}, {"how", "assisted"}, {"start_along_m", open_start}});
          open = false;
        }
      } else if (r < 0.3) {
        push(EventType::ARActivated, {{"along_m", along}});
      } else if (r < 0.45) {
        push(EventType::UnexpectedReport, {{"along_m", along}, {"kind", "RoadBlocked"}});
        push(EventType::RecoveryPrompt, {{"along_m", along}});
      } else if (r < 0.75 && !open) {
        nlohmann::json attributed = nullptr;
        if (!visited.empty() && chance(0.6)) attributed = visited[static_cast<std::size_t>(unit(rng) * visited.size())]->id;
        push(EventType::OffTrackBegin, {{"along_m", along}, {"start_along_m", along}, {"attributed_poi", attributed}});
        open = true;
        open_start = along;
      } else if (open) {
        push(EventType::OffTrackEnd,
             {{"along_m", along}, {"how", chance(0.7) ? "self" : "assisted"}, {"start_along_m", open_start}});
        open = false;
      } else {
        push(EventType::HelpRequest, {{"along_m", along}});
      }
    }
    along = std::max(along, poi.along_m);
    if (!chance(0.85)) continue;
    push(EventType::VicinityAlert, {{"along_m", poi.along_m - poi.geofence_radius_m * unit(rng)},
                                    {"poi_id", poi.id},
                                    {"kind", to_string(poi.kind)},
                                    {"poi_along_m", poi.along_m},
                                    {"radius_m", poi.geofence_radius_m}});
    if (poi.kind == PoiKind::Landmark) {
      visited.push_back(&poi);
      if (chance(0.4)) {
        const bool correct = chance(0.6);
        push(EventType::QuizAnswer, {{"along_m", poi.along_m}, {"poi_id", poi.id}, {"correct", correct}});
        if (!correct && chance(0.7)) push(EventType::Instruction, {{"along_m", poi.along_m}, {"poi_id", poi.id}, {"fallback", true}});
      } else {
        push(EventType::Instruction, {{"along_m", poi.along_m}, {"poi_id", poi.id}, {"fallback", false}});
      }
    } else {
      push(EventType::Reassurance, {{"along_m", poi.along_m}, {"poi_id", poi.id}});
    }
  }
  bool ended_off = false;
  if (open) {
    if (chance(0.5)) {
      push(EventType::OffTrackEnd, {{"along_m", along}, {"how", "self"}, {"start_along_m", open_start}});
    } else {
      ended_off = true;
    }
  }
  if (chance(0.7)) rec.confidence = 1 + static_cast<int>(unit(rng) * 5);
  push(EventType::SessionEnd, {{"along_m", along}, {"ended_off_track", ended_off},
                               {"confidence", rec.confidence ? nlohmann::json(*rec.confidence) : nlohmann::json(nullptr)}});
  rec.ended_ts = rec.events.back().ts_ms;
  return rec;
}

DesignedRoute design_through_service(Service& service, const std::string& way_id, const std::string& tag,
                                     TimestampMs t0) {
  const Polyline line(l_shape());
  if (!service.store().exists(EntityKind::Way, way_id)) {
    service.create_way({way_id, "Home", line.vertices().front(), "Workshop", line.vertices().back(), "trainer", ""});
  }
  const std::string erw_id = "erw-" + tag;
  const std::string video_id = "vid-" + tag;
  service.put_media({video_id, std::string(64 * 1024, 'V') + tag}, ItemKind::VideoAsset);
  const std::vector<std::string> photos{"ph-" + tag + "-1", "ph-" + tag + "-2", "ph-" + tag + "-3"};
  for (const auto& p : photos) service.put_media({p, "jpeg:" + p}, ItemKind::PoiPhoto);

  service.erw_start(way_id, erw_id, t0, video_id);
  const auto fixes = walk_fixes(line, 0.0, 1200.0, 4.0, t0 + 1000);
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    service.erw_fix(erw_id, fixes[i]);
    if (i == 50) service.erw_poi(erw_id, fixes[i], {photos[0]}, "green door", CaptureRole::Trainer);
    if (i == 150) service.erw_poi(erw_id, fixes[i], {photos[1]}, "corner bakery", CaptureRole::User);
    if (i == 250) service.erw_poi(erw_id, fixes[i], {photos[2]}, "bus stop", CaptureRole::Trainer);
  }
  const auto finished = service.erw_finish(erw_id);
  const std::string route_id = finished.draft.id;
  const std::string p1 = erw_id + "-poi-1", p2 = erw_id + "-poi-2", p3 = erw_id + "-poi-3";
  service.apply_edits(route_id, {PromoteCandidate{p1, PoiKind::Reassurance}, PromoteCandidate{p2, PoiKind::Landmark},
                                 PromoteCandidate{p3, PoiKind::Landmark},
                                 EditInstruction{p2, {"Turn left at the bakery", "turn-left", ""}},
                                 EditInstruction{p3, {"Wait at the bus stop", "stop", ""}}});
  const auto start = service.start_negotiation(route_id, "neg-" + tag);
  TimestampMs ts = fixes.back().ts_ms + 60'000;
  auto step = [&](NegotiationActionType t) { service.negotiation_step(start.session.id, {t, ""}, ++ts); };
  step(NegotiationActionType::Confirm);
  step(NegotiationActionType::Next);
  step(NegotiationActionType::ApproveInstruction);
  step(NegotiationActionType::Confirm);
  step(NegotiationActionType::Next);
  step(NegotiationActionType::ApproveInstruction);
  step(NegotiationActionType::Confirm);
  return {erw_id, video_id, service.finalize_negotiation(start.session.id, ++ts)};
}

}  // namespace wt_test
