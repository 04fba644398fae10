#include "waytrain/design.hpp"

#include <algorithm>
#include <set>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

constexpr double kPlaybackWindowM = 100.0;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Poi& poi_or_throw(RouteDefinition& route, const std::string& poi_id) {
  Poi* poi = route.find_poi(poi_id);
  if (poi == nullptr) fail(ErrorCode::NotFound, "POI '" + poi_id + "' not in route " + route.id);
  return *poi;
}

bool is_subpath_edit(const RouteEdit& edit) {
  return std::holds_alternative<SplitSubpath>(edit) || std::holds_alternative<MergeSubpaths>(edit) ||
         std::holds_alternative<SetSubpathMode>(edit);
}

std::set<std::pair<std::string, std::string>> violation_keys(const RouteDefinition& route) {
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& v : validate_route(route).violations) keys.emplace(v.code, v.subject);
  return keys;
}

GeoPoint point_from_json(const nlohmann::json& j) { return {j.at("lat").get<double>(), j.at("lon").get<double>()}; }

}  // namespace

RouteDefinition draft_route_from_walk(std::string route_id, const FinishedWalk& walk) {
  RouteDefinition def{.id = std::move(route_id),
                      .way_id = walk.session.way_id,
                      .geometry = walk.path,
                      .pois = walk.session.candidate_pois,
                      .subpaths = {}};
  def.status = RouteStatus::Draft;
  def.version = 1;
  def.reindex();
  return def;
}

// ---------------------------------------------------------------------------

PlaybackIndex::PlaybackIndex(const ErwSession& walk, Polyline path) : path_(std::move(path)) {
  require(walk.state == ErwState::Finished, ErrorCode::State, "playback needs a finished walk");
  require(!walk.fixes.empty(), ErrorCode::InsufficientData, "walk has no fixes");
  start_ts_ = walk.started_ts;
  end_ts_ = walk.ended_ts.value_or(walk.fixes.back().ts_ms);

  double prev = 0.0;
  for (const auto& fix : walk.fixes) {
    const auto pos = project_onto_polyline(fix.point, path_, {prev - kPlaybackWindowM, prev + kPlaybackWindowM});
    fix_ts_.push_back(fix.ts_ms);
    fix_pos_.push_back(pos);
    prev = pos.along_track;
  }

  double last_along = -1.0;
  for (const auto& poi : walk.candidate_pois) {
    PlaybackMarker m{poi.id, poi.captured_ts, along_at(poi.captured_ts), false};
    m.inverted = m.along_m < last_along;
    last_along = std::max(last_along, m.along_m);
    markers_.push_back(std::move(m));
  }
}

double PlaybackIndex::along_at(TimestampMs ts) const {
  if (ts <= fix_ts_.front()) return fix_pos_.front().along_track;
  if (ts >= fix_ts_.back()) return fix_pos_.back().along_track;
  const auto it = std::upper_bound(fix_ts_.begin(), fix_ts_.end(), ts);
  const auto hi = static_cast<std::size_t>(std::distance(fix_ts_.begin(), it));
  const std::size_t lo = hi - 1;
  const double t = static_cast<double>(ts - fix_ts_[lo]) / static_cast<double>(fix_ts_[hi] - fix_ts_[lo]);
  return fix_pos_[lo].along_track + t * (fix_pos_[hi].along_track - fix_pos_[lo].along_track);
}

PlaybackSample PlaybackIndex::at(TimestampMs ts) const {
  require(ts >= start_ts_ && ts <= end_ts_, ErrorCode::Range,
          "timestamp " + std::to_string(ts) + " outside the walk");
  PlaybackSample sample;
  if (ts <= fix_ts_.front()) {
    sample.position = fix_pos_.front();
    sample.nearest_fix = 0;
    return sample;
  }
  if (ts >= fix_ts_.back()) {
    sample.position = fix_pos_.back();
    sample.nearest_fix = fix_ts_.size() - 1;
    return sample;
  }
  const auto it = std::upper_bound(fix_ts_.begin(), fix_ts_.end(), ts);
  const auto hi = static_cast<std::size_t>(std::distance(fix_ts_.begin(), it));
  const std::size_t lo = hi - 1;
  const double t = static_cast<double>(ts - fix_ts_[lo]) / static_cast<double>(fix_ts_[hi] - fix_ts_[lo]);
  const double along = fix_pos_[lo].along_track + t * (fix_pos_[hi].along_track - fix_pos_[lo].along_track);
  const double cross = fix_pos_[lo].cross_track + t * (fix_pos_[hi].cross_track - fix_pos_[lo].cross_track);
  sample.position = {path_.segment_at(along), along, cross};
  sample.nearest_fix = (ts - fix_ts_[lo] <= fix_ts_[hi] - ts) ? lo : hi;
  return sample;
}

const PlaybackMarker& PlaybackIndex::jump_to(const std::string& poi_id) const {
  const auto it = std::find_if(markers_.begin(), markers_.end(), [&](const auto& m) { return m.poi_id == poi_id; });
  if (it == markers_.end()) fail(ErrorCode::NotFound, "no marker for POI '" + poi_id + "'");
  return *it;
}

PlaybackIndex build_playback_index(const ErwSession& walk, const Polyline& path) { return PlaybackIndex(walk, path); }

// ---------------------------------------------------------------------------

RouteEdit edit_from_json(const nlohmann::json& j) {
  const std::string op = j.at("op").get<std::string>();
  if (op == "AddPoi") return AddPoi{poi_from_json(j.at("poi"))};
  if (op == "RemovePoi") return RemovePoi{j.at("poi_id").get<std::string>()};
  if (op == "EditPoi") {
    EditPoi e;
    e.poi_id = j.at("poi_id").get<std::string>();
    if (j.contains("lat") || j.contains("lon")) e.coordinate = point_from_json(j);
    if (j.contains("radius_m")) e.radius_m = j.at("radius_m").get<double>();
    if (j.contains("notes")) e.notes = j.at("notes").get<std::string>();
    e.add_photos = j.value("add_photos", std::vector<std::string>{});
    e.remove_photos = j.value("remove_photos", std::vector<std::string>{});
    return e;
  }
  if (op == "EditInstruction") {
    return EditInstruction{j.at("poi_id").get<std::string>(),
                           {j.value("instruction", ""), j.value("symbol", ""), j.value("audio", "")}};
  }
  if (op == "MovePathVertex") return MovePathVertex{j.at("index").get<std::size_t>(), point_from_json(j.at("to"))};
  if (op == "PromoteCandidate") {
    return PromoteCandidate{j.at("poi_id").get<std::string>(), parse_poi_kind(j.at("kind").get<std::string>())};
  }
  if (op == "SplitSubpath") return SplitSubpath{j.at("at_m").get<double>()};
  if (op == "MergeSubpaths") return MergeSubpaths{j.at("index").get<std::size_t>()};
  if (op == "SetSubpathMode") {
    return SetSubpathMode{j.at("index").get<std::size_t>(), parse_support_mode(j.at("mode").get<std::string>())};
  }
  fail(ErrorCode::Input, "unknown edit op '" + op + "'");
}

nlohmann::json to_json(const RouteEdit& edit) {
  return std::visit(
      Overloaded{
          [](const AddPoi& e) { return nlohmann::json{{"op", "AddPoi"}, {"poi", poi_to_json(e.poi)}}; },
          [](const RemovePoi& e) { return nlohmann::json{{"op", "RemovePoi"}, {"poi_id", e.poi_id}}; },
          [](const EditPoi& e) {
            nlohmann::json j{{"op", "EditPoi"}, {"poi_id", e.poi_id}};
            if (e.coordinate) {
              j["lat"] = e.coordinate->lat;
              j["lon"] = e.coordinate->lon;
            }
            if (e.radius_m) j["radius_m"] = *e.radius_m;
            if (e.notes) j["notes"] = *e.notes;
            if (!e.add_photos.empty()) j["add_photos"] = e.add_photos;
            if (!e.remove_photos.empty()) j["remove_photos"] = e.remove_photos;
            return j;
          },
          [](const EditInstruction& e) {
            return nlohmann::json{{"op", "EditInstruction"},
                                  {"poi_id", e.poi_id},
                                  {"instruction", e.instruction.text},
                                  {"symbol", e.instruction.symbol},
                                  {"audio", e.instruction.audio_asset}};
          },
          [](const MovePathVertex& e) {
            return nlohmann::json{{"op", "MovePathVertex"}, {"index", e.index}, {"to", {{"lat", e.to.lat}, {"lon", e.to.lon}}}};
          },
          [](const PromoteCandidate& e) {
            return nlohmann::json{{"op", "PromoteCandidate"}, {"poi_id", e.poi_id}, {"kind", to_string(e.kind)}};
          },
          [](const SplitSubpath& e) { return nlohmann::json{{"op", "SplitSubpath"}, {"at_m", e.at_m}}; },
          [](const MergeSubpaths& e) { return nlohmann::json{{"op", "MergeSubpaths"}, {"index", e.index}}; },
          [](const SetSubpathMode& e) {
            return nlohmann::json{{"op", "SetSubpathMode"}, {"index", e.index}, {"mode", to_string(e.mode)}};
          },
      },
      edit);
}

RouteDefinition apply_edit(const RouteDefinition& route, const RouteEdit& edit) {
  if (route.status == RouteStatus::Working && !is_subpath_edit(edit)) {
    fail(ErrorCode::State, "route " + route.id + " is Working; reopen it to edit content");
  }
  RouteDefinition next = route;
  std::visit(
      Overloaded{
          [&](const AddPoi& e) {
            Poi poi = e.poi;
            poi.status = PoiStatus::Pending;
            check_valid(poi.coordinate);
            next.pois.push_back(std::move(poi));
          },
          [&](const RemovePoi& e) {
            poi_or_throw(next, e.poi_id);
            std::erase_if(next.pois, [&](const Poi& p) { return p.id == e.poi_id; });
          },
          [&](const EditPoi& e) {
            Poi& poi = poi_or_throw(next, e.poi_id);
            if (e.coordinate) {
              check_valid(*e.coordinate);
              poi.coordinate = *e.coordinate;
            }
            if (e.radius_m) poi.geofence_radius_m = *e.radius_m;
            if (e.notes) poi.notes = *e.notes;
            for (const auto& photo : e.remove_photos) {
              require(std::find(poi.photos.begin(), poi.photos.end(), photo) != poi.photos.end(),
                      ErrorCode::NotFound, "photo '" + photo + "' not on POI " + poi.id);
              std::erase(poi.photos, photo);
            }
            for (const auto& photo : e.add_photos) {
              if (std::find(poi.photos.begin(), poi.photos.end(), photo) == poi.photos.end()) poi.photos.push_back(photo);
            }
          },
          [&](const EditInstruction& e) { poi_or_throw(next, e.poi_id).instruction = e.instruction; },
          [&](const MovePathVertex& e) {
            auto verts = next.geometry.vertices();
            require(e.index < verts.size(), ErrorCode::NotFound, "no path vertex " + std::to_string(e.index));
            verts[e.index] = e.to;
            next.geometry = Polyline(std::move(verts));
          },
          [&](const PromoteCandidate& e) {
            require(e.kind != PoiKind::Candidate, ErrorCode::Precondition, "promotion needs Landmark or Reassurance");
            Poi& poi = poi_or_throw(next, e.poi_id);
            require(poi.status == PoiStatus::Pending, ErrorCode::Precondition, "only pending POIs can be re-classified");
            poi.kind = e.kind;
          },
          [&](const SplitSubpath& e) {
            if (next.subpaths.empty()) install_default_subpath(next);
            split_subpath(next, e.at_m);
          },
          [&](const MergeSubpaths& e) { merge_subpaths(next, e.index); },
          [&](const SetSubpathMode& e) {
            if (next.subpaths.empty()) install_default_subpath(next);
            set_subpath_mode(next, e.index, e.mode);
          },
      },
      edit);

  next.reindex();
  const auto before = violation_keys(route);
  for (const auto& v : validate_route(next).violations) {
    if (!before.contains({v.code, v.subject})) {
      fail(ErrorCode::Validation, "edit rejected: " + v.code + (v.subject.empty() ? "" : " (" + v.subject + ")"));
    }
  }
  next.version = route.version + 1;
  return next;
}

// ---------------------------------------------------------------------------

std::string_view to_string(NegotiationActionType t) {
  switch (t) {
    case NegotiationActionType::Next: return "Next";
    case NegotiationActionType::Prev: return "Prev";
    case NegotiationActionType::Confirm: return "Confirm";
    case NegotiationActionType::Reject: return "Reject";
    case NegotiationActionType::SelectPhoto: return "SelectPhoto";
    case NegotiationActionType::ApproveInstruction: return "ApproveInstruction";
    case NegotiationActionType::FlagPhoto: return "FlagPhoto";
    case NegotiationActionType::Annotate: return "Annotate";
  }
  return "?";
}

NegotiationActionType parse_negotiation_action(std::string_view s) {
  for (auto t : {NegotiationActionType::Next, NegotiationActionType::Prev, NegotiationActionType::Confirm,
                 NegotiationActionType::Reject, NegotiationActionType::SelectPhoto,
                 NegotiationActionType::ApproveInstruction, NegotiationActionType::FlagPhoto,
                 NegotiationActionType::Annotate}) {
    if (to_string(t) == s) return t;
  }
  fail(ErrorCode::Input, "unknown negotiation action '" + std::string(s) + "'");
}

nlohmann::json to_json(const FeedbackRecord& r) {
  return {{"ts_ms", r.ts_ms}, {"neg_id", r.neg_id}, {"poi_id", r.poi_id}, {"action", r.action}, {"detail", r.detail}};
}

FeedbackRecord feedback_from_json(const nlohmann::json& j) {
  return {j.at("ts_ms").get<TimestampMs>(), j.value("neg_id", ""), j.value("poi_id", ""),
          j.at("action").get<std::string>(), j.value("detail", "")};
}

nlohmann::json to_json(const NegotiationSession& n) {
  nlohmann::json reviews = nlohmann::json::object();
  for (const auto& [id, r] : n.reviews) {
    reviews[id] = {{"decision", to_string(r.decision)},
                   {"primary_photo", r.primary_photo},
                   {"approved_instruction",
                    r.approved_instruction ? nlohmann::json(*r.approved_instruction) : nlohmann::json(nullptr)},
                   {"flagged_photos", r.flagged_photos},
                   {"annotations", r.annotations}};
  }
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& r : n.transcript) transcript.push_back(to_json(r));
  return {{"id", n.id},           {"route_id", n.route_id},       {"cursor", n.cursor},
          {"reviews", reviews}, {"transcript", transcript}, {"finalized", n.finalized}};
}

NegotiationSession negotiation_from_json(const nlohmann::json& j) {
  NegotiationSession n;
  n.id = j.at("id").get<std::string>();
  n.route_id = j.at("route_id").get<std::string>();
  n.cursor = j.at("cursor").get<std::size_t>();
  for (const auto& [id, jr] : j.at("reviews").items()) {
    PoiReview r;
    r.decision = parse_poi_status(jr.at("decision").get<std::string>());
    r.primary_photo = jr.value("primary_photo", "");
    if (!jr.at("approved_instruction").is_null()) r.approved_instruction = jr.at("approved_instruction").get<std::string>();
    r.flagged_photos = jr.value("flagged_photos", std::vector<std::string>{});
    r.annotations = jr.value("annotations", std::vector<std::string>{});
    n.reviews.emplace(id, std::move(r));
  }
  for (const auto& jr : j.at("transcript")) n.transcript.push_back(feedback_from_json(jr));
  n.finalized = j.value("finalized", false);
  return n;
}

NegotiationStart start_negotiation(const RouteDefinition& draft, std::string neg_id) {
  require(draft.status == RouteStatus::Draft, ErrorCode::State,
          "negotiation starts from a Draft route, not " + std::string(to_string(draft.status)));
  require(!draft.pois.empty(), ErrorCode::Precondition, "route has no POIs to negotiate");
  NegotiationStart out{draft, {}};
  out.route.status = RouteStatus::UnderNegotiation;
  out.route.version = draft.version + 1;
  out.session.id = std::move(neg_id);
  out.session.route_id = draft.id;
  for (const auto& poi : draft.pois) out.session.reviews.emplace(poi.id, PoiReview{});
  return out;
}

NegotiationStep negotiation_step(const NegotiationSession& neg, const RouteDefinition& route,
                                 const NegotiationAction& action, TimestampMs ts) {
  require(!neg.finalized, ErrorCode::State, "negotiation " + neg.id + " is finalized");
  require(route.id == neg.route_id, ErrorCode::Input, "route does not belong to this negotiation");
  require(route.status == RouteStatus::UnderNegotiation, ErrorCode::State, "route is not under negotiation");
  require(!route.pois.empty(), ErrorCode::Precondition, "route has no POIs");

  NegotiationStep out{neg, {ts, neg.id, "", std::string(to_string(action.type)), action.argument}};
  NegotiationSession& n = out.session;
  n.cursor = std::min(n.cursor, route.pois.size() - 1);
  const Poi& poi = route.pois[n.cursor];
  PoiReview& review = n.reviews[poi.id];
  auto has_photo = [&](const std::string& asset) {
    return std::find(poi.photos.begin(), poi.photos.end(), asset) != poi.photos.end();
  };

  switch (action.type) {
    case NegotiationActionType::Next:
      n.cursor = std::min(n.cursor + 1, route.pois.size() - 1);
      break;
    case NegotiationActionType::Prev:
      n.cursor = n.cursor == 0 ? 0 : n.cursor - 1;
      break;
    case NegotiationActionType::Confirm: {
      require(poi.kind != PoiKind::Candidate, ErrorCode::Precondition,
              "POI " + poi.id + " must be classified as Landmark or Reassurance first");
      if (review.primary_photo.empty()) {
        std::vector<std::string> usable;
        for (const auto& p : poi.photos) {
          if (std::find(review.flagged_photos.begin(), review.flagged_photos.end(), p) == review.flagged_photos.end()) {
            usable.push_back(p);
          }
        }
        require(usable.size() == 1, ErrorCode::Precondition, "select a primary photo for POI " + poi.id);
        review.primary_photo = usable.front();
      }
      if (poi.kind == PoiKind::Landmark) {
        require(review.approved_instruction.has_value() && *review.approved_instruction == poi.instruction.text,
                ErrorCode::Precondition, "landmark " + poi.id + " needs an approved instruction");
      }
      review.decision = PoiStatus::Confirmed;
      break;
    }
    case NegotiationActionType::Reject:
      review.decision = PoiStatus::Rejected;
      break;
    case NegotiationActionType::SelectPhoto:
      require(has_photo(action.argument), ErrorCode::NotFound, "photo '" + action.argument + "' not on POI " + poi.id);
      require(std::find(review.flagged_photos.begin(), review.flagged_photos.end(), action.argument) ==
                  review.flagged_photos.end(),
              ErrorCode::Precondition, "photo '" + action.argument + "' is flagged to be changed");
      review.primary_photo = action.argument;
      break;
    case NegotiationActionType::ApproveInstruction:
      require(!poi.instruction.text.empty(), ErrorCode::Precondition, "POI " + poi.id + " has no instruction");
      review.approved_instruction = poi.instruction.text;
      break;
    case NegotiationActionType::FlagPhoto:
      require(has_photo(action.argument), ErrorCode::NotFound, "photo '" + action.argument + "' not on POI " + poi.id);
      if (std::find(review.flagged_photos.begin(), review.flagged_photos.end(), action.argument) ==
          review.flagged_photos.end()) {
        review.flagged_photos.push_back(action.argument);
      }
      if (review.primary_photo == action.argument) review.primary_photo.clear();
      review.decision = PoiStatus::Pending;
      break;
    case NegotiationActionType::Annotate:
      require(!action.argument.empty(), ErrorCode::Input, "empty annotation");
      review.annotations.push_back(action.argument);
      break;
  }
  out.feedback.poi_id = poi.id;
  n.transcript.push_back(out.feedback);
  return out;
}

RouteDefinition finalize_route(NegotiationSession& neg, const RouteDefinition& route, TimestampMs ts) {
  require(!neg.finalized, ErrorCode::State, "negotiation " + neg.id + " is already finalized");
  require(route.id == neg.route_id, ErrorCode::Input, "route does not belong to this negotiation");
  require(route.status == RouteStatus::UnderNegotiation, ErrorCode::State, "route is not under negotiation");

  RouteDefinition out = route;
  out.pois.clear();
  std::size_t confirmed_landmarks = 0;
  for (const auto& poi : route.pois) {
    const auto it = neg.reviews.find(poi.id);
    require(it != neg.reviews.end() && it->second.decision != PoiStatus::Pending, ErrorCode::IncompleteNegotiation,
            "POI " + poi.id + " is still pending");
    const PoiReview& review = it->second;
    if (review.decision == PoiStatus::Rejected) continue;
    Poi kept = poi;
    kept.status = PoiStatus::Confirmed;
    require(kept.kind != PoiKind::Candidate, ErrorCode::IncompleteNegotiation, "POI " + poi.id + " is unclassified");
    const auto primary = std::find(kept.photos.begin(), kept.photos.end(), review.primary_photo);
    require(primary != kept.photos.end(), ErrorCode::IncompleteNegotiation,
            "selected photo of POI " + poi.id + " no longer exists");
    std::rotate(kept.photos.begin(), primary, primary + 1);
    if (kept.kind == PoiKind::Landmark) {
      // An instruction edited after approval needs approving again.
      require(review.approved_instruction && *review.approved_instruction == kept.instruction.text,
              ErrorCode::IncompleteNegotiation, "instruction of landmark " + poi.id + " changed after approval");
      ++confirmed_landmarks;
    }
    out.pois.push_back(std::move(kept));
  }
  require(confirmed_landmarks > 0, ErrorCode::NoDecisionPoints, "no decision points: confirm at least one landmark");

  out.status = RouteStatus::Working;
  out.version = route.version + 1;
  if (out.subpaths.empty()) install_default_subpath(out);
  out.reindex();
  const auto report = validate_route(out);
  if (!report.ok()) {
    fail(ErrorCode::Validation, "finalized route invalid: " + report.violations.front().code + " " +
                                    report.violations.front().subject);
  }
  neg.finalized = true;
  neg.transcript.push_back({ts, neg.id, "", "Finalize", "version " + std::to_string(out.version)});
  return out;
}

RouteDefinition reopen_route(const RouteDefinition& working) {
  require(working.status == RouteStatus::Working, ErrorCode::State, "only Working routes can be reopened");
  RouteDefinition draft = working;
  draft.status = RouteStatus::Draft;
  draft.version = working.version + 1;
  for (auto& poi : draft.pois) poi.status = PoiStatus::Pending;
  return draft;
}

nlohmann::json to_json(const PreviewCard& card) {
  return {{"guidance", card.guidance}, {"preview_only", card.preview_only}};
}

PreviewCard preview_poi(const RouteDefinition& route, const std::string& poi_id) {
  const Poi* poi = route.find_poi(poi_id);
  if (poi == nullptr) fail(ErrorCode::NotFound, "POI '" + poi_id + "' not in route " + route.id);
  return {guidance_payload(*poi), !(poi->status == PoiStatus::Confirmed && route.status == RouteStatus::Working)};
}

}  // namespace waytrain
