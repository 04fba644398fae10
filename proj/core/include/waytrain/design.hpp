#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/erw.hpp"
#include "waytrain/geo.hpp"
#include "waytrain/route.hpp"

namespace waytrain {

/// Draft route (version 1) from a finished walk: reconstructed path plus the
/// walk's candidate POIs.
RouteDefinition draft_route_from_walk(std::string route_id, const FinishedWalk& walk);

// ---------------------------------------------------------------------------
// Playback

struct PlaybackMarker {
  std::string poi_id;
  TimestampMs ts_ms = 0;
  double along_m = 0.0;
  /// Set when GPS noise put this marker behind an earlier capture.
  bool inverted = false;
};

struct PlaybackSample {
  ProjectedPosition position;
  std::size_t nearest_fix = 0;
};

/// Timeline of a walk keyed by GPS fix timestamps, which act as the master
/// clock for video alignment.
class PlaybackIndex {
public:
  PlaybackIndex(const ErwSession& walk, Polyline path);

  TimestampMs start_ts() const { return start_ts_; }
  TimestampMs end_ts() const { return end_ts_; }

  /// Interpolated position at ts. Throws Range outside [start_ts, end_ts].
  PlaybackSample at(TimestampMs ts) const;
  const std::vector<PlaybackMarker>& markers() const { return markers_; }
  /// Throws NotFound.
  const PlaybackMarker& jump_to(const std::string& poi_id) const;
  const Polyline& path() const { return path_; }

private:
  double along_at(TimestampMs ts) const;

  Polyline path_;
  std::vector<TimestampMs> fix_ts_;
  std::vector<ProjectedPosition> fix_pos_;
  std::vector<PlaybackMarker> markers_;
  TimestampMs start_ts_ = 0;
  TimestampMs end_ts_ = 0;
};

/// Throws State unless the walk is finished.
PlaybackIndex build_playback_index(const ErwSession& walk, const Polyline& path);

// ---------------------------------------------------------------------------
// Curation edits

struct AddPoi {
  Poi poi;
};
struct RemovePoi {
  std::string poi_id;
};
struct EditPoi {
  std::string poi_id;
  std::optional<GeoPoint> coordinate;
  std::optional<double> radius_m;
  std::optional<std::string> notes;
  std::vector<std::string> add_photos;
  std::vector<std::string> remove_photos;
};
struct EditInstruction {
  std::string poi_id;
  Instruction instruction;
};
struct MovePathVertex {
  std::size_t index = 0;
  GeoPoint to;
};
struct PromoteCandidate {
  std::string poi_id;
  PoiKind kind = PoiKind::Landmark;
};
struct SplitSubpath {
  double at_m = 0.0;
};
struct MergeSubpaths {
  std::size_t index = 0;
};
struct SetSubpathMode {
  std::size_t index = 0;
  SupportMode mode = SupportMode::Actionable;
};

using RouteEdit = std::variant<AddPoi, RemovePoi, EditPoi, EditInstruction, MovePathVertex, PromoteCandidate,
                               SplitSubpath, MergeSubpaths, SetSubpathMode>;

RouteEdit edit_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RouteEdit& edit);

/// Returns the next version of `route`. Content edits need a Draft or
/// UnderNegotiation route; sub-path edits are also allowed on Working routes.
/// An edit that introduces a new invariant violation is rejected (Validation)
/// and the input is left untouched.
RouteDefinition apply_edit(const RouteDefinition& route, const RouteEdit& edit);

// ---------------------------------------------------------------------------
// Negotiation

enum class NegotiationActionType { Next, Prev, Confirm, Reject, SelectPhoto, ApproveInstruction, FlagPhoto, Annotate };

std::string_view to_string(NegotiationActionType t);
NegotiationActionType parse_negotiation_action(std::string_view s);

struct NegotiationAction {
  NegotiationActionType type = NegotiationActionType::Next;
  /// Asset id for SelectPhoto/FlagPhoto, text for Annotate.
  std::string argument;
};

struct PoiReview {
  PoiStatus decision = PoiStatus::Pending;
  std::string primary_photo;
  /// Instruction text as approved; finalization checks it is still current.
  std::optional<std::string> approved_instruction;
  std::vector<std::string> flagged_photos;
  std::vector<std::string> annotations;

  friend bool operator==(const PoiReview&, const PoiReview&) = default;
};

/// One line of the negotiation transcript.
struct FeedbackRecord {
  TimestampMs ts_ms = 0;
  std::string neg_id;
  std::string poi_id;
  std::string action;
  std::string detail;

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

nlohmann::json to_json(const FeedbackRecord& r);
FeedbackRecord feedback_from_json(const nlohmann::json& j);

struct NegotiationSession {
  std::string id;
  std::string route_id;
  std::size_t cursor = 0;
  std::map<std::string, PoiReview> reviews;  // keyed by POI id
  std::vector<FeedbackRecord> transcript;    // append-only
  bool finalized = false;

  friend bool operator==(const NegotiationSession&, const NegotiationSession&) = default;
};

nlohmann::json to_json(const NegotiationSession& n);
NegotiationSession negotiation_from_json(const nlohmann::json& j);

struct NegotiationStart {
  RouteDefinition route;  // UnderNegotiation, next version
  NegotiationSession session;
};

/// Moves a Draft route into negotiation. Throws State for other statuses and
/// Precondition for a route without POIs.
NegotiationStart start_negotiation(const RouteDefinition& draft, std::string neg_id);

struct NegotiationStep {
  NegotiationSession session;
  FeedbackRecord feedback;
};

/// Applies one slideshow action to the POI under the cursor.
NegotiationStep negotiation_step(const NegotiationSession& neg, const RouteDefinition& route,
                                 const NegotiationAction& action, TimestampMs ts);

/// Turns a fully decided negotiation into the Working route: Rejected POIs are
/// dropped, selected photos become primary, a default sub-path is installed.
/// Throws IncompleteNegotiation or NoDecisionPoints.
RouteDefinition finalize_route(NegotiationSession& neg, const RouteDefinition& route, TimestampMs ts);

/// Copies a Working route back to Draft (next version) with every POI pending
/// review again.
RouteDefinition reopen_route(const RouteDefinition& working);

// ---------------------------------------------------------------------------
// Preview

struct PreviewCard {
  nlohmann::json guidance;  // identical to the live Instruction payload
  bool preview_only = true;
};

nlohmann::json to_json(const PreviewCard& card);

/// Throws NotFound for unknown POIs.
PreviewCard preview_poi(const RouteDefinition& route, const std::string& poi_id);

}  // namespace waytrain
