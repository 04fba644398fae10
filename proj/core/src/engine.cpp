#include "waytrain/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

constexpr std::array kEventNames{
    "SessionStart",   "VicinityAlert", "Instruction",  "Reassurance",    "QuizPrompt",       "QuizAnswer",
    "Reward",         "MistakeAlert",  "OffTrackBegin", "OffTrackEnd",   "SignalLost",       "SignalRestored",
    "RecoveryPrompt", "HelpRequest",   "UnexpectedReport", "AssistLogged", "ARActivated",    "SessionEnd"};

nlohmann::json fix_to_json(const GpsFix& f) {
  nlohmann::json j{{"ts_ms", f.ts_ms}, {"lat", f.point.lat}, {"lon", f.point.lon}};
  j["accuracy_m"] = f.accuracy_m ? nlohmann::json(*f.accuracy_m) : nlohmann::json(nullptr);
  return j;
}

GpsFix fix_from_json(const nlohmann::json& j) {
  GpsFix f{{j.at("lat").get<double>(), j.at("lon").get<double>()}, j.at("ts_ms").get<TimestampMs>(), {}};
  if (j.contains("accuracy_m") && !j.at("accuracy_m").is_null()) f.accuracy_m = j.at("accuracy_m").get<double>();
  return f;
}

}  // namespace

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string_view to_string(Supervision s) {
  switch (s) {
    case Supervision::InPerson: return "InPerson";
    case Supervision::Remote: return "Remote";
    case Supervision::AppOnly: return "AppOnly";
  }
  return "?";
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Text: return "Text";
    case Modality::Symbol: return "Symbol";
    case Modality::Audio: return "Audio";
    case Modality::Tactile: return "Tactile";
    case Modality::AR: return "AR";
  }
  return "?";
}

Supervision parse_supervision(std::string_view s) {
  for (auto v : {Supervision::InPerson, Supervision::Remote, Supervision::AppOnly}) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorCode::Input, "unknown supervision '" + std::string(s) + "'");
}

Modality parse_modality(std::string_view s) {
  for (auto v : {Modality::Text, Modality::Symbol, Modality::Audio, Modality::Tactile, Modality::AR}) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorCode::Input, "unknown modality '" + std::string(s) + "'");
}

void check_config(const TrainingConfig& config) {
  const bool has_primary = std::any_of(config.modalities.begin(), config.modalities.end(),
                                       [](Modality m) { return m != Modality::AR; });
  require(has_primary, ErrorCode::ModalityConstraint, "AR can only supplement another modality");
}

nlohmann::json to_json(const TrainingConfig& c) {
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : c.modalities) mods.push_back(to_string(m));
  return {{"supervision", to_string(c.supervision)}, {"modalities", mods}, {"feed_mandatory", c.feed_mandatory()}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.supervision = parse_supervision(j.value("supervision", "InPerson"));
  if (j.contains("modalities")) {
    c.modalities.clear();
    for (const auto& m : j.at("modalities")) c.modalities.insert(parse_modality(m.get<std::string>()));
  }
  return c;
}

std::string_view to_string(EventType t) { return kEventNames[static_cast<std::size_t>(t)]; }

EventType parse_event_type(std::string_view s) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (s == kEventNames[i]) return static_cast<EventType>(i);
  }
  fail(ErrorCode::Input, "unknown event type '" + std::string(s) + "'");
}

std::string_view to_string(NavMode m) { return m == NavMode::OnTrack ? "OnTrack" : "OffTrack"; }

std::string_view to_string(AssistSource s) {
  return s == AssistSource::InPersonTrainer ? "InPersonTrainer" : "RemoteTrainer";
}

std::string_view to_string(UnexpectedKind k) {
  switch (k) {
    case UnexpectedKind::RoadBlocked: return "RoadBlocked";
    case UnexpectedKind::Panic: return "Panic";
    case UnexpectedKind::Lost: return "Lost";
    case UnexpectedKind::Other: return "Other";
  }
  return "?";
}

AssistSource parse_assist_source(std::string_view s) {
  if (s == "InPersonTrainer") return AssistSource::InPersonTrainer;
  if (s == "RemoteTrainer") return AssistSource::RemoteTrainer;
  fail(ErrorCode::Input, "unknown assist source '" + std::string(s) + "'");
}

UnexpectedKind parse_unexpected_kind(std::string_view s) {
  for (auto k : {UnexpectedKind::RoadBlocked, UnexpectedKind::Panic, UnexpectedKind::Lost, UnexpectedKind::Other}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::Input, "unknown report kind '" + std::string(s) + "'");
}

nlohmann::json to_json(const TrainingEvent& e) {
  return {{"ts_ms", e.ts_ms}, {"session_id", e.session_id}, {"seq", e.seq}, {"type", to_string(e.type)},
          {"payload", e.payload}};
}

TrainingEvent event_from_json(const nlohmann::json& j) {
  return {j.at("ts_ms").get<TimestampMs>(), j.at("session_id").get<std::string>(), j.at("seq").get<std::uint64_t>(),
          parse_event_type(j.at("type").get<std::string>()), j.at("payload")};
}

void write_event_log(std::ostream& out, const std::vector<TrainingEvent>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

std::vector<TrainingEvent> read_event_log(std::istream& in) {
  std::vector<TrainingEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Integrity, std::string("bad event log line: ") + e.what());
    }
  }
  return events;
}

nlohmann::json to_json(const NavSnapshot& s) {
  nlohmann::json j{{"along_m", s.along_m}, {"cross_m", s.cross_m}, {"mode", to_string(s.mode)},
                   {"signal_lost", s.signal_lost}};
  if (s.position) {
    j["lat"] = s.position->lat;
    j["lon"] = s.position->lon;
  } else {
    j["lat"] = nullptr;
    j["lon"] = nullptr;
  }
  return j;
}

nlohmann::json to_json(const SessionRecord& r) {
  nlohmann::json fixes = nlohmann::json::array();
  for (const auto& f : r.fixes) fixes.push_back(fix_to_json(f));
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  return {{"session_id", r.session_id},
          {"route", to_json(r.route)},
          {"config", to_json(r.config)},
          {"consent_id", r.consent_id},
          {"started_ts_ms", r.started_ts},
          {"ended_ts_ms", r.ended_ts},
          {"confidence", r.confidence ? nlohmann::json(*r.confidence) : nlohmann::json(nullptr)},
          {"fixes", fixes},
          {"events", events}};
}

SessionRecord session_record_from_json(const nlohmann::json& j) {
  SessionRecord r{.session_id = j.at("session_id").get<std::string>(),
                  .route = route_from_json(j.at("route")),
                  .config = training_config_from_json(j.at("config")),
                  .consent_id = j.at("consent_id").get<std::string>(),
                  .started_ts = j.at("started_ts_ms").get<TimestampMs>(),
                  .ended_ts = j.at("ended_ts_ms").get<TimestampMs>(),
                  .confidence = std::nullopt,
                  .fixes = {},
                  .events = {}};
  if (!j.at("confidence").is_null()) r.confidence = j.at("confidence").get<int>();
  for (const auto& f : j.at("fixes")) r.fixes.push_back(fix_from_json(f));
  for (const auto& e : j.at("events")) r.events.push_back(event_from_json(e));
  return r;
}

// ---------------------------------------------------------------------------

TrainingSession TrainingSession::begin(std::string session_id, const RouteDefinition& route, TrainingConfig config,
                                       ConsentLedger& consent, std::string_view consent_id, TimestampMs start_ts,
                                       EngineThresholds thresholds, Observer observer) {
  require(!session_id.empty(), ErrorCode::Input, "session id must not be empty");
  require(route.status == RouteStatus::Working, ErrorCode::State,
          "training needs a Working route, route " + route.id + " is " + std::string(to_string(route.status)));
  const auto report = validate_route(route);
  require(report.ok(), ErrorCode::Validation,
          "route " + route.id + " is invalid: " + (report.ok() ? "" : report.violations.front().code));
  check_config(config);
  consent.spend(consent_id, session_id, ConsentScope::TrainingTelemetry, start_ts);

  TrainingSession s;
  s.id_ = std::move(session_id);
  s.route_ = std::make_shared<const RouteDefinition>(route);
  s.config_ = std::move(config);
  s.thresholds_ = thresholds;
  s.consent_id_ = std::string(consent_id);
  s.started_ts_ = start_ts;
  s.observer_ = std::move(observer);
  s.poi_tracks_.resize(route.pois.size());

  std::vector<TrainingEvent> out;
  s.emit(out, start_ts, EventType::SessionStart,
         {{"route_id", route.id},
          {"route_version", route.version},
          {"route_length_m", route.length()},
          {"supervision", to_string(s.config_.supervision)},
          {"modalities", s.modality_list()},
          {"feed_mandatory", s.config_.feed_mandatory()},
          {"consent_id", s.consent_id_}});
  return s;
}

void TrainingSession::require_active() const {
  require(!ended_, ErrorCode::State, "session " + id_ + " has ended");
}

void TrainingSession::require_ts(TimestampMs ts) const {
  require(events_.empty() || ts >= events_.back().ts_ms, ErrorCode::Ordering,
          "timestamp " + std::to_string(ts) + " precedes the last event");
  require(fixes_.empty() || ts >= fixes_.back().ts_ms, ErrorCode::Ordering,
          "timestamp " + std::to_string(ts) + " precedes the last fix");
}

nlohmann::json TrainingSession::modality_list() const {
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : config_.modalities) mods.push_back(to_string(m));
  return mods;
}

NavSnapshot TrainingSession::snapshot() const {
  return {last_position_, watermark_, last_cross_, mode_, signal_lost_};
}

TrainingEvent& TrainingSession::emit(std::vector<TrainingEvent>& out, TimestampMs ts, EventType type,
                                     nlohmann::json payload) {
  if (!payload.contains("along_m")) payload["along_m"] = watermark_;
  TrainingEvent e{ts, id_, events_.size() + 1, type, std::move(payload)};
  events_.push_back(e);
  out.push_back(e);
  if (observer_) observer_(events_.back(), snapshot());
  return events_.back();
}

std::vector<TrainingEvent> TrainingSession::ingest_fix(const GpsFix& fix) {
  require_active();
  check_valid(fix.point);
  require(fixes_.empty() || fix.ts_ms > fixes_.back().ts_ms, ErrorCode::Ordering,
          "fix timestamp " + std::to_string(fix.ts_ms) + " is not after the previous fix");
  require_ts(fix.ts_ms);

  std::vector<TrainingEvent> out;
  const RouteDefinition& route = *route_;

  if (!fixes_.empty() && fix.ts_ms - fixes_.back().ts_ms > thresholds_.signal_gap_ms) {
    const TimestampMs lost_at =
        std::max(fixes_.back().ts_ms + thresholds_.signal_gap_ms, events_.back().ts_ms);
    signal_lost_ = true;
    emit(out, lost_at, EventType::SignalLost, {{"gap_ms", fix.ts_ms - fixes_.back().ts_ms}});
    signal_lost_ = false;
    emit(out, fix.ts_ms, EventType::SignalRestored, nlohmann::json::object());
  }
  fixes_.push_back(fix);
  last_position_ = fix.point;

  const double w = thresholds_.projection_window_m;
  const auto proj = project_onto_polyline(fix.point, route.geometry, {watermark_ - w, watermark_ + w});
  last_cross_ = proj.cross_track;

  if (mode_ == NavMode::OnTrack) {
    if (proj.cross_track < thresholds_.back_on_track_m) watermark_ = std::max(watermark_, proj.along_track);
    far_count_ = proj.cross_track >= thresholds_.off_track_m ? far_count_ + 1 : 0;
    if (far_count_ >= thresholds_.off_track_fixes) begin_off_track(out, fix.ts_ms);
  } else if (proj.cross_track < thresholds_.back_on_track_m) {
    watermark_ = std::max(watermark_, proj.along_track);
    end_off_track(out, fix.ts_ms, "self");
  }

  // Retrospective feedback for Reward-mode landmarks.
  if (mode_ == NavMode::OnTrack) {
    for (auto it = pending_rewards_.begin(); it != pending_rewards_.end();) {
      const Poi& poi = route.pois[it->poi_index];
      if (watermark_ >= poi.along_m + thresholds_.reward_commit_m) {
        emit(out, fix.ts_ms, EventType::Reward, {{"poi_id", poi.id}, {"poi_along_m", poi.along_m}});
        it = pending_rewards_.erase(it);
      } else {
        ++it;
      }
    }
  }

  for (std::size_t i = 0; i < route.pois.size(); ++i) {
    const Poi& poi = route.pois[i];
    PoiTrack& track = poi_tracks_[i];
    const double d = haversine_distance(fix.point, poi.coordinate);
    if (!track.inside) {
      if (d <= poi.geofence_radius_m && std::abs(poi.along_m - watermark_) <= w) {
        track.inside = true;
        if (!track.visited) {
          track.visited = true;
          on_first_entry(out, i, fix.ts_ms);
        }
      }
    } else if (d > poi.geofence_radius_m + thresholds_.geofence_hysteresis_m) {
      track.inside = false;
    }
  }
  return out;
}

void TrainingSession::on_first_entry(std::vector<TrainingEvent>& out, std::size_t poi_index, TimestampMs ts) {
  const Poi& poi = route_->pois[poi_index];
  const std::size_t sp = subpath_index_at(*route_, std::min(poi.along_m, route_->length()));
  const SupportMode mode = route_->subpaths[sp].mode;
  if (mode == SupportMode::Mute) return;

  // Vicinity alerts are mandatory in every non-muted mode.
  emit(out, ts, EventType::VicinityAlert,
       {{"poi_id", poi.id},
        {"kind", to_string(poi.kind)},
        {"poi_along_m", poi.along_m},
        {"radius_m", poi.geofence_radius_m},
        {"subpath", sp},
        {"mode", to_string(mode)},
        {"modalities", modality_list()}});

  if (poi.kind != PoiKind::Landmark) {
    emit(out, ts, EventType::Reassurance, {{"poi_id", poi.id}, {"guidance", guidance_payload(poi)}});
    return;
  }
  switch (mode) {
    case SupportMode::Actionable:
      emit(out, ts, EventType::Instruction,
           {{"poi_id", poi.id}, {"guidance", guidance_payload(poi)}, {"fallback", false}, {"modalities", modality_list()}});
      break;
    case SupportMode::Quiz:
      open_quiz(out, poi_index, ts);
      break;
    case SupportMode::Reward:
      pending_rewards_.push_back({poi_index});
      break;
    case SupportMode::Mute:
      break;
  }
}

void TrainingSession::open_quiz(std::vector<TrainingEvent>& out, std::size_t poi_index, TimestampMs ts) {
  if (quiz_) close_quiz_unanswered(out, ts);
  const auto& pois = route_->pois;
  const Poi& poi = pois[poi_index];

  OpenQuiz quiz;
  quiz.quiz_id = id_ + "-q" + std::to_string(++quiz_counter_);
  quiz.poi_id = poi.id;
  // The right answer is what the trainee sees next when continuing correctly.
  quiz.correct_choice = poi_index + 1 < pois.size() ? pois[poi_index + 1].primary_photo() : std::string("arrival");

  std::vector<std::string> pool;
  for (std::size_t i = 0; i < pois.size(); ++i) {
    if (i == poi_index || i == poi_index + 1) continue;
    const std::string& photo = pois[i].primary_photo();
    if (photo.empty() || photo == quiz.correct_choice) continue;
    if (std::find(pool.begin(), pool.end(), photo) == pool.end()) pool.push_back(photo);
  }
  std::mt19937_64 rng(stable_hash(quiz.quiz_id));
  std::vector<std::string> choices{quiz.correct_choice};
  for (int k = 0; k < 2 && !pool.empty(); ++k) {
    const std::size_t pick = static_cast<std::size_t>(rng() % pool.size());
    choices.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  for (std::size_t i = choices.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(choices[i - 1], choices[j]);
  }
  quiz.choices = choices;
  emit(out, ts, EventType::QuizPrompt, {{"quiz_id", quiz.quiz_id}, {"poi_id", poi.id}, {"choices", choices}});
  quiz_ = std::move(quiz);
}

void TrainingSession::close_quiz_unanswered(std::vector<TrainingEvent>& out, TimestampMs ts) {
  emit(out, ts, EventType::QuizAnswer,
       {{"quiz_id", quiz_->quiz_id},
        {"poi_id", quiz_->poi_id},
        {"choice", nullptr},
        {"correct", false},
        {"answered", false},
        {"auto_closed", true}});
  quiz_.reset();
}

std::optional<std::size_t> TrainingSession::attributed_landmark(double start_along) const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < route_->pois.size(); ++i) {
    const Poi& poi = route_->pois[i];
    if (poi.kind != PoiKind::Landmark || !poi_tracks_[i].visited) continue;
    const SupportMode mode = route_->subpaths[subpath_index_at(*route_, std::min(poi.along_m, route_->length()))].mode;
    if (mode == SupportMode::Mute) continue;
    if (start_along >= poi.along_m - poi.geofence_radius_m &&
        start_along <= poi.along_m + thresholds_.mistake_window_m) {
      if (!best || route_->pois[*best].along_m < poi.along_m) best = i;
    }
  }
  return best;
}

nlohmann::json TrainingSession::recovery_prompt(const std::string& reason) const {
  nlohmann::json target = nullptr;
  if (last_position_) {
    const double w = thresholds_.projection_window_m;
    const auto proj = project_onto_polyline(*last_position_, route_->geometry, {watermark_ - w, watermark_ + w});
    const GeoPoint p = route_->geometry.point_at(proj.along_track);
    target = {{"lat", p.lat}, {"lon", p.lon}, {"along_m", proj.along_track}};
  }
  return {{"reason", reason}, {"options", {"back_on_track", "help"}}, {"target", target}};
}

void TrainingSession::begin_off_track(std::vector<TrainingEvent>& out, TimestampMs ts) {
  mode_ = NavMode::OffTrack;
  off_track_start_ = watermark_;
  const auto landmark = attributed_landmark(off_track_start_);
  nlohmann::json attributed = landmark ? nlohmann::json(route_->pois[*landmark].id) : nlohmann::json(nullptr);
  emit(out, ts, EventType::OffTrackBegin,
       {{"start_along_m", off_track_start_}, {"cross_m", last_cross_}, {"attributed_poi", attributed}});
  if (landmark) {
    const auto it = std::find_if(pending_rewards_.begin(), pending_rewards_.end(),
                                 [&](const PendingReward& r) { return r.poi_index == *landmark; });
    if (it != pending_rewards_.end()) {
      pending_rewards_.erase(it);
      emit(out, ts, EventType::MistakeAlert,
           {{"poi_id", route_->pois[*landmark].id}, {"poi_along_m", route_->pois[*landmark].along_m}});
    }
  }
  emit(out, ts, EventType::RecoveryPrompt, recovery_prompt("off_track"));
}

void TrainingSession::end_off_track(std::vector<TrainingEvent>& out, TimestampMs ts, const char* how) {
  mode_ = NavMode::OnTrack;
  far_count_ = 0;
  emit(out, ts, EventType::OffTrackEnd, {{"how", how}, {"start_along_m", off_track_start_}});
}

std::vector<TrainingEvent> TrainingSession::answer_quiz(const std::string& quiz_id, const std::string& choice,
                                                        TimestampMs ts) {
  require_active();
  require(quiz_.has_value(), ErrorCode::State, "no quiz is open");
  require(quiz_->quiz_id == quiz_id, ErrorCode::State, "quiz " + quiz_id + " is not the open prompt");
  require_ts(ts);
  std::vector<TrainingEvent> out;
  const OpenQuiz quiz = *quiz_;
  quiz_.reset();
  const bool correct = choice == quiz.correct_choice;
  emit(out, ts, EventType::QuizAnswer,
       {{"quiz_id", quiz.quiz_id},
        {"poi_id", quiz.poi_id},
        {"choice", choice},
        {"correct", correct},
        {"answered", true},
        {"auto_closed", false}});
  if (!correct) {
    const Poi* poi = route_->find_poi(quiz.poi_id);
    emit(out, ts, EventType::Instruction,
         {{"poi_id", poi->id}, {"guidance", guidance_payload(*poi)}, {"fallback", true}, {"modalities", modality_list()}});
  }
  return out;
}

std::vector<TrainingEvent> TrainingSession::report_unexpected(UnexpectedKind kind, TimestampMs ts) {
  require_active();
  require_ts(ts);
  std::vector<TrainingEvent> out;
  emit(out, ts, EventType::UnexpectedReport, {{"kind", to_string(kind)}});
  emit(out, ts, EventType::RecoveryPrompt, recovery_prompt(std::string(to_string(kind))));
  return out;
}

std::vector<TrainingEvent> TrainingSession::request_help(TimestampMs ts, const std::string& note) {
  require_active();
  require_ts(ts);
  std::vector<TrainingEvent> out;
  emit(out, ts, EventType::HelpRequest, {{"note", note}, {"mode", to_string(mode_)}});
  return out;
}

std::vector<TrainingEvent> TrainingSession::log_assist(AssistSource source, const std::string& note, TimestampMs ts) {
  require_active();
  require_ts(ts);
  const bool legal = (source == AssistSource::InPersonTrainer && config_.supervision == Supervision::InPerson) ||
                     (source == AssistSource::RemoteTrainer && config_.supervision == Supervision::Remote);
  require(legal, ErrorCode::Role,
          std::string(to_string(source)) + " cannot assist a " + std::string(to_string(config_.supervision)) + " session");
  std::vector<TrainingEvent> out;
  emit(out, ts, EventType::AssistLogged, {{"source", to_string(source)}, {"note", note}});
  if (mode_ == NavMode::OffTrack) end_off_track(out, ts, "assisted");
  return out;
}

std::vector<TrainingEvent> TrainingSession::activate_ar(TimestampMs ts) {
  require_active();
  require_ts(ts);
  require(config_.modalities.contains(Modality::AR), ErrorCode::ModalityConstraint, "AR is not enabled for this session");
  std::vector<TrainingEvent> out;
  emit(out, ts, EventType::ARActivated, nlohmann::json::object());
  return out;
}

SessionRecord TrainingSession::end(std::optional<int> confidence, TimestampMs ts) {
  require_active();
  require_ts(ts);
  require(!confidence || (*confidence >= 1 && *confidence <= 5), ErrorCode::Input, "confidence must be within 1-5");
  std::vector<TrainingEvent> out;
  const bool had_open_quiz = quiz_.has_value();
  if (quiz_) close_quiz_unanswered(out, ts);
  nlohmann::json unresolved = nlohmann::json::array();
  for (const auto& r : pending_rewards_) unresolved.push_back(route_->pois[r.poi_index].id);
  emit(out, ts, EventType::SessionEnd,
       {{"confidence", confidence ? nlohmann::json(*confidence) : nlohmann::json(nullptr)},
        {"ended_off_track", mode_ == NavMode::OffTrack},
        {"unanswered_quiz", had_open_quiz},
        {"unresolved_rewards", unresolved}});
  ended_ = true;
  return {id_, *route_, config_, consent_id_, started_ts_, ts, confidence, fixes_, events_};
}

}  // namespace waytrain
