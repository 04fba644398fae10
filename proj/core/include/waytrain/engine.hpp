#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/geo.hpp"
#include "waytrain/privacy.hpp"
#include "waytrain/route.hpp"

namespace waytrain {

enum class Supervision { InPerson, Remote, AppOnly };
enum class Modality { Text, Symbol, Audio, Tactile, AR };

std::string_view to_string(Supervision s);
std::string_view to_string(Modality m);
Supervision parse_supervision(std::string_view s);
Modality parse_modality(std::string_view s);

struct TrainingConfig {
  Supervision supervision = Supervision::InPerson;
  std::set<Modality> modalities{Modality::Text, Modality::Symbol};

  /// Remote supervision cannot run without the live monitoring feed.
  bool feed_mandatory() const { return supervision == Supervision::Remote; }

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Throws ModalityConstraint when AR is the only modality (or none is set).
void check_config(const TrainingConfig& config);

nlohmann::json to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const nlohmann::json& j);

/// Detection thresholds. Defaults sit above typical phone GPS error and below
/// block-scale distances; all of them can be overridden from the config file.
struct EngineThresholds {
  double geofence_hysteresis_m = 10.0;
  double off_track_m = 30.0;
  int off_track_fixes = 3;
  double back_on_track_m = 15.0;
  double reward_commit_m = 20.0;
  double mistake_window_m = 50.0;
  TimestampMs signal_gap_ms = 20'000;
  double projection_window_m = 100.0;

  friend bool operator==(const EngineThresholds&, const EngineThresholds&) = default;
};

enum class EventType {
  SessionStart,
  VicinityAlert,
  Instruction,
  Reassurance,
  QuizPrompt,
  QuizAnswer,
  Reward,
  MistakeAlert,
  OffTrackBegin,
  OffTrackEnd,
  SignalLost,
  SignalRestored,
  RecoveryPrompt,
  HelpRequest,
  UnexpectedReport,
  AssistLogged,
  ARActivated,
  SessionEnd,
};

std::string_view to_string(EventType t);
EventType parse_event_type(std::string_view s);

struct TrainingEvent {
  TimestampMs ts_ms = 0;
  std::string session_id;
  std::uint64_t seq = 0;  // gapless per session, starting at 1
  EventType type = EventType::SessionStart;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const TrainingEvent&, const TrainingEvent&) = default;
};

nlohmann::json to_json(const TrainingEvent& e);
TrainingEvent event_from_json(const nlohmann::json& j);

/// Event log file: one `{ts_ms, session_id, seq, type, payload}` object per line.
void write_event_log(std::ostream& out, const std::vector<TrainingEvent>& events);
std::vector<TrainingEvent> read_event_log(std::istream& in);

enum class NavMode { OnTrack, OffTrack };
enum class AssistSource { InPersonTrainer, RemoteTrainer };
enum class UnexpectedKind { RoadBlocked, Panic, Lost, Other };

std::string_view to_string(NavMode m);
std::string_view to_string(AssistSource s);
std::string_view to_string(UnexpectedKind k);
AssistSource parse_assist_source(std::string_view s);
UnexpectedKind parse_unexpected_kind(std::string_view s);

/// Trainee position as last seen by the engine.
struct NavSnapshot {
  std::optional<GeoPoint> position;
  double along_m = 0.0;  // progress watermark
  double cross_m = 0.0;
  NavMode mode = NavMode::OnTrack;
  bool signal_lost = false;
};

nlohmann::json to_json(const NavSnapshot& s);

struct OpenQuiz {
  std::string quiz_id;
  std::string poi_id;
  std::string correct_choice;
  std::vector<std::string> choices;
};

/// Immutable result of a finished session.
struct SessionRecord {
  std::string session_id;
  RouteDefinition route;
  TrainingConfig config;
  std::string consent_id;
  TimestampMs started_ts = 0;
  TimestampMs ended_ts = 0;
  std::optional<int> confidence;
  std::vector<GpsFix> fixes;
  std::vector<TrainingEvent> events;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

nlohmann::json to_json(const SessionRecord& r);
SessionRecord session_record_from_json(const nlohmann::json& j);

/// Live navigation state machine for one trainee session. Single writer: calls
/// must be made sequentially and in timestamp order.
class TrainingSession {
public:
  using Observer = std::function<void(const TrainingEvent&, const NavSnapshot&)>;

  /// Starts a session on a Working route, spending the given consent record.
  /// Throws State (route not Working), ModalityConstraint, or ConsentRequired.
  static TrainingSession begin(std::string session_id, const RouteDefinition& route, TrainingConfig config,
                               ConsentLedger& consent, std::string_view consent_id, TimestampMs start_ts,
                               EngineThresholds thresholds = {}, Observer observer = {});

  std::vector<TrainingEvent> ingest_fix(const GpsFix& fix);
  std::vector<TrainingEvent> answer_quiz(const std::string& quiz_id, const std::string& choice, TimestampMs ts);
  std::vector<TrainingEvent> report_unexpected(UnexpectedKind kind, TimestampMs ts);
  std::vector<TrainingEvent> request_help(TimestampMs ts, const std::string& note = {});
  std::vector<TrainingEvent> log_assist(AssistSource source, const std::string& note, TimestampMs ts);
  std::vector<TrainingEvent> activate_ar(TimestampMs ts);
  /// Closes any open quiz as unanswered and seals the session.
  SessionRecord end(std::optional<int> confidence, TimestampMs ts);

  const std::string& id() const { return id_; }
  const RouteDefinition& route() const { return *route_; }
  const TrainingConfig& config() const { return config_; }
  const std::vector<TrainingEvent>& events() const { return events_; }
  const std::vector<GpsFix>& fixes() const { return fixes_; }
  const std::optional<OpenQuiz>& open_quiz() const { return quiz_; }
  NavSnapshot snapshot() const;
  bool ended() const { return ended_; }
  void set_observer(Observer observer) { observer_ = std::move(observer); }

private:
  struct PoiTrack {
    bool inside = false;
    bool visited = false;
  };
  struct PendingReward {
    std::size_t poi_index;
  };

  TrainingSession() = default;

  void require_active() const;
  void require_ts(TimestampMs ts) const;
  TrainingEvent& emit(std::vector<TrainingEvent>& out, TimestampMs ts, EventType type, nlohmann::json payload);
  void on_first_entry(std::vector<TrainingEvent>& out, std::size_t poi_index, TimestampMs ts);
  void open_quiz(std::vector<TrainingEvent>& out, std::size_t poi_index, TimestampMs ts);
  void close_quiz_unanswered(std::vector<TrainingEvent>& out, TimestampMs ts);
  void begin_off_track(std::vector<TrainingEvent>& out, TimestampMs ts);
  void end_off_track(std::vector<TrainingEvent>& out, TimestampMs ts, const char* how);
  std::optional<std::size_t> attributed_landmark(double start_along) const;
  nlohmann::json recovery_prompt(const std::string& reason) const;
  nlohmann::json modality_list() const;

  std::string id_;
  std::shared_ptr<const RouteDefinition> route_;
  TrainingConfig config_;
  EngineThresholds thresholds_;
  std::string consent_id_;
  TimestampMs started_ts_ = 0;
  Observer observer_;

  std::vector<TrainingEvent> events_;
  std::vector<GpsFix> fixes_;
  std::vector<PoiTrack> poi_tracks_;
  std::vector<PendingReward> pending_rewards_;
  std::optional<OpenQuiz> quiz_;
  std::uint64_t quiz_counter_ = 0;

  std::optional<GeoPoint> last_position_;
  double watermark_ = 0.0;
  double last_cross_ = 0.0;
  NavMode mode_ = NavMode::OnTrack;
  int far_count_ = 0;
  double off_track_start_ = 0.0;
  bool signal_lost_ = false;
  bool ended_ = false;
};

/// FNV-1a 64-bit; stable seed derivation for deterministic choices.
std::uint64_t stable_hash(std::string_view text);

}  // namespace waytrain
