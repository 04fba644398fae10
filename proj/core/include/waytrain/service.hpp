#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "waytrain/config.hpp"
#include "waytrain/design.hpp"
#include "waytrain/engine.hpp"
#include "waytrain/erw.hpp"
#include "waytrain/feed.hpp"
#include "waytrain/indicators.hpp"
#include "waytrain/privacy.hpp"
#include "waytrain/store.hpp"

namespace waytrain {

struct ErwFinish {
  ErwSession session;
  RouteDefinition draft;
};

struct SessionStarted {
  std::string session_id;
  std::vector<TrainingEvent> events;
};

struct CloudSyncResult {
  GateResult gate;
  std::vector<std::string> written;  // paths relative to the cloud directory
};

/// Workflow layer over the store, the engine and the monitoring feed. Each
/// live training session has its own lock, so calls for one session apply in
/// arrival order while different sessions run independently.
class Service {
public:
  Service(Store& store, FeedHub& feed, Config config = {});

  const Config& config() const { return config_; }
  Store& store() { return store_; }
  FeedHub& feed() { return feed_; }
  ConsentLedger& consent() { return consent_; }

  Way create_way(const Way& way);
  Way get_way(const std::string& id) const;

  ErwSession erw_start(const std::string& way_id, std::string erw_id, TimestampMs ts, std::string video_ref = {});
  ErwSession erw_fix(const std::string& erw_id, const GpsFix& fix);
  ErwSession erw_poi(const std::string& erw_id, const GpsFix& at, std::vector<std::string> photos, std::string note,
                     CaptureRole role);
  /// Finishes the walk and stores its Draft route (id defaults to "<walk>-route").
  ErwFinish erw_finish(const std::string& erw_id, std::string route_id = {});
  TransferPackage erw_package(const std::string& erw_id, TransferDestination destination) const;
  void put_media(const MediaAsset& asset, ItemKind kind);

  RouteDefinition get_route(const std::string& id, std::optional<int> version = std::nullopt) const;
  /// Applies the edits in order and stores the result as one new version.
  /// Throws Conflict when base_version is given and is not the latest.
  RouteDefinition apply_edits(const std::string& route_id, const std::vector<RouteEdit>& edits,
                              std::optional<int> base_version = std::nullopt);
  RouteDefinition reopen(const std::string& route_id);
  PreviewCard preview(const std::string& route_id, const std::string& poi_id) const;

  NegotiationStart start_negotiation(const std::string& route_id, std::string neg_id = {});
  NegotiationStep negotiation_step(const std::string& neg_id, const NegotiationAction& action, TimestampMs ts);
  RouteDefinition finalize_negotiation(const std::string& neg_id, TimestampMs ts);
  NegotiationSession get_negotiation(const std::string& neg_id) const;

  ConsentRecord grant_consent(const std::string& user_id, ConsentScope scope, const std::string& disclosure,
                              TimestampMs ts);

  /// Throws FeedUnavailable for a Remote session while the feed endpoint is down.
  SessionStarted begin_session(std::string session_id, const std::string& route_id, const TrainingConfig& config,
                               const std::string& consent_id, TimestampMs ts);
  std::vector<TrainingEvent> session_fix(const std::string& id, const GpsFix& fix);
  std::vector<TrainingEvent> session_quiz(const std::string& id, const std::string& quiz_id, const std::string& choice,
                                          TimestampMs ts);
  std::vector<TrainingEvent> session_report(const std::string& id, UnexpectedKind kind, TimestampMs ts);
  std::vector<TrainingEvent> session_help(const std::string& id, TimestampMs ts, const std::string& note);
  std::vector<TrainingEvent> session_assist(const std::string& id, AssistSource source, const std::string& note,
                                            TimestampMs ts);
  std::vector<TrainingEvent> session_ar(const std::string& id, TimestampMs ts);
  SessionRecord session_end(const std::string& id, std::optional<int> confidence, TimestampMs ts);
  NavSnapshot session_snapshot(const std::string& id) const;
  std::optional<OpenQuiz> session_open_quiz(const std::string& id) const;
  bool session_live(const std::string& id) const;

  /// Stores a record produced outside the live path (simulation, import).
  void import_session_record(const SessionRecord& record);

  nlohmann::json indicators(const std::string& session_id) const;
  /// Trend and suggestions over every stored session of the way. Throws NotFound without sessions.
  nlohmann::json trend(const std::string& way_id) const;

  /// Copies every cloud-admissible artifact into the store's cloud directory.
  CloudSyncResult cloud_sync();

private:
  struct Live {
    mutable std::mutex mutex;
    std::optional<TrainingSession> session;
  };

  std::shared_ptr<Live> live(const std::string& id) const;
  template <typename Fn>
  auto with_session(const std::string& id, Fn&& fn);
  std::string next_id(const std::string& prefix, EntityKind kind) const;

  Store& store_;
  FeedHub& feed_;
  Config config_;
  ConsentLedger consent_;
  mutable std::mutex mutex_;  // guards live_ and read-modify-write of walks and negotiations
  std::map<std::string, std::shared_ptr<Live>> live_;
};

}  // namespace waytrain
