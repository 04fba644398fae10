#include "waytrain/service.hpp"

#include <fstream>
#include <set>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

std::filesystem::path prepared(std::filesystem::path file) {
  std::filesystem::create_directories(file.parent_path());
  return file;
}

}  // namespace

Service::Service(Store& store, FeedHub& feed, Config config)
    : store_(store), feed_(feed), config_(std::move(config)), consent_(prepared(store.consent_ledger_path())) {}

std::string Service::next_id(const std::string& prefix, EntityKind kind) const {
  for (std::size_t n = store_.list(kind).size() + 1;; ++n) {
    std::string id = prefix + "-" + std::to_string(n);
    if (!store_.exists(kind, id) && !live_.contains(id)) return id;
  }
}

Way Service::create_way(const Way& way) {
  check_entity_id(way.id);
  check_valid(way.origin);
  check_valid(way.destination);
  store_.create_way(way);
  return way;
}

Way Service::get_way(const std::string& id) const { return store_.load_way(id); }

ErwSession Service::erw_start(const std::string& way_id, std::string erw_id, TimestampMs ts, std::string video_ref) {
  std::lock_guard lock(mutex_);
  store_.load_way(way_id);
  if (erw_id.empty()) erw_id = next_id("erw", EntityKind::Erw);
  ErwSession s = start_erw_session(std::move(erw_id), way_id, ts, std::move(video_ref));
  store_.put_erw(s, 0);
  return s;
}

ErwSession Service::erw_fix(const std::string& erw_id, const GpsFix& fix) {
  std::lock_guard lock(mutex_);
  auto [s, rev] = store_.load_erw(erw_id);
  s = append_fix(std::move(s), fix);
  store_.put_erw(s, rev);
  return s;
}

ErwSession Service::erw_poi(const std::string& erw_id, const GpsFix& at, std::vector<std::string> photos,
                            std::string note, CaptureRole role) {
  std::lock_guard lock(mutex_);
  auto [s, rev] = store_.load_erw(erw_id);
  s = capture_poi(std::move(s), at, std::move(photos), std::move(note), role);
  store_.put_erw(s, rev);
  return s;
}

ErwFinish Service::erw_finish(const std::string& erw_id, std::string route_id) {
  std::lock_guard lock(mutex_);
  auto [s, rev] = store_.load_erw(erw_id);
  FinishedWalk walk = finish_session(std::move(s), config_.simplify_tolerance_m);
  if (route_id.empty()) route_id = erw_id + "-route";
  RouteDefinition draft = draft_route_from_walk(route_id, walk);
  store_.put_route(draft);
  store_.put_erw(walk.session, rev);
  return {std::move(walk.session), std::move(draft)};
}

TransferPackage Service::erw_package(const std::string& erw_id, TransferDestination destination) const {
  const auto [s, rev] = store_.load_erw(erw_id);
  MediaLibrary media;
  for (const auto& poi : s.candidate_pois) {
    for (const auto& photo : poi.photos) {
      if (!media.contains(photo)) media.put(store_.load_media(photo));
    }
  }
  if (!s.video_ref.empty()) media.put(store_.load_media(s.video_ref));
  return build_transfer_package(s, destination, media);
}

void Service::put_media(const MediaAsset& asset, ItemKind kind) { store_.put_media(asset, kind); }

RouteDefinition Service::get_route(const std::string& id, std::optional<int> version) const {
  return store_.load_route(id, version);
}

RouteDefinition Service::apply_edits(const std::string& route_id, const std::vector<RouteEdit>& edits,
                                     std::optional<int> base_version) {
  RouteDefinition base = store_.load_route(route_id);
  if (base_version) {
    require(*base_version == base.version, ErrorCode::Conflict,
            "route " + route_id + " is at version " + std::to_string(base.version) + ", edits target " +
                std::to_string(*base_version));
  }
  require(!edits.empty(), ErrorCode::Input, "no edits given");
  RouteDefinition next = base;
  for (const auto& edit : edits) next = apply_edit(next, edit);
  next.version = base.version + 1;
  store_.put_route(next);
  return next;
}

RouteDefinition Service::reopen(const std::string& route_id) {
  RouteDefinition draft = reopen_route(store_.load_route(route_id));
  store_.put_route(draft);
  return draft;
}

PreviewCard Service::preview(const std::string& route_id, const std::string& poi_id) const {
  return preview_poi(store_.load_route(route_id), poi_id);
}

NegotiationStart Service::start_negotiation(const std::string& route_id, std::string neg_id) {
  std::lock_guard lock(mutex_);
  if (neg_id.empty()) neg_id = next_id("neg", EntityKind::Negotiation);
  check_entity_id(neg_id);
  require(!store_.exists(EntityKind::Negotiation, neg_id), ErrorCode::Conflict, "negotiation " + neg_id + " exists");
  NegotiationStart start = waytrain::start_negotiation(store_.load_route(route_id), std::move(neg_id));
  store_.put_route(start.route);
  store_.put_negotiation(start.session, 0);
  return start;
}

NegotiationStep Service::negotiation_step(const std::string& neg_id, const NegotiationAction& action, TimestampMs ts) {
  std::lock_guard lock(mutex_);
  auto [neg, rev] = store_.load_negotiation(neg_id);
  NegotiationStep step = waytrain::negotiation_step(neg, store_.load_route(neg.route_id), action, ts);
  store_.put_negotiation(step.session, rev);
  return step;
}

RouteDefinition Service::finalize_negotiation(const std::string& neg_id, TimestampMs ts) {
  std::lock_guard lock(mutex_);
  auto [neg, rev] = store_.load_negotiation(neg_id);
  RouteDefinition working = finalize_route(neg, store_.load_route(neg.route_id), ts);
  store_.put_route(working);
  store_.put_negotiation(neg, rev);
  return working;
}

NegotiationSession Service::get_negotiation(const std::string& neg_id) const {
  return store_.load_negotiation(neg_id).first;
}

ConsentRecord Service::grant_consent(const std::string& user_id, ConsentScope scope, const std::string& disclosure,
                                     TimestampMs ts) {
  return consent_.grant(user_id, scope, disclosure, ts);
}

std::shared_ptr<Service::Live> Service::live(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = live_.find(id);
  require(it != live_.end(), ErrorCode::NotFound, "no live session " + id);
  return it->second;
}

template <typename Fn>
auto Service::with_session(const std::string& id, Fn&& fn) {
  auto l = live(id);
  std::lock_guard lock(l->mutex);
  require(l->session.has_value() && !l->session->ended(), ErrorCode::State, "session " + id + " has ended");
  return fn(*l->session);
}

SessionStarted Service::begin_session(std::string session_id, const std::string& route_id,
                                      const TrainingConfig& config, const std::string& consent_id, TimestampMs ts) {
  RouteDefinition route = store_.load_route(route_id);
  if (config.feed_mandatory()) {
    require(feed_.endpoint_available(), ErrorCode::FeedUnavailable,
            "remote supervision needs the monitoring feed, which is not available");
  }
  auto slot = std::make_shared<Live>();
  {
    std::lock_guard lock(mutex_);
    if (session_id.empty()) session_id = next_id("s", EntityKind::Session);
    check_entity_id(session_id);
    require(!live_.contains(session_id) && !store_.exists(EntityKind::Session, session_id) && !feed_.has(session_id),
            ErrorCode::Conflict, "session " + session_id + " already exists");
    live_[session_id] = slot;
  }
  std::lock_guard slot_lock(slot->mutex);
  std::vector<std::pair<TrainingEvent, NavSnapshot>> early;
  try {
    slot->session = TrainingSession::begin(session_id, route, config, consent_, consent_id, ts, config_.thresholds,
                                           [&early](const TrainingEvent& e, const NavSnapshot& s) {
                                             early.emplace_back(e, s);
                                           });
  } catch (...) {
    std::lock_guard lock(mutex_);
    live_.erase(session_id);
    throw;
  }
  feed_.open(session_id);
  for (const auto& [e, s] : early) {
    store_.append_event(e);
    feed_.publish(e, s);
  }
  slot->session->set_observer([this](const TrainingEvent& e, const NavSnapshot& s) {
    store_.append_event(e);
    feed_.publish(e, s);
  });
  return {session_id, slot->session->events()};
}

std::vector<TrainingEvent> Service::session_fix(const std::string& id, const GpsFix& fix) {
  return with_session(id, [&](TrainingSession& s) { return s.ingest_fix(fix); });
}

std::vector<TrainingEvent> Service::session_quiz(const std::string& id, const std::string& quiz_id,
                                                 const std::string& choice, TimestampMs ts) {
  return with_session(id, [&](TrainingSession& s) { return s.answer_quiz(quiz_id, choice, ts); });
}

std::vector<TrainingEvent> Service::session_report(const std::string& id, UnexpectedKind kind, TimestampMs ts) {
  return with_session(id, [&](TrainingSession& s) { return s.report_unexpected(kind, ts); });
}

std::vector<TrainingEvent> Service::session_help(const std::string& id, TimestampMs ts, const std::string& note) {
  return with_session(id, [&](TrainingSession& s) { return s.request_help(ts, note); });
}

std::vector<TrainingEvent> Service::session_assist(const std::string& id, AssistSource source, const std::string& note,
                                                   TimestampMs ts) {
  return with_session(id, [&](TrainingSession& s) { return s.log_assist(source, note, ts); });
}

std::vector<TrainingEvent> Service::session_ar(const std::string& id, TimestampMs ts) {
  return with_session(id, [&](TrainingSession& s) { return s.activate_ar(ts); });
}

SessionRecord Service::session_end(const std::string& id, std::optional<int> confidence, TimestampMs ts) {
  SessionRecord record = with_session(id, [&](TrainingSession& s) { return s.end(confidence, ts); });
  store_.put_session_record(record);
  feed_.close(id);
  std::lock_guard lock(mutex_);
  live_.erase(id);
  return record;
}

NavSnapshot Service::session_snapshot(const std::string& id) const {
  auto l = live(id);
  std::lock_guard lock(l->mutex);
  return l->session->snapshot();
}

std::optional<OpenQuiz> Service::session_open_quiz(const std::string& id) const {
  auto l = live(id);
  std::lock_guard lock(l->mutex);
  return l->session->open_quiz();
}

bool Service::session_live(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return live_.contains(id);
}

void Service::import_session_record(const SessionRecord& record) {
  store_.put_session_record(record);
  for (const auto& e : record.events) store_.append_event(e);
}

nlohmann::json Service::indicators(const std::string& session_id) const {
  return indicator_report(store_.load_session_record(session_id), config_.policy);
}

nlohmann::json Service::trend(const std::string& way_id) const {
  store_.load_way(way_id);
  std::vector<SessionRecord> records;
  for (const auto& id : store_.session_ids()) {
    SessionRecord r = store_.load_session_record(id);
    if (r.route.way_id == way_id) records.push_back(std::move(r));
  }
  require(!records.empty(), ErrorCode::NotFound, "no training sessions for way " + way_id);
  const TrendReport report = learning_trend(std::move(records), config_.policy);
  return to_json(report, recommend_adaptation(report, config_.policy));
}

CloudSyncResult Service::cloud_sync() {
  SyncManifest manifest;
  std::map<std::string, std::string> bytes_by_path;
  auto add = [&](std::string id, ItemKind kind, std::string path, std::string bytes, bool curated) {
    manifest.items.push_back({std::move(id), std::string(to_string(kind)), classify(kind, curated), sha256_hex(bytes),
                              path, curated});
    bytes_by_path[path] = std::move(bytes);
  };

  std::set<std::string> curated_photos;
  for (const auto& id : store_.route_ids()) {
    const RouteDefinition route = store_.load_route(id);
    if (route.status != RouteStatus::Working) continue;
    for (const auto& poi : route.pois) curated_photos.insert(poi.photos.begin(), poi.photos.end());
    add(route.id, ItemKind::WorkingRoute, "routes/" + route.id + "-v" + std::to_string(route.version) + ".json",
        canonical_dump(to_json(route)), false);
  }
  for (const auto& id : store_.session_ids()) {
    add(id, ItemKind::SessionRecord, "sessions/" + id + ".json",
        canonical_dump(to_json(store_.load_session_record(id))), false);
  }
  for (const auto& id : store_.list(EntityKind::Negotiation)) {
    nlohmann::json transcript = nlohmann::json::array();
    for (const auto& r : store_.load_negotiation(id).first.transcript) transcript.push_back(to_json(r));
    add(id, ItemKind::NegotiationTranscript, "negotiations/" + id + ".json", canonical_dump(transcript), false);
  }
  for (const auto& id : store_.list(EntityKind::Erw)) {
    add(id, ItemKind::RawErwSession, "erw/" + id + ".json", canonical_dump(store_.get(EntityKind::Erw, id).json), false);
  }
  for (const auto& id : store_.media_ids()) {
    const ItemKind kind = store_.media_kind(id);
    add(id, kind, "media/" + id, store_.load_media(id).bytes, kind == ItemKind::PoiPhoto && curated_photos.contains(id));
  }

  CloudSyncResult result{gate_sync(manifest, SyncDestination::Cloud, GateMode::Lenient), {}};
  const auto dir = store_.cloud_dir();
  for (const auto& item : result.gate.permitted.items) {
    const auto target = dir / item.path;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out << bytes_by_path.at(item.path);
    result.written.push_back(item.path);
  }
  return result;
}

}  // namespace waytrain
