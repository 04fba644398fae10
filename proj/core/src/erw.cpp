#include "waytrain/erw.hpp"

#include <fstream>
#include <sstream>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kSessionPath = "session.json";
constexpr const char* kTracePath = "trace.csv";

void require_recording(const ErwSession& s) {
  require(s.state == ErwState::Recording, ErrorCode::State, "walk " + s.id + " is already finished");
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Integrity, "missing package file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool safe_relative(const std::string& path) {
  const std::filesystem::path p(path);
  if (path.empty() || p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

// Session metadata without the trace, which travels as CSV.
nlohmann::json session_meta(const ErwSession& s) {
  nlohmann::json j = to_json(s);
  j.erase("fixes");
  return j;
}

}  // namespace

std::string_view to_string(ErwState s) { return s == ErwState::Recording ? "Recording" : "Finished"; }
std::string_view to_string(CaptureRole r) { return r == CaptureRole::Trainer ? "Trainer" : "User"; }

ErwSession start_erw_session(std::string id, std::string way_id, TimestampMs started_ts, std::string video_ref) {
  require(!id.empty() && !way_id.empty(), ErrorCode::Input, "walk needs an id and a way");
  ErwSession s;
  s.id = std::move(id);
  s.way_id = std::move(way_id);
  s.started_ts = started_ts;
  s.video_ref = std::move(video_ref);
  return s;
}

ErwSession append_fix(ErwSession session, const GpsFix& fix) {
  require_recording(session);
  check_valid(fix.point);
  require(fix.ts_ms >= session.started_ts, ErrorCode::Ordering, "fix precedes the walk start");
  require(session.fixes.empty() || fix.ts_ms > session.fixes.back().ts_ms, ErrorCode::Ordering,
          "fix timestamp " + std::to_string(fix.ts_ms) + " does not follow the previous fix");
  session.fixes.push_back(fix);
  return session;
}

ErwSession capture_poi(ErwSession session, const GpsFix& at, std::vector<std::string> photos, std::string note,
                       CaptureRole role) {
  require_recording(session);
  require(!photos.empty(), ErrorCode::PhotoRequired, "a captured POI needs at least one photo");
  check_valid(at.point);
  require(at.ts_ms >= session.started_ts, ErrorCode::Ordering, "capture precedes the walk start");
  Poi poi;
  poi.id = session.id + "-poi-" + std::to_string(session.candidate_pois.size() + 1);
  poi.coordinate = at.point;
  poi.captured_ts = at.ts_ms;
  poi.kind = PoiKind::Candidate;
  poi.status = PoiStatus::Pending;
  poi.photos = std::move(photos);
  poi.notes = std::move(note);
  session.capture_roles[poi.id] = role;
  session.candidate_pois.push_back(std::move(poi));
  return session;
}

FinishedWalk finish_session(ErwSession session, double tolerance_m) {
  require_recording(session);
  require(session.fixes.size() >= 2, ErrorCode::InsufficientData, "a walk needs at least 2 fixes");
  Polyline path = simplify_trace(session.fixes, tolerance_m);
  TimestampMs ended = session.fixes.back().ts_ms;
  for (const auto& p : session.candidate_pois) ended = std::max(ended, p.captured_ts);
  session.ended_ts = ended;
  session.state = ErwState::Finished;
  return {std::move(session), std::move(path)};
}

nlohmann::json to_json(const ErwSession& s) {
  nlohmann::json fixes = nlohmann::json::array();
  for (const auto& f : s.fixes) {
    nlohmann::json jf{{"ts_ms", f.ts_ms}, {"lat", f.point.lat}, {"lon", f.point.lon}};
    jf["accuracy_m"] = f.accuracy_m ? nlohmann::json(*f.accuracy_m) : nlohmann::json(nullptr);
    fixes.push_back(std::move(jf));
  }
  nlohmann::json pois = nlohmann::json::array();
  for (const auto& p : s.candidate_pois) {
    nlohmann::json jp = poi_to_json(p);
    const auto role = s.capture_roles.find(p.id);
    if (role != s.capture_roles.end()) jp["captured_by"] = to_string(role->second);
    pois.push_back(std::move(jp));
  }
  return {{"id", s.id},
          {"way_id", s.way_id},
          {"state", to_string(s.state)},
          {"fixes", fixes},
          {"candidate_pois", pois},
          {"video_ref", s.video_ref},
          {"started_ts_ms", s.started_ts},
          {"ended_ts_ms", s.ended_ts ? nlohmann::json(*s.ended_ts) : nlohmann::json(nullptr)}};
}

ErwSession erw_from_json(const nlohmann::json& j) {
  ErwSession s;
  s.id = j.at("id").get<std::string>();
  s.way_id = j.at("way_id").get<std::string>();
  const auto state = j.at("state").get<std::string>();
  require(state == "Recording" || state == "Finished", ErrorCode::Input, "bad walk state " + state);
  s.state = state == "Recording" ? ErwState::Recording : ErwState::Finished;
  if (j.contains("fixes")) {
    for (const auto& jf : j.at("fixes")) {
      GpsFix f{{jf.at("lat").get<double>(), jf.at("lon").get<double>()}, jf.at("ts_ms").get<TimestampMs>(), {}};
      if (jf.contains("accuracy_m") && !jf.at("accuracy_m").is_null()) f.accuracy_m = jf.at("accuracy_m").get<double>();
      s.fixes.push_back(f);
    }
  }
  for (const auto& jp : j.at("candidate_pois")) {
    Poi p = poi_from_json(jp);
    if (jp.contains("captured_by")) {
      s.capture_roles[p.id] = jp.at("captured_by") == "User" ? CaptureRole::User : CaptureRole::Trainer;
    }
    s.candidate_pois.push_back(std::move(p));
  }
  s.video_ref = j.value("video_ref", "");
  s.started_ts = j.at("started_ts_ms").get<TimestampMs>();
  if (!j.at("ended_ts_ms").is_null()) s.ended_ts = j.at("ended_ts_ms").get<TimestampMs>();
  return s;
}

TransferPackage build_transfer_package(const ErwSession& session, TransferDestination destination,
                                       const MediaLibrary& media) {
  require(session.state == ErwState::Finished, ErrorCode::State, "only finished walks can be packaged");
  if (destination == TransferDestination::Cloud) {
    fail(ErrorCode::Classification, "raw-erw-is-not-cloud-syncable");
  }
  TransferPackage pkg;
  pkg.session_id = session.id;
  pkg.destination = destination;

  auto add = [&](std::string id, ItemKind kind, std::string path, std::string bytes, DataClass cls) {
    ManifestItem item{std::move(id), std::string(to_string(kind)), cls, sha256_hex(bytes), path, false};
    pkg.items.push_back(std::move(item));
    pkg.payload.emplace(std::move(path), std::move(bytes));
  };

  add(session.id, ItemKind::RawErwSession, kSessionPath, session_meta(session).dump(2),
      classify(ItemKind::RawErwSession));
  std::ostringstream trace;
  write_trace_csv(trace, session.fixes);
  add(session.id + "/trace", ItemKind::RawErwSession, kTracePath, trace.str(), classify(ItemKind::RawErwSession));

  std::vector<std::string> seen;
  for (const auto& poi : session.candidate_pois) {
    for (const auto& photo : poi.photos) {
      if (std::find(seen.begin(), seen.end(), photo) != seen.end()) continue;
      seen.push_back(photo);
      add(photo, ItemKind::PoiPhoto, "photos/" + photo, media.get(photo).bytes, classify(ItemKind::PoiPhoto, false));
    }
  }
  // Direct link to the trainer's own device is the only place video may go.
  if (!session.video_ref.empty()) {
    add(session.video_ref, ItemKind::VideoAsset, "video/" + session.video_ref, media.get(session.video_ref).bytes,
        classify(ItemKind::VideoAsset));
  }
  return pkg;
}

void verify_package(const TransferPackage& package) {
  for (const auto& item : package.items) {
    const auto it = package.payload.find(item.path);
    require(it != package.payload.end(), ErrorCode::Integrity, "payload missing for item " + item.id);
    require(sha256_hex(it->second) == item.sha256, ErrorCode::Integrity, "hash mismatch for item " + item.id);
  }
  require(package.payload.size() == package.items.size(), ErrorCode::Integrity,
          "payload carries files not listed in the manifest");
}

void write_package(const TransferPackage& package, const std::filesystem::path& dir) {
  verify_package(package);
  std::filesystem::create_directories(dir);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : package.items) {
    require(safe_relative(item.path), ErrorCode::Integrity, "unsafe package path " + item.path);
    items.push_back(to_json(item));
    const auto target = dir / item.path;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary);
    out << package.payload.at(item.path);
  }
  nlohmann::json manifest{
      {"session_id", package.session_id},
      {"destination", package.destination == TransferDestination::TrainerDevice ? "TrainerDevice" : "Cloud"},
      {"items", items}};
  std::ofstream(dir / kManifestFile) << manifest.dump(2) << '\n';
}

TransferPackage read_package(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / kManifestFile));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Integrity, std::string("unreadable manifest: ") + e.what());
  }
  TransferPackage pkg;
  pkg.session_id = manifest.at("session_id").get<std::string>();
  pkg.destination = manifest.at("destination") == "Cloud" ? TransferDestination::Cloud
                                                          : TransferDestination::TrainerDevice;
  for (const auto& j : manifest.at("items")) {
    ManifestItem item = manifest_item_from_json(j);
    require(safe_relative(item.path), ErrorCode::Integrity, "unsafe package path " + item.path);
    pkg.payload[item.path] = read_file(dir / item.path);
    pkg.items.push_back(std::move(item));
  }
  verify_package(pkg);
  return pkg;
}

ErwSession accept_package(const TransferPackage& package, MediaLibrary& media) {
  verify_package(package);
  ErwSession session = erw_from_json(nlohmann::json::parse(package.payload.at(kSessionPath)));
  std::istringstream trace(package.payload.at(kTracePath));
  session.fixes = read_trace_csv(trace);
  for (const auto& item : package.items) {
    const auto kind = parse_item_kind(item.kind);
    if (kind == ItemKind::PoiPhoto || kind == ItemKind::VideoAsset) {
      media.put({item.id, package.payload.at(item.path)});
    }
  }
  return session;
}

}  // namespace waytrain
