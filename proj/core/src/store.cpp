#include "waytrain/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

constexpr const char* kIndexFile = "index.json";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const std::filesystem::path& target, const std::string& bytes) {
  std::filesystem::create_directories(target.parent_path());
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Integrity, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::Integrity, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

nlohmann::json parse_doc(const std::string& bytes, const std::string& rel) {
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Integrity, rel + " is not valid JSON: " + e.what());
  }
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }
bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void check_entity_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 && id != "." && id != ".." &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                           c == '_' || c == '.';
                  });
  require(ok, ErrorCode::Input, "invalid id '" + id + "'");
}

Store::Store(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
  const auto index_path = root_ / kIndexFile;
  if (!std::filesystem::exists(index_path)) return;
  const nlohmann::json j = parse_doc(slurp(index_path), kIndexFile);
  try {
    for (const auto& [rel, entry] : j.at("files").items()) {
      index_[rel] = {entry.at("sha256").get<std::string>(), entry.at("rev").get<int>(), entry.value("kind", "")};
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Integrity, std::string("malformed store index: ") + e.what());
  }
}

std::string Store::relpath(EntityKind kind, const std::string& id) const {
  check_entity_id(id);
  switch (kind) {
    case EntityKind::Way: return "ways/" + id + ".json";
    case EntityKind::Erw: return "erw/" + id + ".json";
    case EntityKind::Negotiation: return "negotiations/" + id + ".json";
    case EntityKind::Session: return "sessions/" + id + "/record.json";
    case EntityKind::Media: return "media/" + id;
  }
  return {};
}

void Store::save_index() const {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [rel, e] : index_) {
    nlohmann::json entry{{"sha256", e.sha256}, {"rev", e.rev}};
    if (!e.kind.empty()) entry["kind"] = e.kind;
    files[rel] = entry;
  }
  atomic_write(root_ / kIndexFile, nlohmann::json{{"files", files}}.dump(1) + "\n");
}

void Store::write_file(const std::string& rel, const std::string& bytes, std::optional<int> expected_rev,
                       const std::string& media_kind) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(rel);
  const int current = it == index_.end() ? 0 : it->second.rev;
  if (expected_rev && *expected_rev != current) {
    fail(ErrorCode::Conflict, rel + " is at revision " + std::to_string(current) + ", expected " +
                                  std::to_string(*expected_rev));
  }
  atomic_write(root_ / rel, bytes);
  index_[rel] = {sha256_hex(bytes), current + 1, media_kind};
  save_index();
}

std::string Store::read_file(const std::string& rel) const {
  std::string expected;
  {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(rel);
    require(it != index_.end(), ErrorCode::NotFound, rel + " not found");
    expected = it->second.sha256;
  }
  const std::string bytes = slurp(root_ / rel);
  require(sha256_hex(bytes) == expected, ErrorCode::Integrity, rel + " does not match its recorded hash");
  return bytes;
}

int Store::put(EntityKind kind, const std::string& id, const nlohmann::json& doc, std::optional<int> expected_rev) {
  const std::string rel = relpath(kind, id);
  write_file(rel, canonical_dump(doc), expected_rev);
  std::lock_guard lock(mutex_);
  return index_.at(rel).rev;
}

Document Store::get(EntityKind kind, const std::string& id) const {
  const std::string rel = relpath(kind, id);
  const std::string bytes = read_file(rel);
  std::lock_guard lock(mutex_);
  return {parse_doc(bytes, rel), index_.at(rel).rev};
}

bool Store::exists(EntityKind kind, const std::string& id) const {
  const std::string rel = relpath(kind, id);
  std::lock_guard lock(mutex_);
  return index_.contains(rel);
}

std::vector<std::string> Store::list(EntityKind kind) const {
  std::string prefix, suffix;
  switch (kind) {
    case EntityKind::Way: prefix = "ways/", suffix = ".json"; break;
    case EntityKind::Erw: prefix = "erw/", suffix = ".json"; break;
    case EntityKind::Negotiation: prefix = "negotiations/", suffix = ".json"; break;
    case EntityKind::Session: prefix = "sessions/", suffix = "/record.json"; break;
    case EntityKind::Media: prefix = "media/"; break;
  }
  std::vector<std::string> ids;
  std::lock_guard lock(mutex_);
  for (const auto& [rel, e] : index_) {
    if (starts_with(rel, prefix) && ends_with(rel, suffix)) {
      ids.push_back(rel.substr(prefix.size(), rel.size() - prefix.size() - suffix.size()));
    }
  }
  return ids;
}

void Store::create_way(const Way& way) { put(EntityKind::Way, way.id, to_json(way), 0); }

Way Store::load_way(const std::string& id) const { return way_from_json(get(EntityKind::Way, id).json); }

std::mutex& Store::route_mutex(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& slot = route_locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::vector<int> Store::route_versions(const std::string& id) const {
  check_entity_id(id);
  const std::string prefix = "routes/" + id + "/v";
  std::vector<int> versions;
  std::lock_guard lock(mutex_);
  for (const auto& [rel, e] : index_) {
    if (starts_with(rel, prefix) && ends_with(rel, ".json")) {
      versions.push_back(std::stoi(rel.substr(prefix.size(), rel.size() - prefix.size() - 5)));
    }
  }
  std::sort(versions.begin(), versions.end());
  return versions;
}

std::vector<std::string> Store::route_ids() const {
  std::vector<std::string> ids;
  std::lock_guard lock(mutex_);
  for (const auto& [rel, e] : index_) {
    if (!starts_with(rel, "routes/")) continue;
    const auto slash = rel.find('/', 7);
    std::string id = rel.substr(7, slash - 7);
    if (ids.empty() || ids.back() != id) ids.push_back(std::move(id));
  }
  return ids;
}

void Store::put_route(const RouteDefinition& route) {
  check_entity_id(route.id);
  std::lock_guard route_lock(route_mutex(route.id));
  const auto versions = route_versions(route.id);
  if (!versions.empty()) {
    require(route.version == versions.back() + 1, ErrorCode::Conflict,
            "route " + route.id + " is at version " + std::to_string(versions.back()) + "; version " +
                std::to_string(route.version) + " does not follow it");
  }
  write_file("routes/" + route.id + "/v" + std::to_string(route.version) + ".json", canonical_dump(to_json(route)), 0);
}

RouteDefinition Store::load_route(const std::string& id, std::optional<int> version) const {
  int v = 0;
  if (version) {
    v = *version;
  } else {
    const auto versions = route_versions(id);
    require(!versions.empty(), ErrorCode::NotFound, "route " + id + " not found");
    v = versions.back();
  }
  const std::string rel = "routes/" + id + "/v" + std::to_string(v) + ".json";
  return route_from_json(parse_doc(read_file(rel), rel));
}

int Store::put_erw(const ErwSession& session, std::optional<int> expected_rev) {
  return put(EntityKind::Erw, session.id, to_json(session), expected_rev);
}

std::pair<ErwSession, int> Store::load_erw(const std::string& id) const {
  const auto doc = get(EntityKind::Erw, id);
  return {erw_from_json(doc.json), doc.rev};
}

int Store::put_negotiation(const NegotiationSession& neg, std::optional<int> expected_rev) {
  return put(EntityKind::Negotiation, neg.id, to_json(neg), expected_rev);
}

std::pair<NegotiationSession, int> Store::load_negotiation(const std::string& id) const {
  const auto doc = get(EntityKind::Negotiation, id);
  return {negotiation_from_json(doc.json), doc.rev};
}

void Store::put_session_record(const SessionRecord& record) {
  put(EntityKind::Session, record.session_id, to_json(record), 0);
}

SessionRecord Store::load_session_record(const std::string& id) const {
  return session_record_from_json(get(EntityKind::Session, id).json);
}

std::vector<std::string> Store::session_ids() const { return list(EntityKind::Session); }

void Store::append_event(const TrainingEvent& event) {
  check_entity_id(event.session_id);
  const auto path = root_ / "sessions" / event.session_id / "events.ndjson";
  std::lock_guard lock(log_mutex_);
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << to_json(event).dump() << '\n';
  require(static_cast<bool>(out), ErrorCode::Integrity, "cannot append to " + path.string());
}

std::vector<TrainingEvent> Store::load_event_log(const std::string& session_id) const {
  check_entity_id(session_id);
  const auto path = root_ / "sessions" / session_id / "events.ndjson";
  std::lock_guard lock(log_mutex_);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::NotFound, "no event log for session " + session_id);
  auto events = read_event_log(in);
  for (std::size_t i = 0; i < events.size(); ++i) {
    require(events[i].seq == i + 1, ErrorCode::Integrity, "event log of " + session_id + " has a sequence gap");
  }
  return events;
}

void Store::put_media(const MediaAsset& asset, ItemKind kind) {
  write_file(relpath(EntityKind::Media, asset.id), asset.bytes, std::nullopt, std::string(to_string(kind)));
}

MediaAsset Store::load_media(const std::string& id) const { return {id, read_file(relpath(EntityKind::Media, id))}; }

ItemKind Store::media_kind(const std::string& id) const {
  const std::string rel = relpath(EntityKind::Media, id);
  std::lock_guard lock(mutex_);
  const auto it = index_.find(rel);
  require(it != index_.end(), ErrorCode::NotFound, "media " + id + " not found");
  return parse_item_kind(it->second.kind);
}

std::vector<std::string> Store::media_ids() const { return list(EntityKind::Media); }

std::filesystem::path Store::consent_ledger_path() const { return root_ / "consent" / "ledger.ndjson"; }

std::filesystem::path Store::cloud_dir() const { return root_ / "cloud"; }

}  // namespace waytrain
