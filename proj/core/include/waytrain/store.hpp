#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/design.hpp"
#include "waytrain/engine.hpp"
#include "waytrain/erw.hpp"
#include "waytrain/media.hpp"
#include "waytrain/privacy.hpp"
#include "waytrain/route.hpp"

namespace waytrain {

enum class EntityKind { Way, Erw, Negotiation, Session, Media };

/// Stored document together with its revision.
struct Document {
  nlohmann::json json;
  int rev = 0;
};

/// Directory-per-entity store of canonical JSON files. `index.json` records
/// the SHA-256 and revision of every file; a file that no longer matches its
/// hash fails to load with Integrity. Writes go through a temporary file and
/// a rename.
///
///   ways/<id>.json  erw/<id>.json  negotiations/<id>.json
///   routes/<id>/v<version>.json
///   sessions/<id>/record.json  sessions/<id>/events.ndjson
///   media/<id>  consent/ledger.ndjson  cloud/...
class Store {
public:
  /// Opens (creating if needed) the store under `root`. Throws Integrity on a corrupt index.
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// expected_rev: 0 means "must not exist yet", n > 0 means "must be at rev n",
  /// empty means unconditional. Returns the new revision; throws Conflict.
  int put(EntityKind kind, const std::string& id, const nlohmann::json& doc, std::optional<int> expected_rev);
  /// Throws NotFound or Integrity.
  Document get(EntityKind kind, const std::string& id) const;
  bool exists(EntityKind kind, const std::string& id) const;
  std::vector<std::string> list(EntityKind kind) const;

  // Typed helpers.
  void create_way(const Way& way);
  Way load_way(const std::string& id) const;

  /// Stores the next version of a route. The route's version must be exactly
  /// one above the stored latest (or any version for a new id); otherwise
  /// Conflict. Writes to one route id are serialized.
  void put_route(const RouteDefinition& route);
  RouteDefinition load_route(const std::string& id, std::optional<int> version = std::nullopt) const;
  std::vector<int> route_versions(const std::string& id) const;
  std::vector<std::string> route_ids() const;

  int put_erw(const ErwSession& session, std::optional<int> expected_rev);
  std::pair<ErwSession, int> load_erw(const std::string& id) const;

  int put_negotiation(const NegotiationSession& neg, std::optional<int> expected_rev);
  std::pair<NegotiationSession, int> load_negotiation(const std::string& id) const;

  /// Records are written once.
  void put_session_record(const SessionRecord& record);
  SessionRecord load_session_record(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  /// Live event log of a session, appended while it runs.
  void append_event(const TrainingEvent& event);
  std::vector<TrainingEvent> load_event_log(const std::string& session_id) const;

  void put_media(const MediaAsset& asset, ItemKind kind);
  MediaAsset load_media(const std::string& id) const;
  ItemKind media_kind(const std::string& id) const;
  std::vector<std::string> media_ids() const;

  std::filesystem::path consent_ledger_path() const;
  std::filesystem::path cloud_dir() const;

private:
  struct IndexEntry {
    std::string sha256;
    int rev = 0;
    std::string kind;  // media only
  };

  std::string relpath(EntityKind kind, const std::string& id) const;
  void write_file(const std::string& rel, const std::string& bytes, std::optional<int> expected_rev,
                  const std::string& media_kind = {});
  std::string read_file(const std::string& rel) const;
  void save_index() const;
  std::mutex& route_mutex(const std::string& id);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, IndexEntry> index_;
  std::map<std::string, std::unique_ptr<std::mutex>> route_locks_;
  mutable std::mutex log_mutex_;
};

/// Rejects ids that could escape their directory.
void check_entity_id(const std::string& id);

}  // namespace waytrain
