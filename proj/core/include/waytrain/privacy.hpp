#pragma once

#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/geo.hpp"

namespace waytrain {

/// Where an artifact may travel: the capturing phone only, the trainer's
/// device over a direct link, or the cloud.
enum class DataClass { LocalOnly, PeerTransferable, CloudSyncable };

/// Wire names: LOCAL_ONLY, PEER, CLOUD.
std::string_view to_string(DataClass c);
DataClass parse_data_class(std::string_view s);

enum class ItemKind {
  VideoAsset,
  RawErwSession,
  PoiPhoto,
  WorkingRoute,
  SessionRecord,
  NegotiationTranscript,
};

std::string_view to_string(ItemKind k);
/// Throws Classification for names outside the kind enumeration.
ItemKind parse_item_kind(std::string_view s);

/// Total over ItemKind. `curated` only matters for photos: a photo becomes
/// cloud-syncable once it is part of a curated route.
DataClass classify(ItemKind kind, bool curated = false);
DataClass classify(std::string_view kind, bool curated = false);

struct ManifestItem {
  std::string id;
  std::string kind;
  DataClass data_class = DataClass::LocalOnly;
  std::string sha256;
  std::string path;
  bool curated = false;

  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

nlohmann::json to_json(const ManifestItem& item);
ManifestItem manifest_item_from_json(const nlohmann::json& j);

struct SyncManifest {
  std::vector<ManifestItem> items;

  friend bool operator==(const SyncManifest&, const SyncManifest&) = default;
};

enum class SyncDestination { Peer, Cloud };
enum class GateMode { Strict, Lenient };

struct GateResult {
  SyncManifest permitted;
  std::vector<std::string> rejected_ids;
};

/// Cloud admits only items that are CloudSyncable both as declared and as
/// classified; Peer admits every item of a known kind. Strict mode throws
/// SyncPolicy naming the offending items instead of filtering.
GateResult gate_sync(const SyncManifest& manifest, SyncDestination destination,
                     GateMode mode = GateMode::Strict);

enum class ConsentScope { TrainingTelemetry, ErwRecording };

std::string_view to_string(ConsentScope s);
ConsentScope parse_consent_scope(std::string_view s);

/// Single-use permission grant shown to the trainee before one session.
struct ConsentRecord {
  std::string user_id;
  ConsentScope scope = ConsentScope::TrainingTelemetry;
  TimestampMs granted_ts = 0;
  std::string disclosure;
  std::string disclosure_sha256;
  std::optional<std::string> session_id;

  /// Stable id derived from (user, scope, granted_ts, disclosure hash).
  std::string id() const;
  bool spent() const { return session_id.has_value(); }

  friend bool operator==(const ConsentRecord&, const ConsentRecord&) = default;
};

/// Append-only consent ledger. Spending is an atomic check-and-mark; each grant
/// and each spend appends one line when the ledger is file-backed.
class ConsentLedger {
public:
  ConsentLedger() = default;
  /// Replays an existing ledger file (if any) and appends to it from then on.
  explicit ConsentLedger(std::filesystem::path file);

  ConsentLedger(const ConsentLedger&) = delete;
  ConsentLedger& operator=(const ConsentLedger&) = delete;

  /// Throws Transparency on empty disclosure text.
  ConsentRecord grant(const std::string& user_id, ConsentScope scope, const std::string& disclosure,
                      TimestampMs granted_ts);

  /// Marks the record as used by `session_id`. Throws ConsentRequired when the
  /// record is unknown, already spent, of another scope, or not from today's
  /// (UTC) date relative to `now_ts`.
  ConsentRecord spend(std::string_view consent_id, const std::string& session_id, ConsentScope scope,
                      TimestampMs now_ts);

  std::optional<ConsentRecord> find(std::string_view consent_id) const;
  std::vector<ConsentRecord> records() const;

  static nlohmann::json ledger_line(const ConsentRecord& record);

private:
  void append_line(const ConsentRecord& record);

  mutable std::mutex mutex_;
  std::vector<ConsentRecord> records_;
  std::optional<std::filesystem::path> file_;
};

}  // namespace waytrain
