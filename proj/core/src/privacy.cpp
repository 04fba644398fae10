#include "waytrain/privacy.hpp"

#include <algorithm>
#include <fstream>

#include "waytrain/error.hpp"
#include "waytrain/media.hpp"

namespace waytrain {
namespace {

constexpr std::int64_t kDayMs = 86'400'000;

std::int64_t utc_day(TimestampMs ts) {
  return ts >= 0 ? ts / kDayMs : (ts - kDayMs + 1) / kDayMs;
}

}  // namespace

std::string_view to_string(DataClass c) {
  switch (c) {
    case DataClass::LocalOnly: return "LOCAL_ONLY";
    case DataClass::PeerTransferable: return "PEER";
    case DataClass::CloudSyncable: return "CLOUD";
  }
  return "?";
}

DataClass parse_data_class(std::string_view s) {
  if (s == "LOCAL_ONLY") return DataClass::LocalOnly;
  if (s == "PEER") return DataClass::PeerTransferable;
  if (s == "CLOUD") return DataClass::CloudSyncable;
  fail(ErrorCode::Classification, "unknown data class '" + std::string(s) + "'");
}

std::string_view to_string(ItemKind k) {
  switch (k) {
    case ItemKind::VideoAsset: return "VideoAsset";
    case ItemKind::RawErwSession: return "RawErwSession";
    case ItemKind::PoiPhoto: return "PoiPhoto";
    case ItemKind::WorkingRoute: return "WorkingRoute";
    case ItemKind::SessionRecord: return "SessionRecord";
    case ItemKind::NegotiationTranscript: return "NegotiationTranscript";
  }
  return "?";
}

ItemKind parse_item_kind(std::string_view s) {
  for (ItemKind k : {ItemKind::VideoAsset, ItemKind::RawErwSession, ItemKind::PoiPhoto,
                     ItemKind::WorkingRoute, ItemKind::SessionRecord, ItemKind::NegotiationTranscript}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::Classification, "unknown item kind '" + std::string(s) + "'");
}

DataClass classify(ItemKind kind, bool curated) {
  switch (kind) {
    case ItemKind::VideoAsset: return DataClass::LocalOnly;
    case ItemKind::RawErwSession: return DataClass::PeerTransferable;
    case ItemKind::PoiPhoto: return curated ? DataClass::CloudSyncable : DataClass::PeerTransferable;
    case ItemKind::WorkingRoute:
    case ItemKind::SessionRecord:
    case ItemKind::NegotiationTranscript: return DataClass::CloudSyncable;
  }
  fail(ErrorCode::Classification, "unclassifiable item kind");
}

DataClass classify(std::string_view kind, bool curated) { return classify(parse_item_kind(kind), curated); }

nlohmann::json to_json(const ManifestItem& item) {
  return {{"id", item.id},     {"kind", item.kind}, {"class", to_string(item.data_class)},
          {"sha256", item.sha256}, {"path", item.path}, {"curated", item.curated}};
}

ManifestItem manifest_item_from_json(const nlohmann::json& j) {
  ManifestItem item;
  item.id = j.at("id").get<std::string>();
  item.kind = j.value("kind", "");
  item.data_class = parse_data_class(j.at("class").get<std::string>());
  item.sha256 = j.at("sha256").get<std::string>();
  item.path = j.value("path", "");
  item.curated = j.value("curated", false);
  return item;
}

GateResult gate_sync(const SyncManifest& manifest, SyncDestination destination, GateMode mode) {
  GateResult result;
  for (const auto& item : manifest.items) {
    bool allowed = false;
    try {
      const DataClass computed = classify(item.kind, item.curated);
      allowed = destination == SyncDestination::Peer ||
                (computed == DataClass::CloudSyncable && item.data_class == DataClass::CloudSyncable);
    } catch (const Error&) {
      allowed = false;  // unknown kind
    }
    if (allowed) {
      result.permitted.items.push_back(item);
    } else {
      result.rejected_ids.push_back(item.id);
    }
  }
  if (mode == GateMode::Strict && !result.rejected_ids.empty()) {
    std::string ids;
    for (const auto& id : result.rejected_ids) ids += (ids.empty() ? "" : ", ") + id;
    fail(ErrorCode::SyncPolicy,
         std::string(destination == SyncDestination::Cloud ? "cloud" : "peer") + " sync refused for: " + ids);
  }
  return result;
}

std::string_view to_string(ConsentScope s) {
  switch (s) {
    case ConsentScope::TrainingTelemetry: return "training-telemetry";
    case ConsentScope::ErwRecording: return "erw-recording";
  }
  return "?";
}

ConsentScope parse_consent_scope(std::string_view s) {
  if (s == "training-telemetry") return ConsentScope::TrainingTelemetry;
  if (s == "erw-recording") return ConsentScope::ErwRecording;
  fail(ErrorCode::Input, "unknown consent scope '" + std::string(s) + "'");
}

std::string ConsentRecord::id() const {
  const std::string key =
      user_id + '|' + std::string(to_string(scope)) + '|' + std::to_string(granted_ts) + '|' + disclosure_sha256;
  return "consent-" + sha256_hex(key).substr(0, 16);
}

nlohmann::json ConsentLedger::ledger_line(const ConsentRecord& record) {
  return {{"user_id", record.user_id},
          {"scope", to_string(record.scope)},
          {"granted_ts_ms", record.granted_ts},
          {"session_id", record.session_id ? nlohmann::json(*record.session_id) : nlohmann::json(nullptr)},
          {"disclosure_sha256", record.disclosure_sha256}};
}

ConsentLedger::ConsentLedger(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(*file_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Integrity, "consent ledger line " + std::to_string(line_no) + ": " + e.what());
    }
    ConsentRecord rec;
    rec.user_id = j.at("user_id").get<std::string>();
    rec.scope = parse_consent_scope(j.at("scope").get<std::string>());
    rec.granted_ts = j.at("granted_ts_ms").get<TimestampMs>();
    rec.disclosure_sha256 = j.at("disclosure_sha256").get<std::string>();
    if (!j.at("session_id").is_null()) rec.session_id = j.at("session_id").get<std::string>();
    const std::string id = rec.id();
    auto it = std::find_if(records_.begin(), records_.end(), [&](const auto& r) { return r.id() == id; });
    if (it == records_.end()) {
      records_.push_back(rec);
    } else if (rec.session_id) {
      it->session_id = rec.session_id;
    }
  }
}

void ConsentLedger::append_line(const ConsentRecord& record) {
  if (!file_) return;
  std::ofstream out(*file_, std::ios::app);
  out << ledger_line(record).dump() << '\n';
  require(static_cast<bool>(out), ErrorCode::Integrity, "cannot append to consent ledger");
}

ConsentRecord ConsentLedger::grant(const std::string& user_id, ConsentScope scope,
                                   const std::string& disclosure, TimestampMs granted_ts) {
  require(!disclosure.empty(), ErrorCode::Transparency,
          "consent needs the disclosure text that was shown to the user");
  require(!user_id.empty(), ErrorCode::Input, "consent needs a user id");
  ConsentRecord rec{user_id, scope, granted_ts, disclosure, sha256_hex(disclosure), std::nullopt};
  std::lock_guard lock(mutex_);
  const std::string id = rec.id();
  require(std::none_of(records_.begin(), records_.end(), [&](const auto& r) { return r.id() == id; }),
          ErrorCode::Conflict, "duplicate consent grant " + id);
  records_.push_back(rec);
  append_line(rec);
  return rec;
}

ConsentRecord ConsentLedger::spend(std::string_view consent_id, const std::string& session_id,
                                   ConsentScope scope, TimestampMs now_ts) {
  std::lock_guard lock(mutex_);
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const auto& r) { return r.id() == consent_id; });
  require(it != records_.end(), ErrorCode::ConsentRequired, "no consent record '" + std::string(consent_id) + "'");
  if (it->spent()) {
    fail(ErrorCode::ConsentRequired,
         "consent " + std::string(consent_id) + " was already used by session " + *it->session_id);
  }
  require(it->scope == scope, ErrorCode::ConsentRequired, "consent scope does not cover this activity");
  require(it->granted_ts <= now_ts && utc_day(it->granted_ts) == utc_day(now_ts), ErrorCode::ConsentRequired,
          "consent " + std::string(consent_id) + " is not valid for the current date");
  it->session_id = session_id;
  append_line(*it);
  return *it;
}

std::optional<ConsentRecord> ConsentLedger::find(std::string_view consent_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& r : records_) {
    if (r.id() == consent_id) return r;
  }
  return std::nullopt;
}

std::vector<ConsentRecord> ConsentLedger::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

}  // namespace waytrain
