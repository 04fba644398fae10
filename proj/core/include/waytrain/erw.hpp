#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/geo.hpp"
#include "waytrain/media.hpp"
#include "waytrain/privacy.hpp"
#include "waytrain/route.hpp"

namespace waytrain {

enum class ErwState { Recording, Finished };
enum class CaptureRole { Trainer, User };

std::string_view to_string(ErwState s);
std::string_view to_string(CaptureRole r);

/// Raw capture of one exploratory route walk.
struct ErwSession {
  std::string id;
  std::string way_id;
  ErwState state = ErwState::Recording;
  std::vector<GpsFix> fixes;
  std::vector<Poi> candidate_pois;
  /// poi id -> who pressed capture. Recorded only; nothing consumes it yet.
  std::map<std::string, CaptureRole> capture_roles;
  std::string video_ref;  // LocalOnly media asset id, may be empty
  TimestampMs started_ts = 0;
  std::optional<TimestampMs> ended_ts;

  friend bool operator==(const ErwSession&, const ErwSession&) = default;
};

ErwSession start_erw_session(std::string id, std::string way_id, TimestampMs started_ts,
                             std::string video_ref = {});

/// Throws State on a finished session, Ordering unless fix.ts_ms is strictly
/// after the previous fix.
ErwSession append_fix(ErwSession session, const GpsFix& fix);

/// Adds a Candidate/Pending POI at `at`. Throws PhotoRequired without photos.
ErwSession capture_poi(ErwSession session, const GpsFix& at, std::vector<std::string> photos,
                       std::string note, CaptureRole role = CaptureRole::Trainer);

struct FinishedWalk {
  ErwSession session;
  Polyline path;
};

/// Seals the session and reconstructs the walked path by simplification.
FinishedWalk finish_session(ErwSession session, double tolerance_m = kDefaultSimplifyToleranceM);

nlohmann::json to_json(const ErwSession& session);
ErwSession erw_from_json(const nlohmann::json& j);

enum class TransferDestination { TrainerDevice, Cloud };

struct TransferPackage {
  std::string session_id;
  TransferDestination destination = TransferDestination::TrainerDevice;
  std::vector<ManifestItem> items;
  /// path -> bytes, one entry per manifest item.
  std::map<std::string, std::string> payload;
};

/// Packages a finished walk for the direct link to the trainer's device. A raw
/// walk never goes to the cloud: Cloud throws Classification.
TransferPackage build_transfer_package(const ErwSession& session, TransferDestination destination,
                                       const MediaLibrary& media);

/// Throws Integrity when a payload is missing or its hash differs from the manifest.
void verify_package(const TransferPackage& package);

/// Directory layout: manifest.json plus one file per item path.
void write_package(const TransferPackage& package, const std::filesystem::path& dir);
TransferPackage read_package(const std::filesystem::path& dir);

/// Verifies and unpacks a package on the receiving device.
ErwSession accept_package(const TransferPackage& package, MediaLibrary& media);

}  // namespace waytrain
