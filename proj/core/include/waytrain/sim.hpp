#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "waytrain/engine.hpp"
#include "waytrain/route.hpp"

namespace waytrain {

/// Generator id written into every walk file.
inline constexpr const char* kSimPrngId = "mt19937_64+box-muller";

/// Seeded source shared by the walk generator and the random route builder.
class SimRng {
public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [lo, hi) from the top 53 bits of one draw.
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi].
  long uniform_int(long lo, long hi);
  /// Standard normal by Box-Muller; draws come in pairs.
  double gaussian();

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Leaves the route at decision point `landmark` (index into the route's
/// confirmed landmarks). The bearing is relative to the route heading just
/// after the landmark.
struct WrongTurn {
  std::size_t landmark = 0;
  double branch_bearing_deg = 90.0;
  double length_m = 60.0;
};
/// Walk back from the wrong turn at `landmark` and carry on along the route.
struct ReturnToRoute {
  std::size_t landmark = 0;
};
struct Pause {
  double at_m = 0.0;
  double duration_s = 0.0;
};
/// No fixes while the walker is within [from_m, to_m].
struct SignalLoss {
  double from_m = 0.0;
  double to_m = 0.0;
};
/// Walker keeps progressing but is shifted sideways by offset_m (positive is
/// right of the walking direction) while within [from_m, to_m).
struct Drift {
  double from_m = 0.0;
  double to_m = 0.0;
  double offset_m = 0.0;
};

using Behavior = std::variant<WrongTurn, ReturnToRoute, Pause, SignalLoss, Drift>;

enum class QuizPolicyKind { AlwaysCorrect, AlwaysWrong, Scripted };

struct QuizPolicy {
  QuizPolicyKind kind = QuizPolicyKind::AlwaysCorrect;
  /// Scripted answers in prompt order (true = correct); later prompts are answered correctly.
  std::vector<bool> script;
};

struct WalkerProfile {
  double speed_mps = 1.3;
  double fix_interval_s = 1.0;
  double gps_noise_sigma_m = 0.0;
  std::vector<Behavior> behaviors;
  QuizPolicy quiz_policy;
  std::uint64_t seed = 0;
  TimestampMs start_ts = 1'750'000'000'000;
};

nlohmann::json to_json(const WalkerProfile& p);
WalkerProfile profile_from_json(const nlohmann::json& j);
/// First 16 hex digits of the SHA-256 of the canonical profile JSON.
std::string profile_hash(const WalkerProfile& p);

/// Throws Profile for invalid or overlapping behaviors.
void validate_profile(const WalkerProfile& profile, const RouteDefinition& route);

/// Ground truth: a contiguous run of fixes whose true position lies >= 30 m
/// off the route.
struct TrueDeviation {
  std::string cause;  // "wrong_turn" or "drift"
  std::string landmark_id;
  std::size_t first_fix = 0;
  std::size_t last_fix = 0;
  TimestampMs start_ts = 0;
  TimestampMs end_ts = 0;
  double max_offset_m = 0.0;
};

/// A sideways shift that stays below the off-track threshold.
struct TrueJitter {
  TimestampMs start_ts = 0;
  TimestampMs end_ts = 0;
  double offset_m = 0.0;
};

struct TrueDecision {
  std::string poi_id;
  bool correct = true;
};

struct SignalGap {
  TimestampMs from_ts = 0;
  TimestampMs to_ts = 0;
};

struct WalkAnnotations {
  std::vector<TrueDeviation> deviations;
  std::vector<TrueJitter> jitters;
  std::vector<TrueDecision> decisions;
  std::vector<SignalGap> signal_gaps;
};

struct ScriptedWalk {
  std::string route_id;
  int route_version = 0;
  std::string profile_hash;
  std::uint64_t seed = 0;
  std::string prng = kSimPrngId;
  std::vector<GpsFix> fixes;
  /// Noise-free along-track and cross-track distance of each fix.
  std::vector<double> true_along_m;
  std::vector<double> true_cross_m;
  WalkAnnotations annotations;
};

/// Throws State for a non-Working route and Profile for a bad profile.
ScriptedWalk generate_trace(const RouteDefinition& route, const WalkerProfile& profile, std::uint64_t seed);

/// Walk file: one JSON header line, then the trace CSV.
void write_walk_file(std::ostream& out, const ScriptedWalk& walk);
ScriptedWalk read_walk_file(std::istream& in);
nlohmann::json annotations_to_json(const WalkAnnotations& a);

struct SimOptions {
  EngineThresholds thresholds;
  TrainingSession::Observer observer;
  /// Ledger and record to spend; without them a one-off grant is made for the run.
  ConsentLedger* consent = nullptr;
  std::string consent_id;
  std::string session_id;  // derived from the inputs when empty
  std::optional<int> confidence;
  ScriptedWalk* walk_out = nullptr;
};

/// Drives a training session with a generated walk and returns its record.
SessionRecord run_simulation(const RouteDefinition& route, const TrainingConfig& config, const WalkerProfile& profile,
                             std::uint64_t seed, const SimOptions& options = {});

struct RandomRouteOptions {
  GeoPoint origin{52.02, 8.53};
  double min_length_m = 1000.0;
  double max_length_m = 3000.0;
  int min_pois = 3;
  int max_pois = 8;
  double min_segment_m = 150.0;
  double max_segment_m = 400.0;
  double min_turn_deg = 30.0;
  double max_turn_deg = 90.0;
  /// Modes of equal-length sub-paths; a single Actionable sub-path when empty.
  std::vector<SupportMode> subpath_modes;
};

/// Working route with confirmed landmarks at turns and reassurances along
/// the straights.
RouteDefinition random_route(std::uint64_t seed, const RandomRouteOptions& options = {});

}  // namespace waytrain
