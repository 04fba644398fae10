#include "waytrain/sim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "waytrain/error.hpp"
#include "waytrain/media.hpp"

namespace waytrain {
namespace {

constexpr double kTrueOffTrackM = 30.0;
constexpr double kTruthWindowM = 100.0;
constexpr const char* kSimDisclosure =
    "Simulated trainee: position, prompts and answers are recorded for this practice session.";

std::string hex16(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

struct Interval {
  double lo;
  double hi;
  std::string what;
};

struct Leg {
  enum Kind { Route, Out, Back, Still } kind = Route;
  double duration_s = 0.0;
  double from_m = 0.0;  // Route
  double to_m = 0.0;    // Route
  double at_m = 0.0;    // anchor for Out/Back/Still
  GeoPoint origin;
  double bearing_deg = 0.0;
  double length_m = 0.0;
  std::string landmark_id;
};

Leg route_leg(double from, double to, double speed) {
  Leg leg;
  leg.duration_s = (to - from) / speed;
  leg.from_m = from;
  leg.to_m = to;
  return leg;
}

struct TruePosition {
  GeoPoint point;
  double along_m;
  const Leg* leg;
  double route_along_m;  // Route legs only, else the anchor
};

GeoPoint offset_point(GeoPoint p, double bearing_deg, double distance_m) {
  if (distance_m == 0.0) return p;
  if (distance_m < 0.0) return destination_point(p, bearing_deg + 180.0, -distance_m);
  return destination_point(p, bearing_deg, distance_m);
}

double drift_offset(const std::vector<Drift>& drifts, double along) {
  for (const auto& d : drifts) {
    if (along >= d.from_m && along < d.to_m) return d.offset_m;
  }
  return 0.0;
}

GeoPoint add_noise(GeoPoint p, double east_m, double north_m) {
  constexpr double rad_to_deg = 180.0 / std::numbers::pi;
  const double lat = p.lat + north_m / kEarthRadiusM * rad_to_deg;
  const double lon = p.lon + east_m / (kEarthRadiusM * std::cos(p.lat / rad_to_deg)) * rad_to_deg;
  return {std::clamp(lat, -90.0, 90.0), lon};
}

nlohmann::json behavior_to_json(const Behavior& b) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WrongTurn>) {
          return {{"type", "WrongTurn"}, {"landmark", v.landmark}, {"branch_bearing_deg", v.branch_bearing_deg},
                  {"length_m", v.length_m}};
        } else if constexpr (std::is_same_v<T, ReturnToRoute>) {
          return {{"type", "ReturnToRoute"}, {"landmark", v.landmark}};
        } else if constexpr (std::is_same_v<T, Pause>) {
          return {{"type", "Pause"}, {"at_m", v.at_m}, {"duration_s", v.duration_s}};
        } else if constexpr (std::is_same_v<T, SignalLoss>) {
          return {{"type", "SignalLoss"}, {"from_m", v.from_m}, {"to_m", v.to_m}};
        } else {
          return {{"type", "Drift"}, {"from_m", v.from_m}, {"to_m", v.to_m}, {"offset_m", v.offset_m}};
        }
      },
      b);
}

Behavior behavior_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "WrongTurn") {
    return WrongTurn{j.at("landmark").get<std::size_t>(), j.value("branch_bearing_deg", 90.0), j.value("length_m", 60.0)};
  }
  if (type == "ReturnToRoute") return ReturnToRoute{j.at("landmark").get<std::size_t>()};
  if (type == "Pause") return Pause{j.at("at_m").get<double>(), j.at("duration_s").get<double>()};
  if (type == "SignalLoss") return SignalLoss{j.at("from_m").get<double>(), j.at("to_m").get<double>()};
  if (type == "Drift") return Drift{j.at("from_m").get<double>(), j.at("to_m").get<double>(), j.at("offset_m").get<double>()};
  fail(ErrorCode::Profile, "unknown behavior '" + type + "'");
}

std::string_view to_string(QuizPolicyKind k) {
  switch (k) {
    case QuizPolicyKind::AlwaysCorrect: return "AlwaysCorrect";
    case QuizPolicyKind::AlwaysWrong: return "AlwaysWrong";
    case QuizPolicyKind::Scripted: return "Scripted";
  }
  return "?";
}

}  // namespace

double SimRng::uniform(double lo, double hi) {
  const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

long SimRng::uniform_int(long lo, long hi) {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<long>(engine_() % span);
}

double SimRng::gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform(0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
  const double u2 = uniform(0.0, 1.0);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

nlohmann::json to_json(const WalkerProfile& p) {
  nlohmann::json behaviors = nlohmann::json::array();
  for (const auto& b : p.behaviors) behaviors.push_back(behavior_to_json(b));
  return {{"speed_mps", p.speed_mps},
          {"fix_interval_s", p.fix_interval_s},
          {"gps_noise_sigma_m", p.gps_noise_sigma_m},
          {"behaviors", behaviors},
          {"quiz_policy", {{"kind", to_string(p.quiz_policy.kind)}, {"script", p.quiz_policy.script}}},
          {"seed", p.seed},
          {"start_ts_ms", p.start_ts}};
}

WalkerProfile profile_from_json(const nlohmann::json& j) {
  WalkerProfile p;
  try {
    p.speed_mps = j.value("speed_mps", p.speed_mps);
    p.fix_interval_s = j.value("fix_interval_s", p.fix_interval_s);
    p.gps_noise_sigma_m = j.value("gps_noise_sigma_m", p.gps_noise_sigma_m);
    p.seed = j.value("seed", p.seed);
    p.start_ts = j.value("start_ts_ms", p.start_ts);
    if (j.contains("behaviors")) {
      for (const auto& b : j.at("behaviors")) p.behaviors.push_back(behavior_from_json(b));
    }
    if (j.contains("quiz_policy")) {
      const auto& q = j.at("quiz_policy");
      const std::string kind = q.value("kind", "AlwaysCorrect");
      if (kind == "AlwaysCorrect") {
        p.quiz_policy.kind = QuizPolicyKind::AlwaysCorrect;
      } else if (kind == "AlwaysWrong") {
        p.quiz_policy.kind = QuizPolicyKind::AlwaysWrong;
      } else if (kind == "Scripted") {
        p.quiz_policy.kind = QuizPolicyKind::Scripted;
      } else {
        fail(ErrorCode::Profile, "unknown quiz policy '" + kind + "'");
      }
      if (q.contains("script")) p.quiz_policy.script = q.at("script").get<std::vector<bool>>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Profile, std::string("bad profile: ") + e.what());
  }
  return p;
}

std::string profile_hash(const WalkerProfile& p) { return sha256_hex(canonical_dump(to_json(p))).substr(0, 16); }

void validate_profile(const WalkerProfile& profile, const RouteDefinition& route) {
  require(std::isfinite(profile.speed_mps) && profile.speed_mps > 0.0, ErrorCode::Profile, "speed must be positive");
  require(std::isfinite(profile.fix_interval_s) && profile.fix_interval_s > 0.0, ErrorCode::Profile,
          "fix interval must be positive");
  require(std::isfinite(profile.gps_noise_sigma_m) && profile.gps_noise_sigma_m >= 0.0, ErrorCode::Profile,
          "noise sigma must be non-negative");
  const auto landmarks = decision_points(route);
  const double length = route.length();
  std::vector<Interval> spans;
  std::vector<std::size_t> turns;
  std::vector<std::size_t> returns;
  for (const auto& b : profile.behaviors) {
    if (const auto* w = std::get_if<WrongTurn>(&b)) {
      require(w->landmark < landmarks.size(), ErrorCode::Profile,
              "wrong turn at landmark " + std::to_string(w->landmark) + " but the route has " +
                  std::to_string(landmarks.size()));
      require(w->length_m > 0.0, ErrorCode::Profile, "wrong turn length must be positive");
      const double a = landmarks[w->landmark].along_m;
      spans.push_back({a, a, "wrong turn"});
      turns.push_back(w->landmark);
    } else if (const auto* r = std::get_if<ReturnToRoute>(&b)) {
      require(std::find(returns.begin(), returns.end(), r->landmark) == returns.end(), ErrorCode::Profile,
              "duplicate return at landmark " + std::to_string(r->landmark));
      returns.push_back(r->landmark);
    } else if (const auto* p = std::get_if<Pause>(&b)) {
      require(p->at_m >= 0.0 && p->at_m <= length && p->duration_s > 0.0, ErrorCode::Profile, "pause out of range");
      spans.push_back({p->at_m, p->at_m, "pause"});
    } else if (const auto* s = std::get_if<SignalLoss>(&b)) {
      require(s->from_m >= 0.0 && s->from_m < s->to_m && s->to_m <= length, ErrorCode::Profile,
              "signal loss out of range");
      spans.push_back({s->from_m, s->to_m, "signal loss"});
    } else if (const auto* d = std::get_if<Drift>(&b)) {
      require(d->from_m >= 0.0 && d->from_m < d->to_m && d->to_m <= length, ErrorCode::Profile, "drift out of range");
      spans.push_back({d->from_m, d->to_m, "drift"});
    }
  }
  for (std::size_t r : returns) {
    require(std::find(turns.begin(), turns.end(), r) != turns.end(), ErrorCode::Profile,
            "return without a wrong turn at landmark " + std::to_string(r));
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      const bool overlap = spans[i].lo <= spans[j].hi && spans[j].lo <= spans[i].hi;
      require(!overlap, ErrorCode::Profile, spans[i].what + " overlaps " + spans[j].what);
    }
  }
}

ScriptedWalk generate_trace(const RouteDefinition& route, const WalkerProfile& profile, std::uint64_t seed) {
  require(route.status == RouteStatus::Working, ErrorCode::State, "walks are generated on Working routes only");
  validate_profile(profile, route);

  const Polyline& line = route.geometry;
  const double length = line.length();
  const auto landmarks = decision_points(route);
  const double v = profile.speed_mps;

  std::vector<Drift> drifts;
  std::vector<SignalLoss> losses;
  struct Stop {
    double at;
    const Behavior* behavior;
  };
  std::vector<Stop> stops;
  std::vector<std::size_t> returning;
  for (const auto& b : profile.behaviors) {
    if (const auto* d = std::get_if<Drift>(&b)) drifts.push_back(*d);
    if (const auto* s = std::get_if<SignalLoss>(&b)) losses.push_back(*s);
    if (const auto* p = std::get_if<Pause>(&b)) stops.push_back({p->at_m, &b});
    if (const auto* w = std::get_if<WrongTurn>(&b)) stops.push_back({landmarks[w->landmark].along_m, &b});
    if (const auto* r = std::get_if<ReturnToRoute>(&b)) returning.push_back(r->landmark);
  }
  std::stable_sort(stops.begin(), stops.end(), [](const Stop& a, const Stop& b) { return a.at < b.at; });

  std::vector<Leg> legs;
  double cursor = 0.0;
  bool stranded = false;
  for (const auto& stop : stops) {
    if (stop.at > cursor) {
      legs.push_back(route_leg(cursor, stop.at, v));
      cursor = stop.at;
    }
    if (const auto* p = std::get_if<Pause>(stop.behavior)) {
      Leg still;
      still.kind = Leg::Still;
      still.duration_s = p->duration_s;
      still.at_m = cursor;
      legs.push_back(still);
    } else if (const auto* w = std::get_if<WrongTurn>(stop.behavior)) {
      const double heading = line.segment_bearing(line.segment_at(std::min(cursor + 1e-6, length)));
      Leg out;
      out.kind = Leg::Out;
      out.duration_s = w->length_m / v;
      out.at_m = cursor;
      out.origin = line.point_at(cursor);
      out.bearing_deg = heading + w->branch_bearing_deg;
      out.length_m = w->length_m;
      out.landmark_id = landmarks[w->landmark].id;
      legs.push_back(out);
      if (std::find(returning.begin(), returning.end(), w->landmark) == returning.end()) {
        stranded = true;
        break;
      }
      Leg back = out;
      back.kind = Leg::Back;
      legs.push_back(back);
    }
  }
  if (!stranded && cursor < length) {
    legs.push_back(route_leg(cursor, length, v));
  }

  auto position = [&](const Leg& leg, double tau) -> TruePosition {
    switch (leg.kind) {
      case Leg::Route: {
        const double s = std::min(leg.to_m, leg.from_m + v * tau);
        const GeoPoint base = line.point_at(s);
        const double offset = drift_offset(drifts, s);
        const double bearing = line.segment_bearing(line.segment_at(s));
        return {offset_point(base, bearing + 90.0, offset), s, &leg, s};
      }
      case Leg::Out:
        return {offset_point(leg.origin, leg.bearing_deg, std::min(leg.length_m, v * tau)), leg.at_m, &leg, leg.at_m};
      case Leg::Back:
        return {offset_point(leg.origin, leg.bearing_deg, std::max(0.0, leg.length_m - v * tau)), leg.at_m, &leg,
                leg.at_m};
      case Leg::Still:
        return {line.point_at(leg.at_m), leg.at_m, &leg, leg.at_m};
    }
    return {line.point_at(0.0), 0.0, &leg, 0.0};
  };

  double total = 0.0;
  for (const auto& leg : legs) total += leg.duration_s;

  ScriptedWalk walk;
  walk.route_id = route.id;
  walk.route_version = route.version;
  walk.profile_hash = profile_hash(profile);
  walk.seed = seed;

  SimRng rng(seed);
  const double sigma = profile.gps_noise_sigma_m;
  std::vector<const Leg*> fix_leg;
  std::size_t leg_index = 0;
  double leg_start = 0.0;
  TimestampMs last_ts = -1;

  auto sample = [&](double t) {
    while (leg_index + 1 < legs.size() && t > leg_start + legs[leg_index].duration_s) {
      leg_start += legs[leg_index].duration_s;
      ++leg_index;
    }
    const double east = rng.gaussian() * sigma;
    const double north = rng.gaussian() * sigma;
    const TimestampMs ts = profile.start_ts + std::llround(t * 1000.0);
    if (legs.empty() || ts <= last_ts) return;
    const TruePosition truth = position(legs[leg_index], t - leg_start);
    if (truth.leg->kind == Leg::Route) {
      for (const auto& loss : losses) {
        if (truth.route_along_m >= loss.from_m && truth.route_along_m <= loss.to_m) return;
      }
    }
    GpsFix fix{sigma > 0.0 ? add_noise(truth.point, east, north) : truth.point, ts, std::nullopt};
    if (sigma > 0.0) fix.accuracy_m = sigma;
    const auto proj = project_onto_polyline(truth.point, line, {truth.along_m - kTruthWindowM, truth.along_m + kTruthWindowM});
    walk.fixes.push_back(fix);
    walk.true_along_m.push_back(truth.along_m);
    walk.true_cross_m.push_back(proj.cross_track);
    fix_leg.push_back(truth.leg);
    last_ts = ts;
  };

  const double dt = profile.fix_interval_s;
  double t = 0.0;
  for (long k = 0; t <= total + 1e-9; t = static_cast<double>(++k) * dt) sample(t);
  if (t - dt < total - 1e-6) sample(total);

  // Ground truth annotations.
  WalkAnnotations& notes = walk.annotations;
  for (std::size_t i = 0; i < walk.fixes.size();) {
    if (walk.true_cross_m[i] < kTrueOffTrackM) {
      ++i;
      continue;
    }
    TrueDeviation dev;
    dev.first_fix = i;
    dev.cause = fix_leg[i]->kind == Leg::Route ? "drift" : "wrong_turn";
    dev.landmark_id = fix_leg[i]->landmark_id;
    while (i < walk.fixes.size() && walk.true_cross_m[i] >= kTrueOffTrackM) {
      dev.max_offset_m = std::max(dev.max_offset_m, walk.true_cross_m[i]);
      dev.last_fix = i++;
    }
    dev.start_ts = walk.fixes[dev.first_fix].ts_ms;
    dev.end_ts = walk.fixes[dev.last_fix].ts_ms;
    notes.deviations.push_back(dev);
  }
  for (const auto& d : drifts) {
    if (std::abs(d.offset_m) >= kTrueOffTrackM) continue;
    TrueJitter jit{0, 0, d.offset_m};
    bool any = false;
    for (std::size_t i = 0; i < walk.fixes.size(); ++i) {
      if (fix_leg[i]->kind != Leg::Route) continue;
      const double a = walk.true_along_m[i];
      if (a >= d.from_m && a < d.to_m) {
        if (!any) jit.start_ts = walk.fixes[i].ts_ms;
        jit.end_ts = walk.fixes[i].ts_ms;
        any = true;
      }
    }
    if (any) notes.jitters.push_back(jit);
  }
  for (std::size_t k = 0; k < landmarks.size(); ++k) {
    const bool wrong = std::any_of(profile.behaviors.begin(), profile.behaviors.end(), [&](const Behavior& b) {
      const auto* w = std::get_if<WrongTurn>(&b);
      return w != nullptr && w->landmark == k;
    });
    notes.decisions.push_back({landmarks[k].id, !wrong});
  }
  for (std::size_t i = 1; i < walk.fixes.size(); ++i) {
    if (walk.fixes[i].ts_ms - walk.fixes[i - 1].ts_ms > std::llround(dt * 1000.0) + 1) {
      notes.signal_gaps.push_back({walk.fixes[i - 1].ts_ms, walk.fixes[i].ts_ms});
    }
  }
  return walk;
}

void write_walk_file(std::ostream& out, const ScriptedWalk& walk) {
  const nlohmann::json header{{"route_id", walk.route_id},
                              {"route_version", walk.route_version},
                              {"profile_hash", walk.profile_hash},
                              {"seed", walk.seed},
                              {"prng", walk.prng}};
  out << header.dump() << '\n';
  write_trace_csv(out, walk.fixes);
}

ScriptedWalk read_walk_file(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Input, "walk file is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Input, std::string("bad walk header: ") + e.what());
  }
  ScriptedWalk walk;
  walk.route_id = header.at("route_id").get<std::string>();
  walk.route_version = header.at("route_version").get<int>();
  walk.profile_hash = header.at("profile_hash").get<std::string>();
  walk.seed = header.at("seed").get<std::uint64_t>();
  walk.prng = header.at("prng").get<std::string>();
  walk.fixes = read_trace_csv(in);
  return walk;
}

nlohmann::json annotations_to_json(const WalkAnnotations& a) {
  nlohmann::json dev = nlohmann::json::array();
  for (const auto& d : a.deviations) {
    dev.push_back({{"cause", d.cause},
                   {"landmark_id", d.landmark_id.empty() ? nlohmann::json(nullptr) : nlohmann::json(d.landmark_id)},
                   {"first_fix", d.first_fix},
                   {"last_fix", d.last_fix},
                   {"start_ts_ms", d.start_ts},
                   {"end_ts_ms", d.end_ts},
                   {"max_offset_m", d.max_offset_m}});
  }
  nlohmann::json jit = nlohmann::json::array();
  for (const auto& j : a.jitters) {
    jit.push_back({{"start_ts_ms", j.start_ts}, {"end_ts_ms", j.end_ts}, {"offset_m", j.offset_m}});
  }
  nlohmann::json dec = nlohmann::json::array();
  for (const auto& d : a.decisions) dec.push_back({{"poi_id", d.poi_id}, {"correct", d.correct}});
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& g : a.signal_gaps) gaps.push_back({{"from_ts_ms", g.from_ts}, {"to_ts_ms", g.to_ts}});
  return {{"true_off_track", dev}, {"jitter", jit}, {"decisions", dec}, {"signal_gaps", gaps}};
}

SessionRecord run_simulation(const RouteDefinition& route, const TrainingConfig& config, const WalkerProfile& profile,
                             std::uint64_t seed, const SimOptions& options) {
  ScriptedWalk walk = generate_trace(route, profile, seed);
  std::string session_id = options.session_id;
  if (session_id.empty()) {
    session_id = "sim-" + hex16(stable_hash(route.id + "@" + std::to_string(route.version) + "/" + walk.profile_hash +
                                            "/" + std::to_string(seed)));
  }

  ConsentLedger local;
  ConsentLedger* ledger = options.consent;
  std::string consent_id = options.consent_id;
  if (ledger == nullptr) {
    ledger = &local;
    consent_id = local.grant("simulated-trainee", ConsentScope::TrainingTelemetry, kSimDisclosure, profile.start_ts).id();
  }

  auto session = TrainingSession::begin(session_id, route, config, *ledger, consent_id, profile.start_ts,
                                        options.thresholds, options.observer);
  std::size_t prompts = 0;
  for (const auto& fix : walk.fixes) {
    session.ingest_fix(fix);
    if (!session.open_quiz()) continue;
    const OpenQuiz quiz = *session.open_quiz();
    bool correct = true;
    switch (profile.quiz_policy.kind) {
      case QuizPolicyKind::AlwaysCorrect: break;
      case QuizPolicyKind::AlwaysWrong: correct = false; break;
      case QuizPolicyKind::Scripted:
        correct = prompts < profile.quiz_policy.script.size() ? profile.quiz_policy.script[prompts] : true;
        break;
    }
    ++prompts;
    std::string choice = quiz.correct_choice;
    if (!correct) {
      const auto it = std::find_if(quiz.choices.begin(), quiz.choices.end(),
                                   [&](const std::string& c) { return c != quiz.correct_choice; });
      choice = it != quiz.choices.end() ? *it : std::string("wrong-way");
    }
    session.answer_quiz(quiz.quiz_id, choice, fix.ts_ms);
  }
  TimestampMs end_ts = session.events().back().ts_ms;
  if (!walk.fixes.empty()) end_ts = std::max(end_ts, walk.fixes.back().ts_ms);
  end_ts += 1000;
  SessionRecord record = session.end(options.confidence, end_ts);
  if (options.walk_out != nullptr) *options.walk_out = std::move(walk);
  return record;
}

RouteDefinition random_route(std::uint64_t seed, const RandomRouteOptions& o) {
  require(o.min_segment_m > 0.0 && o.max_segment_m >= o.min_segment_m, ErrorCode::Input, "bad segment bounds");
  require(o.min_pois >= 1 && o.max_pois >= o.min_pois, ErrorCode::Input, "bad POI count bounds");
  SimRng rng(seed ^ 0x9e3779b97f4a7c15ULL);

  const double target = rng.uniform(o.min_length_m, o.max_length_m);
  const long n_min = std::max(2L, static_cast<long>(std::ceil(target / o.max_segment_m)));
  const long n_max = std::max(n_min, static_cast<long>(std::floor(target / o.min_segment_m)));
  const long n = rng.uniform_int(n_min, std::min(n_max, n_min + 3));
  std::vector<double> seg(static_cast<std::size_t>(n), target / static_cast<double>(n));
  for (long k = 0; k < 2 * n; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    if (i == j) continue;
    const double room = std::min(seg[i] - o.min_segment_m, o.max_segment_m - seg[j]);
    if (room <= 0.0) continue;
    const double amount = rng.uniform(0.0, room);
    seg[i] -= amount;
    seg[j] += amount;
  }

  std::vector<GeoPoint> vertices{o.origin};
  std::vector<double> turns;  // signed turn at each interior vertex, degrees
  double heading = rng.uniform(0.0, 360.0);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (i > 0) {
      const double turn = rng.uniform(o.min_turn_deg, o.max_turn_deg) * (rng.uniform_int(0, 1) == 0 ? -1.0 : 1.0);
      turns.push_back(turn);
      heading = std::fmod(heading + turn + 360.0, 360.0);
    }
    vertices.push_back(destination_point(vertices.back(), heading, seg[i]));
  }

  RouteDefinition route{.id = "rr-" + hex16(seed).substr(8),
                        .way_id = "",
                        .geometry = Polyline(vertices),
                        .pois = {},
                        .subpaths = {},
                        .status = RouteStatus::Working,
                        .version = 1};
  route.way_id = "way-" + route.id;

  // Landmarks sit on turns, reassurances at thirds of the straights.
  std::vector<std::size_t> turn_slots(turns.size());
  for (std::size_t i = 0; i < turn_slots.size(); ++i) turn_slots[i] = i;
  std::vector<double> straight_slots;
  const auto& cum = route.geometry.cumulative();
  for (std::size_t i = 0; i + 1 < cum.size(); ++i) {
    straight_slots.push_back(cum[i] + (cum[i + 1] - cum[i]) / 3.0);
    straight_slots.push_back(cum[i] + 2.0 * (cum[i + 1] - cum[i]) / 3.0);
  }
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
    }
  };
  shuffle(turn_slots);
  shuffle(straight_slots);

  const long capacity = static_cast<long>(turn_slots.size() + straight_slots.size());
  const long n_pois = std::min(capacity, rng.uniform_int(o.min_pois, o.max_pois));
  const long lm_lo = std::max(1L, n_pois - static_cast<long>(straight_slots.size()));
  const long lm_hi = std::min(n_pois, static_cast<long>(turn_slots.size()));
  const long n_landmarks = rng.uniform_int(lm_lo, std::max(lm_lo, lm_hi));

  TimestampMs ts = 1'700'000'000'000;
  int counter = 0;
  auto make_poi = [&](GeoPoint at, PoiKind kind, Instruction instruction) {
    ++counter;
    Poi poi;
    poi.id = route.id + "-poi-" + std::to_string(counter);
    poi.coordinate = at;
    poi.captured_ts = ts += 60'000;
    poi.kind = kind;
    poi.photos = {route.id + "-photo-" + std::to_string(counter)};
    poi.instruction = std::move(instruction);
    poi.status = PoiStatus::Confirmed;
    route.pois.push_back(std::move(poi));
  };
  for (long i = 0; i < n_landmarks; ++i) {
    const std::size_t v = turn_slots[static_cast<std::size_t>(i)];
    const bool right = turns[v] > 0.0;
    make_poi(vertices[v + 1], PoiKind::Landmark,
             {right ? "Turn right here" : "Turn left here", right ? "turn-right" : "turn-left", ""});
  }
  for (long i = 0; i < n_pois - n_landmarks; ++i) {
    make_poi(route.geometry.point_at(straight_slots[static_cast<std::size_t>(i)]), PoiKind::Reassurance,
             {"Keep going straight", "straight", ""});
  }
  route.reindex();

  install_default_subpath(route);
  if (o.subpath_modes.size() > 1) {
    const double len = route.length();
    for (std::size_t i = 1; i < o.subpath_modes.size(); ++i) {
      split_subpath(route, len * static_cast<double>(i) / static_cast<double>(o.subpath_modes.size()));
    }
  }
  for (std::size_t i = 0; i < o.subpath_modes.size() && i < route.subpaths.size(); ++i) {
    set_subpath_mode(route, i, o.subpath_modes[i]);
  }
  const auto report = validate_route(route);
  require(report.ok(), ErrorCode::Validation,
          "generated route is invalid: " + (report.ok() ? std::string() : report.violations.front().code));
  return route;
}

}  // namespace waytrain
