// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "waytrain/design.hpp"
#include "waytrain/error.hpp"
#include "waytrain/erw.hpp"
#include "waytrain/feed.hpp"
#include "waytrain/http_server.hpp"
#include "waytrain/privacy.hpp"
#include "waytrain/service.hpp"
#include "waytrain/store.hpp"

using namespace wt_test;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages of a criterion.
class Verdict {
public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (notes_.size() < 5) notes_.push_back(what);
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary + ", " + std::to_string(checks_) + " checks"};
    std::string d = std::to_string(failures_) + " of " + std::to_string(checks_) + " checks failed";
    for (const auto& n : notes_) d += "; " + n;
    return {false, d};
  }

private:
  long checks_ = 0;
  long failures_ = 0;
  std::vector<std::string> notes_;
};

std::optional<ErrorCode> error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string code_name(std::optional<ErrorCode> c) { return c ? std::string(to_string(*c)) : "none"; }

double norm360(double deg) {
  double r = std::fmod(deg, 360.0);
  return r < 0.0 ? r + 360.0 : r;
}

std::string poi_of(const TrainingEvent& e) {
  const auto it = e.payload.find("poi_id");
  return it != e.payload.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::vector<TrainingEvent> events_for_poi(const std::vector<TrainingEvent>& log, const std::string& poi_id) {
  std::vector<TrainingEvent> out;
  std::copy_if(log.begin(), log.end(), std::back_inserter(out), [&](const auto& e) { return poi_of(e) == poi_id; });
  return out;
}

struct TempStore {
  std::filesystem::path dir = temp_dir("acceptance");
  FeedHub feed;
  std::unique_ptr<Store> store = std::make_unique<Store>(dir);
  std::unique_ptr<Service> service = std::make_unique<Service>(*store, feed);
  ~TempStore() {
    service.reset();
    store.reset();
    std::filesystem::remove_all(dir);
  }
};

// Feeds a generated walk into a live service session, answering quizzes with
// `correct(k)` for the k-th prompt.
void drive(Service& service, const std::string& id, const ScriptedWalk& walk,
           const std::function<bool(std::size_t)>& correct) {
  std::size_t prompts = 0;
  for (const auto& fix : walk.fixes) {
    service.session_fix(id, fix);
    const auto quiz = service.session_open_quiz(id);
    if (!quiz) continue;
    std::string choice = quiz->correct_choice;
    if (!correct(prompts++)) {
      const auto it = std::find_if(quiz->choices.begin(), quiz->choices.end(),
                                   [&](const std::string& c) { return c != quiz->correct_choice; });
      choice = it != quiz->choices.end() ? *it : std::string("wrong-way");
    }
    service.session_quiz(id, quiz->quiz_id, choice, fix.ts_ms);
  }
}

// ---------------------------------------------------------------------------

Outcome perfect_walk() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto route = random_route(seed);
    const std::string tag = "seed " + std::to_string(seed);
    v.expect(route.length() >= 999.0 && route.length() <= 3001.0, tag + ": route length out of 1-3 km");
    v.expect(route.pois.size() >= 3 && route.pois.size() <= 8, tag + ": POI count out of 3-8");
    const auto record = run_simulation(route, TrainingConfig{}, WalkerProfile{}, seed);
    const auto ind = compute_indicators(record);
    v.expect(ind.accuracy && *ind.accuracy == 1.0, tag + ": accuracy != 1");
    v.expect(ind.autonomy && *ind.autonomy == 1.0, tag + ": autonomy != 1");
    v.expect(ind.counters.O == 0, tag + ": O != 0");
    v.expect(ind.error_rate_per_km && *ind.error_rate_per_km == 0.0, tag + ": error rate != 0");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.expect(secs < 10.0, "runtime " + std::to_string(secs) + " s");
  char buf[64];
  std::snprintf(buf, sizeof buf, "20 routes in %.2f s", secs);
  return v.outcome(buf);
}

Outcome detection_soundness() {
  Verdict v;
  long fp = 0, fn = 0;
  RandomRouteOptions opts;
  opts.min_segment_m = 320.0;
  opts.max_segment_m = 400.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const double sigma = static_cast<double>(seed % 6);
    const auto route = random_route(seed, opts);
    const auto& cum = route.geometry.cumulative();
    SimRng pick(seed * 1'000'003 + 17);
    const long segs = static_cast<long>(route.geometry.segment_count());
    const auto dev_seg = static_cast<std::size_t>(pick.uniform_int(0, segs - 1));
    auto jit_seg = static_cast<std::size_t>(pick.uniform_int(0, segs - 2));
    if (jit_seg >= dev_seg) ++jit_seg;
    auto place = [&](std::size_t s) {
      const double lo = cum[s] + 130.0;
      const double hi = cum[s + 1] - 130.0 - 40.0;
      return pick.uniform(lo, std::max(lo, hi));
    };
    auto sign = [&] { return pick.uniform_int(0, 1) == 0 ? -1.0 : 1.0; };
    const double dev_from = place(dev_seg);
    const double dev_offset = sign() * pick.uniform(30.0 + 6.0 * sigma, 100.0);
    const double jit_from = place(jit_seg);
    const double jit_offset = sign() * pick.uniform(0.5, std::min(29.9, 30.0 - 3.0 * sigma));

    WalkerProfile profile;
    profile.gps_noise_sigma_m = sigma;
    profile.behaviors = {Drift{dev_from, dev_from + 40.0, dev_offset}, Drift{jit_from, jit_from + 40.0, jit_offset}};
    ScriptedWalk walk;
    SimOptions so;
    so.walk_out = &walk;
    const auto record = run_simulation(route, TrainingConfig{}, profile, seed, so);

    const std::string tag = "seed " + std::to_string(seed);
    const auto& notes = walk.annotations;
    if (notes.deviations.size() != 1 || notes.jitters.size() != 1) {
      v.expect(false, tag + ": walk carries " + std::to_string(notes.deviations.size()) + " deviations and " +
                          std::to_string(notes.jitters.size()) + " jitters");
      continue;
    }
    const auto& dev = notes.deviations.front();
    v.expect(dev.last_fix >= dev.first_fix + 2, tag + ": deviation shorter than 3 fixes");
    const TimestampMs expected = walk.fixes[dev.first_fix + 2].ts_ms;
    const auto begins = of_type(record.events, EventType::OffTrackBegin);
    bool found = false;
    for (const auto* b : begins) {
      if (b->ts_ms == expected && !found) {
        found = true;
      } else {
        ++fp;
        v.expect(false, tag + ": off-track at " + std::to_string(b->ts_ms) + ", expected only " +
                            std::to_string(expected));
      }
    }
    if (!found) {
      ++fn;
      v.expect(false, tag + ": deviation not flagged on its third fix");
    }
  }
  return v.outcome("100 seeds, sigma 0-5 m, " + std::to_string(fp) + " false positives, " + std::to_string(fn) +
                   " false negatives");
}

Outcome mode_semantics() {
  Verdict v;
  TempStore ts;
  const auto route = make_route(straight_east(1800.0),
                                {{150.0, PoiKind::Reassurance, 8.0},
                                 {400.0, PoiKind::Landmark, -8.0},
                                 {750.0, PoiKind::Landmark, -8.0},
                                 {900.0, PoiKind::Reassurance, 8.0},
                                 {1050.0, PoiKind::Landmark, -8.0},
                                 {1350.0, PoiKind::Landmark, -8.0},
                                 {1600.0, PoiKind::Reassurance, 8.0}},
                                {SupportMode::Actionable, SupportMode::Quiz, SupportMode::Mute}, "modes");
  ts.store->put_route(route);

  WalkerProfile profile;
  profile.gps_noise_sigma_m = 2.0;
  profile.behaviors = {Drift{1450.0, 1520.0, 45.0}};
  const auto walk = generate_trace(route, profile, 3);
  const auto consent = ts.service->grant_consent("modes-user", ConsentScope::TrainingTelemetry, "shown", kT0);
  ts.service->begin_session("modes", route.id, TrainingConfig{}, consent.id(), profile.start_ts);
  drive(*ts.service, "modes", walk, [](std::size_t k) { return k % 2 == 0; });
  const auto record = ts.service->session_end("modes", std::nullopt, walk.fixes.back().ts_ms + 1000);
  const auto log = ts.store->load_event_log("modes");
  v.expect(log == record.events, "persisted log differs from the record");

  std::set<std::string> poi_types{"VicinityAlert", "Instruction", "Reassurance", "QuizPrompt",
                                  "QuizAnswer",    "Reward",      "MistakeAlert"};
  for (const auto& poi : route.pois) {
    const auto evs = events_for_poi(log, poi.id);
    const std::size_t sp = subpath_index_at(route, poi.along_m);
    const std::string tag = poi.id + " (sub-path " + std::to_string(sp + 1) + ")";
    if (sp == 0) {
      const auto follow = poi.kind == PoiKind::Landmark ? EventType::Instruction : EventType::Reassurance;
      const bool ok = evs.size() == 2 && evs[0].type == EventType::VicinityAlert && evs[1].type == follow &&
                      evs[1].seq == evs[0].seq + 1;
      v.expect(ok, tag + ": expected VicinityAlert then " + std::string(to_string(follow)));
    } else if (sp == 1 && poi.kind == PoiKind::Landmark) {
      v.expect(evs.size() >= 3 && evs[0].type == EventType::VicinityAlert && evs[1].type == EventType::QuizPrompt,
               tag + ": expected VicinityAlert then QuizPrompt");
      bool answered = false;
      for (const auto& e : evs) {
        if (e.type == EventType::QuizAnswer) answered = true;
        if (e.type == EventType::Instruction) v.expect(answered, tag + ": Instruction before the quiz answer");
      }
      v.expect(answered, tag + ": quiz never answered");
    } else if (sp == 2) {
      v.expect(evs.empty(), tag + ": muted POI produced " + std::to_string(evs.size()) + " events");
    }
  }
  for (const auto& e : log) {
    if (!poi_types.contains(std::string(to_string(e.type)))) continue;
    const Poi* poi = route.find_poi(poi_of(e));
    v.expect(poi != nullptr && subpath_index_at(route, poi->along_m) != 2,
             "POI event " + std::string(to_string(e.type)) + " in the muted sub-path");
  }

  const auto feed = ts.feed.replay("modes");
  std::size_t off_in_mute = 0;
  for (const auto& fe : feed) {
    if (fe.event.type != EventType::OffTrackBegin) continue;
    const double start = fe.event.payload.at("start_along_m").get<double>();
    if (start >= route.subpaths[2].start_m) ++off_in_mute;
  }
  v.expect(off_in_mute == 1, "feed shows " + std::to_string(off_in_mute) + " off-track episodes in sub-path 3");
  v.expect(feed.size() == log.size(), "feed and log sizes differ");
  return v.outcome(std::to_string(log.size()) + " events, off-track in muted sub-path on the feed");
}

// Relative bearing (to the outgoing segment) of the widest gap between the
// route's incoming and outgoing legs at a vertex.
double branch_away_from_route(const RouteDefinition& route, double along) {
  const auto& cum = route.geometry.cumulative();
  const auto& verts = route.geometry.vertices();
  std::size_t i = 1;
  for (std::size_t k = 1; k + 1 < cum.size(); ++k) {
    if (std::abs(cum[k] - along) < std::abs(cum[i] - along)) i = k;
  }
  const double back = initial_bearing(verts[i], verts[i - 1]);
  const double out = initial_bearing(verts[i], verts[i + 1]);
  const double a = norm360(back - out);
  return a > 180.0 ? a / 2.0 : (a + 360.0) / 2.0;
}

Outcome reward_semantics() {
  Verdict v;
  long rewards = 0, mistakes = 0;
  RandomRouteOptions opts;
  opts.subpath_modes = {SupportMode::Reward};
  for (int pass = 0; pass < 2; ++pass) {
    const double sigma = pass == 0 ? 0.0 : 3.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const auto route = random_route(seed + 500, opts);
      const auto landmarks = decision_points(route);
      const std::size_t wrong = seed % landmarks.size();
      WalkerProfile profile;
      profile.gps_noise_sigma_m = sigma;
      profile.behaviors = {WrongTurn{wrong, branch_away_from_route(route, landmarks[wrong].along_m), 60.0},
                           ReturnToRoute{wrong}};
      ScriptedWalk walk;
      SimOptions so;
      so.walk_out = &walk;
      const auto record = run_simulation(route, TrainingConfig{}, profile, seed, so);
      const std::string tag = "sigma " + std::to_string(static_cast<int>(sigma)) + " seed " + std::to_string(seed);

      const auto& devs = walk.annotations.deviations;
      if (devs.size() != 1) {
        v.expect(false, tag + ": walk carries " + std::to_string(devs.size()) + " deviations");
        continue;
      }
      const std::string truth = devs.front().landmark_id;
      v.expect(truth == landmarks[wrong].id, tag + ": annotation names " + truth);
      const auto alerts = of_type(record.events, EventType::MistakeAlert);
      v.expect(alerts.size() == 1 && poi_of(*alerts.front()) == truth,
               tag + ": MistakeAlert not attributed to " + truth);
      mistakes += static_cast<long>(alerts.size());

      for (std::size_t k = 0; k < landmarks.size(); ++k) {
        const auto evs = events_for_poi(record.events, landmarks[k].id);
        const auto n_reward = std::count_if(evs.begin(), evs.end(), [](const auto& e) { return e.type == EventType::Reward; });
        if (k == wrong) {
          v.expect(n_reward == 0, tag + ": Reward for the wrongly taken landmark");
          continue;
        }
        v.expect(n_reward == 1, tag + ": " + std::to_string(n_reward) + " rewards for " + landmarks[k].id);
        rewards += n_reward;
        if (sigma > 0.0 || n_reward != 1) continue;
        const double commit = landmarks[k].along_m + 20.0;
        std::size_t j = 0;
        while (j < walk.fixes.size() && walk.true_along_m[j] < commit) ++j;
        const auto reward = std::find_if(evs.begin(), evs.end(), [](const auto& e) { return e.type == EventType::Reward; });
        v.expect(j < walk.fixes.size() && reward->ts_ms == walk.fixes[j].ts_ms,
                 tag + ": Reward for " + landmarks[k].id + " not on the first fix 20 m past it");
      }
    }
  }
  return v.outcome(std::to_string(rewards) + " rewards, " + std::to_string(mistakes) + " mistake alerts over 100 walks");
}

Outcome indicator_oracle() {
  Verdict v;
  const std::vector<std::vector<SupportMode>> mode_sets{
      {SupportMode::Actionable},
      {SupportMode::Quiz, SupportMode::Reward},
      {SupportMode::Actionable, SupportMode::Quiz, SupportMode::Mute},
      {SupportMode::Reward, SupportMode::Actionable, SupportMode::Quiz, SupportMode::Mute}};
  auto near = [](const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= 1e-9;
  };
  auto ratios_ok = [&](const IndicatorSet& s, const IndicatorCounters& c, bool observed) {
    std::optional<double> autonomy, accuracy, error_rate, recovery;
    if (observed) {
      const double entries = c.E > 0 ? static_cast<double>(c.E) : 1.0;
      autonomy = 1.0 - std::min(1.0, static_cast<double>(c.A) / entries);
      if (c.L_km > 0.0) error_rate = static_cast<double>((c.D - c.C) + c.O + c.U) / c.L_km;
    }
    if (c.D != 0) accuracy = static_cast<double>(c.C) / static_cast<double>(c.D);
    if (c.O != 0) recovery = static_cast<double>(c.Rs) / static_cast<double>(c.O);
    return near(s.autonomy, autonomy) && near(s.accuracy, accuracy) && near(s.error_rate_per_km, error_rate) &&
           near(s.recovery, recovery);
  };
  auto same_counts = [](const IndicatorCounters& a, const IndicatorCounters& b) {
    return a.D == b.D && a.C == b.C && a.A == b.A && a.O == b.O && a.Rs == b.Rs && a.U == b.U && a.E == b.E;
  };

  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    RandomRouteOptions opts;
    opts.subpath_modes = mode_sets[seed % mode_sets.size()];
    const auto route = random_route(seed % 97 + 1, opts);
    const auto record = random_event_log(route, seed);
    const std::string tag = "log " + std::to_string(seed);
    const auto ind = compute_indicators(record);
    const auto brute = brute_force_counters(record);
    v.expect(same_counts(ind.counters, brute) && ind.counters.L_km == brute.L_km, tag + ": counters differ");
    v.expect(ratios_ok(ind, brute, true), tag + ": ratios differ");

    IndicatorCounters sum;
    const auto rows = subpath_breakdown(record);
    for (const auto& row : rows) {
      const auto sub = brute_force_subpath_counters(record, row.index);
      v.expect(same_counts(row.indicators.counters, sub), tag + ": sub-path " + std::to_string(row.index) +
                                                              " counters differ");
      v.expect(std::abs(row.indicators.counters.L_km - sub.L_km) <= 1e-9, tag + ": sub-path length differs");
      const bool touched = sub.D + sub.C + sub.A + sub.O + sub.Rs + sub.U + sub.E > 0;
      v.expect(row.observed || !touched, tag + ": sub-path with events marked unobserved");
      v.expect(ratios_ok(row.indicators, sub, row.observed), tag + ": sub-path ratios differ");
      const auto& c = row.indicators.counters;
      sum.D += c.D;
      sum.C += c.C;
      sum.A += c.A;
      sum.O += c.O;
      sum.Rs += c.Rs;
      sum.U += c.U;
      sum.E += c.E;
      sum.L_km += c.L_km;
    }
    v.expect(same_counts(sum, ind.counters), tag + ": sub-path counters do not sum to the session");
    v.expect(std::abs(sum.L_km - ind.counters.L_km) <= 1e-9, tag + ": sub-path lengths do not sum to the route");
  }
  return v.outcome("1000 random logs");
}

Outcome privacy_gate() {
  Verdict v;
  const std::vector<std::string> kinds{"VideoAsset",  "RawErwSession", "PoiPhoto",  "WorkingRoute",
                                       "SessionRecord", "NegotiationTranscript", "Spreadsheet", ""};
  const std::vector<DataClass> classes{DataClass::LocalOnly, DataClass::PeerTransferable, DataClass::CloudSyncable};
  auto cloud_ok = [](const ManifestItem& it) {
    if (it.data_class != DataClass::CloudSyncable) return false;
    if (it.kind == "WorkingRoute" || it.kind == "SessionRecord" || it.kind == "NegotiationTranscript") return true;
    return it.kind == "PoiPhoto" && it.curated;
  };
  SimRng rng(6);
  long accepted = 0;
  for (int m = 0; m < 1000; ++m) {
    SyncManifest manifest;
    const long n = rng.uniform_int(0, 12);
    for (long i = 0; i < n; ++i) {
      ManifestItem it;
      it.id = "item-" + std::to_string(m) + "-" + std::to_string(i);
      it.kind = kinds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(kinds.size()) - 1))];
      it.data_class = classes[static_cast<std::size_t>(rng.uniform_int(0, 2))];
      it.curated = rng.uniform_int(0, 1) == 1;
      it.sha256 = sha256_hex(it.id);
      it.path = "x/" + it.id;
      manifest.items.push_back(it);
    }
    const auto lenient = gate_sync(manifest, SyncDestination::Cloud, GateMode::Lenient);
    std::set<std::string> expected;
    for (const auto& it : manifest.items) {
      if (cloud_ok(it)) expected.insert(it.id);
    }
    std::set<std::string> got;
    for (const auto& it : lenient.permitted.items) {
      got.insert(it.id);
      bool known = true;
      DataClass computed = DataClass::LocalOnly;
      try {
        computed = classify(it.kind, it.curated);
      } catch (const Error&) {
        known = false;
      }
      v.expect(known && computed == DataClass::CloudSyncable && it.data_class == DataClass::CloudSyncable,
               "manifest " + std::to_string(m) + ": cloud accepted " + it.id + " (" + it.kind + ")");
    }
    accepted += static_cast<long>(got.size());
    v.expect(got == expected, "manifest " + std::to_string(m) + ": permitted set differs from the oracle");
    v.expect(got.size() + lenient.rejected_ids.size() == manifest.items.size(),
             "manifest " + std::to_string(m) + ": items lost by the gate");
    const auto strict = error_of([&] { gate_sync(manifest, SyncDestination::Cloud, GateMode::Strict); });
    v.expect(expected.size() == manifest.items.size() ? !strict : strict == ErrorCode::SyncPolicy,
             "manifest " + std::to_string(m) + ": strict gate gave " + code_name(strict));
  }

  // End to end: walk, negotiate, train, sync.
  TempStore ts;
  ts.feed.set_endpoint_available(true);
  const auto d = design_through_service(*ts.service, "way-e2e", "e2e");
  const auto video = ts.store->load_media(d.video_id);
  const auto peer = ts.service->erw_package(d.erw_id, TransferDestination::TrainerDevice);
  const bool video_in_peer = std::any_of(peer.payload.begin(), peer.payload.end(),
                                         [&](const auto& kv) { return kv.second == video.bytes; });
  v.expect(video_in_peer, "video missing from the trainer-device package");
  v.expect(error_of([&] { ts.service->erw_package(d.erw_id, TransferDestination::Cloud); }) ==
               ErrorCode::Classification,
           "raw walk packaged for the cloud");
  const auto consent = ts.service->grant_consent("e2e-user", ConsentScope::TrainingTelemetry, "shown", kT0 + 10);
  TimestampMs t = kT0 + 7'200'000;
  ts.service->begin_session("e2e-s", d.working.id, {Supervision::Remote, {Modality::Text}}, consent.id(), t);
  for (const auto& f : walk_fixes(d.working.geometry, 0.0, d.working.length(), 3.0, t + 1000)) {
    ts.service->session_fix("e2e-s", f);
    t = f.ts_ms;
  }
  ts.service->session_end("e2e-s", 4, t + 1000);
  const auto sync = ts.service->cloud_sync();
  const std::set<std::string> rejected(sync.gate.rejected_ids.begin(), sync.gate.rejected_ids.end());
  v.expect(rejected.contains(d.video_id), "video not rejected by the cloud gate");
  v.expect(rejected.contains(d.erw_id), "raw walk not rejected by the cloud gate");
  v.expect(!sync.written.empty(), "nothing synced");
  const std::string probe = video.bytes.substr(0, 1024);
  long files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(ts.store->cloud_dir())) {
    if (!entry.is_regular_file()) continue;
    ++files;
    std::ifstream in(entry.path(), std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    v.expect(bytes.find(probe) == std::string::npos, "video bytes under " + entry.path().string());
    v.expect(sha256_hex(bytes) != video.sha256(), "video copy under " + entry.path().string());
    v.expect(entry.path().filename().string().find(d.video_id) == std::string::npos,
             "video-named file " + entry.path().string());
  }
  return v.outcome("1000 manifests, " + std::to_string(accepted) + " cloud items; " + std::to_string(files) +
                   " synced files free of video");
}

Outcome consent_gate() {
  Verdict v;
  TempStore ts;
  const auto route = random_route(7);
  ts.store->put_route(route);
  Service& s = *ts.service;
  const TimestampMs now = kT0 + 3'600'000;
  auto begin = [&](const std::string& id, const std::string& consent, TimestampMs at = kT0 + 3'600'000) {
    return error_of([&] { s.begin_session(id, route.id, TrainingConfig{}, consent, at); });
  };
  v.expect(begin("c-none", "") == ErrorCode::ConsentRequired, "empty consent accepted");
  v.expect(begin("c-unknown", "consent-0000000000000000") == ErrorCode::ConsentRequired, "unknown consent accepted");
  const auto erw_scope = s.grant_consent("u1", ConsentScope::ErwRecording, "shown", now);
  v.expect(begin("c-scope", erw_scope.id()) == ErrorCode::ConsentRequired, "walk-recording consent accepted");
  const auto yesterday = s.grant_consent("u2", ConsentScope::TrainingTelemetry, "shown", now - 86'400'000);
  v.expect(begin("c-stale", yesterday.id()) == ErrorCode::ConsentRequired, "yesterday's consent accepted");
  const auto later = s.grant_consent("u3", ConsentScope::TrainingTelemetry, "shown", now + 60'000);
  v.expect(begin("c-future", later.id()) == ErrorCode::ConsentRequired, "consent granted after the start accepted");
  v.expect(!s.session_live("c-none") && !s.session_live("c-stale"), "refused session left running");

  const auto fresh = s.grant_consent("u4", ConsentScope::TrainingTelemetry, "shown", now - 1000);
  v.expect(!begin("c-ok", fresh.id()), "fresh consent refused");
  v.expect(begin("c-again-live", fresh.id()) == ErrorCode::ConsentRequired, "consent reused by a concurrent session");
  s.session_end("c-ok", std::nullopt, now + 1000);
  v.expect(begin("c-again", fresh.id(), now + 2000) == ErrorCode::ConsentRequired, "spent consent reused");
  const auto spent = s.consent().find(fresh.id());
  v.expect(spent && spent->session_id == "c-ok", "consent not marked with its session");

  // Spent state survives a restart of the service.
  ts.service.reset();
  ts.service = std::make_unique<Service>(*ts.store, ts.feed);
  v.expect(begin("c-after-restart", fresh.id(), now + 3000) == ErrorCode::ConsentRequired,
           "spent consent accepted after restart");

  ConsentLedger ledger;
  const auto id = fresh_consent(ledger, now);
  v.expect(!error_of([&] { TrainingSession::begin("e1", route, {}, ledger, id, now); }), "engine refused fresh consent");
  v.expect(error_of([&] { TrainingSession::begin("e2", route, {}, ledger, id, now); }) == ErrorCode::ConsentRequired,
           "engine accepted a spent consent");
  return v.outcome("missing, unknown, wrong-scope, stale, future and spent records refused");
}

Outcome negotiation_machine() {
  Verdict v;
  long finalized = 0, refused = 0;
  SimRng rng(8);
  const std::vector<std::pair<NegotiationActionType, double>> weights{
      {NegotiationActionType::Confirm, 0.30},     {NegotiationActionType::ApproveInstruction, 0.22},
      {NegotiationActionType::Next, 0.20},        {NegotiationActionType::Reject, 0.08},
      {NegotiationActionType::Prev, 0.06},        {NegotiationActionType::SelectPhoto, 0.06},
      {NegotiationActionType::FlagPhoto, 0.04},   {NegotiationActionType::Annotate, 0.04}};
  auto check = [&](const RouteDefinition& w, const std::string& tag) {
    ++finalized;
    v.expect(w.status == RouteStatus::Working, tag + ": not Working");
    bool landmark = false;
    for (const auto& p : w.pois) {
      v.expect(p.status == PoiStatus::Confirmed, tag + ": " + p.id + " is " + std::string(to_string(p.status)));
      if (p.kind == PoiKind::Landmark && p.status == PoiStatus::Confirmed) landmark = true;
    }
    v.expect(landmark, tag + ": no confirmed landmark");
    v.expect(validate_route(w).ok(), tag + ": invalid Working route");
  };
  for (std::uint64_t seq = 1; seq <= 10'000; ++seq) {
    auto draft = reopen_route(random_route(seq % 200 + 1));
    for (auto& p : draft.pois) {
      if (rng.uniform(0.0, 1.0) < 0.3) p.photos.push_back(p.id + "-alt");
      if (rng.uniform(0.0, 1.0) < 0.05) p.kind = PoiKind::Candidate;
    }
    const std::string tag = "sequence " + std::to_string(seq);
    auto start = start_negotiation(draft, "neg-" + std::to_string(seq));
    RouteDefinition route = start.route;
    NegotiationSession neg = start.session;
    TimestampMs ts = kT0;
    auto try_finalize = [&] {
      NegotiationSession copy = neg;
      try {
        check(finalize_route(copy, route, ++ts), tag);
      } catch (const Error&) {
        ++refused;
      }
    };
    const bool guided = seq % 2 == 0;
    const long steps = rng.uniform_int(0, 5 * static_cast<long>(route.pois.size()) + 6);
    for (long k = 0; k < steps; ++k) {
      const double r = rng.uniform(0.0, 1.0);
      if (r < 0.01 && !route.pois.empty()) {
        const auto& p = route.pois[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(route.pois.size()) - 1))];
        try {
          route = apply_edit(route, EditInstruction{p.id, {"Changed " + std::to_string(k), "", ""}});
        } catch (const Error&) {
        }
        continue;
      }
      if (r < 0.04) {
        try_finalize();
        continue;
      }
      NegotiationAction action;
      if (guided && rng.uniform(0.0, 1.0) < 0.85) {
        // What a cooperative reviewer would do next on the current POI.
        const auto& p = route.pois[std::min(neg.cursor, route.pois.size() - 1)];
        const auto it = neg.reviews.find(p.id);
        const PoiReview review = it != neg.reviews.end() ? it->second : PoiReview{};
        if (review.decision != PoiStatus::Pending) {
          action.type = NegotiationActionType::Next;
        } else if (p.photos.size() > 1 && review.primary_photo.empty()) {
          action.type = NegotiationActionType::SelectPhoto;
        } else if (p.kind == PoiKind::Landmark && !review.approved_instruction) {
          action.type = NegotiationActionType::ApproveInstruction;
        } else {
          action.type = rng.uniform(0.0, 1.0) < 0.1 ? NegotiationActionType::Reject : NegotiationActionType::Confirm;
        }
      } else {
        double u = rng.uniform(0.0, 1.0);
        for (const auto& [type, w] : weights) {
          action.type = type;
          if (u < w) break;
          u -= w;
        }
      }
      if (action.type == NegotiationActionType::SelectPhoto || action.type == NegotiationActionType::FlagPhoto) {
        const auto& p = route.pois[std::min(neg.cursor, route.pois.size() - 1)];
        const bool bogus = rng.uniform(0.0, 1.0) < 0.1;
        action.argument = bogus || p.photos.empty()
                              ? std::string("no-such-photo")
                              : p.photos[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(p.photos.size()) - 1))];
      } else if (action.type == NegotiationActionType::Annotate) {
        action.argument = "note " + std::to_string(k);
      }
      try {
        neg = negotiation_step(neg, route, action, ++ts).session;
      } catch (const Error&) {
      }
    }
    try_finalize();
  }
  v.expect(finalized > 0, "no sequence reached a Working route");
  return v.outcome("10000 sequences, " + std::to_string(finalized) + " finalizations, " + std::to_string(refused) +
                   " refused");
}

Outcome determinism_and_round_trip() {
  Verdict v;
  // Identical inputs, identical bytes.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RandomRouteOptions opts;
    opts.subpath_modes = {SupportMode::Actionable, SupportMode::Quiz, SupportMode::Reward};
    const auto route = random_route(seed + 900, opts);
    WalkerProfile profile;
    profile.gps_noise_sigma_m = 4.0;
    profile.behaviors = {WrongTurn{0, 180.0, 50.0}, ReturnToRoute{0}, Pause{40.0, 30.0}};
    profile.quiz_policy = {QuizPolicyKind::Scripted, {true, false, true}};
    std::string bytes[2];
    std::string walks[2];
    for (int k = 0; k < 2; ++k) {
      std::ostringstream log, walk_out;
      ScriptedWalk walk;
      SimOptions so;
      so.walk_out = &walk;
      write_event_log(log, run_simulation(route, TrainingConfig{}, profile, seed, so).events);
      write_walk_file(walk_out, walk);
      bytes[k] = log.str();
      walks[k] = walk_out.str();
    }
    v.expect(!bytes[0].empty() && bytes[0] == bytes[1], "seed " + std::to_string(seed) + ": event logs differ");
    v.expect(walks[0] == walks[1], "seed " + std::to_string(seed) + ": walk files differ");
  }

  // Everything stored survives a reopen unchanged.
  TempStore ts;
  ts.feed.set_endpoint_available(true);
  const auto d = design_through_service(*ts.service, "way-rt", "rt");
  const auto consent = ts.service->grant_consent("rt-user", ConsentScope::TrainingTelemetry, "shown", kT0 + 5);
  TimestampMs t = kT0 + 7'200'000;
  ts.service->begin_session("rt-s", d.working.id, TrainingConfig{}, consent.id(), t);
  for (const auto& f : walk_fixes(d.working.geometry, 0.0, d.working.length(), 4.0, t + 1000, 3.0)) {
    ts.service->session_fix("rt-s", f);
    t = f.ts_ms;
  }
  ts.service->session_help("rt-s", t, "where now");
  const auto live_record = ts.service->session_end("rt-s", 5, t + 1000);
  const auto sim = run_simulation(random_route(3), TrainingConfig{}, WalkerProfile{}, 3);
  ts.service->import_session_record(sim);

  Store& a = *ts.store;
  Store b(ts.dir);
  long compared = 0;
  auto same = [&](bool eq, const std::string& what) {
    ++compared;
    v.expect(eq, what + " changed across reopen");
  };
  for (const auto& id : a.list(EntityKind::Way)) {
    same(a.load_way(id) == b.load_way(id), "way " + id);
    same(way_from_json(to_json(a.load_way(id))) == a.load_way(id), "way json " + id);
  }
  for (const auto& id : a.list(EntityKind::Erw)) {
    same(a.load_erw(id) == b.load_erw(id), "walk " + id);
    same(erw_from_json(to_json(a.load_erw(id).first)) == a.load_erw(id).first, "walk json " + id);
  }
  for (const auto& id : a.list(EntityKind::Negotiation)) {
    same(a.load_negotiation(id) == b.load_negotiation(id), "negotiation " + id);
  }
  for (const auto& id : a.route_ids()) {
    same(a.route_versions(id) == b.route_versions(id), "route versions " + id);
    for (int ver : a.route_versions(id)) {
      same(a.load_route(id, ver) == b.load_route(id, ver), "route " + id + " v" + std::to_string(ver));
      same(route_from_json(to_json(a.load_route(id, ver))) == a.load_route(id, ver), "route json " + id);
    }
  }
  same(b.load_route(d.working.id) == d.working, "working route");
  for (const auto& id : a.session_ids()) {
    same(a.load_session_record(id) == b.load_session_record(id), "session " + id);
    same(a.load_event_log(id) == b.load_event_log(id), "event log " + id);
  }
  same(b.load_session_record("rt-s") == live_record, "live session record");
  same(b.load_event_log("rt-s") == live_record.events, "live event log");
  same(b.load_session_record(sim.session_id) == sim, "imported session record");
  for (const auto& id : a.media_ids()) {
    same(a.load_media(id) == b.load_media(id) && a.media_kind(id) == b.media_kind(id), "media " + id);
  }
  ConsentLedger reloaded(b.consent_ledger_path());
  const auto before = ts.service->consent().records();
  const auto after = reloaded.records();
  same(before.size() == after.size(), "consent ledger size");
  for (std::size_t i = 0; i < std::min(before.size(), after.size()); ++i) {
    same(before[i].id() == after[i].id() &&
             ConsentLedger::ledger_line(before[i]) == ConsentLedger::ledger_line(after[i]),
         "consent " + before[i].id());
  }
  const auto pkg_dir = ts.dir / "pkg";
  const auto pkg = ts.service->erw_package(d.erw_id, TransferDestination::TrainerDevice);
  write_package(pkg, pkg_dir);
  const auto pkg_back = read_package(pkg_dir);
  same(pkg_back.items == pkg.items && pkg_back.payload == pkg.payload && pkg_back.session_id == pkg.session_id,
       "transfer package");

  // Haversine against the spherical law of cosines.
  SimRng rng(9);
  double worst = 0.0;
  for (int i = 0; i < 1000;) {
    const GeoPoint p{rng.uniform(-70.0, 70.0), rng.uniform(-179.0, 179.0)};
    const GeoPoint q{p.lat + rng.uniform(-0.45, 0.45), p.lon + rng.uniform(-0.6, 0.6)};
    const double oracle = cosine_law_distance(p, q);
    if (oracle < 200.0 || oracle >= 50'000.0) continue;
    ++i;
    const double rel = std::abs(haversine_distance(p, q) - oracle) / oracle;
    worst = std::max(worst, rel);
  }
  v.expect(worst <= 0.005, "haversine off by " + std::to_string(worst * 100.0) + "%");
  char buf[160];
  std::snprintf(buf, sizeof buf, "10 byte-identical reruns, %ld stored entities identical, haversine max rel err %.2e",
                compared, worst);
  return v.outcome(buf);
}

Outcome feed_contract() {
  Verdict v;
  TempStore ts;
  HttpServer server(*ts.service);
  server.bind("127.0.0.1", 0);
  std::thread serving([&] { server.serve(); });
  server.wait_until_ready();
  Service& s = *ts.service;

  RandomRouteOptions opts;
  opts.subpath_modes = {SupportMode::Actionable, SupportMode::Quiz, SupportMode::Reward};
  auto run_session = [&](int n, std::vector<FeedEvent>& streamed) {
    const auto route = random_route(static_cast<std::uint64_t>(300 + n), opts);
    ts.store->put_route(route);
    WalkerProfile profile;
    profile.gps_noise_sigma_m = 3.0;
    profile.behaviors = {WrongTurn{0, 180.0, 50.0}, ReturnToRoute{0}};
    profile.start_ts = kT0 + n * 10'000'000LL;
    const auto walk = generate_trace(route, profile, static_cast<std::uint64_t>(n));
    const std::string id = "feed-" + std::to_string(n);
    const auto consent = s.grant_consent(id + "-user", ConsentScope::TrainingTelemetry, "shown", profile.start_ts);
    s.begin_session(id, route.id, {Supervision::Remote, {Modality::Text}}, consent.id(), profile.start_ts);
    auto sub = ts.feed.subscribe(id, 1);
    std::thread reader([&] {
      while (!sub.finished()) {
        if (auto e = sub.next(std::chrono::milliseconds(200))) streamed.push_back(*e);
      }
    });
    drive(s, id, walk, [](std::size_t k) { return k % 3 != 1; });
    s.session_help(id, walk.fixes.back().ts_ms, "stuck");
    s.session_end(id, 3, walk.fixes.back().ts_ms + 1000);
    reader.join();
  };

  constexpr int kSessions = 6;
  std::vector<std::vector<FeedEvent>> streamed(kSessions);
  for (int n = 0; n < 2; ++n) run_session(n, streamed[static_cast<std::size_t>(n)]);
  std::vector<std::thread> parallel;
  for (int n = 2; n < kSessions; ++n) {
    parallel.emplace_back([&, n] { run_session(n, streamed[static_cast<std::size_t>(n)]); });
  }
  for (auto& th : parallel) th.join();

  SimRng rng(10);
  std::size_t total = 0;
  for (int n = 0; n < kSessions; ++n) {
    const std::string id = "feed-" + std::to_string(n);
    const auto log = ts.store->load_event_log(id);
    const auto record = ts.store->load_session_record(id);
    const auto feed = ts.feed.replay(id);
    total += feed.size();
    v.expect(record.events == log, id + ": record and log differ");
    v.expect(feed.size() == log.size(), id + ": feed has " + std::to_string(feed.size()) + " of " +
                                            std::to_string(log.size()) + " events");
    for (std::size_t i = 0; i < std::min(feed.size(), log.size()); ++i) {
      v.expect(feed[i].seq == i + 1 && feed[i].event.seq == i + 1 && feed[i].session_id == id,
               id + ": sequence gap at " + std::to_string(i + 1));
      v.expect(feed[i].event == log[i], id + ": feed event " + std::to_string(i + 1) + " differs from the log");
    }
    const auto& got = streamed[static_cast<std::size_t>(n)];
    v.expect(got.size() == feed.size(), id + ": live subscriber saw " + std::to_string(got.size()) + " events");
    for (std::size_t i = 0; i < std::min(got.size(), feed.size()); ++i) {
      v.expect(got[i].event == feed[i].event && got[i].seq == feed[i].seq, id + ": live stream out of order");
    }
    for (int r = 0; r < 5; ++r) {
      const auto k = static_cast<std::uint64_t>(rng.uniform_int(1, static_cast<long>(log.size()) + 1));
      const auto tail = ts.feed.replay(id, k);
      bool ok = tail.size() == log.size() + 1 - k;
      for (std::size_t i = 0; ok && i < tail.size(); ++i) ok = tail[i].seq == k + i && tail[i].event == log[k - 1 + i];
      v.expect(ok, id + ": replay from " + std::to_string(k) + " wrong");
      auto sub = ts.feed.subscribe(id, k);
      std::vector<FeedEvent> drained;
      while (auto e = sub.next(std::chrono::milliseconds(100))) drained.push_back(*e);
      ok = drained.size() == tail.size() && sub.finished();
      for (std::size_t i = 0; ok && i < drained.size(); ++i) ok = drained[i].event == tail[i].event;
      v.expect(ok, id + ": subscription from " + std::to_string(k) + " wrong");
    }
  }

  // Without the endpoint a Remote session must not start, and nothing is spent.
  server.stop();
  serving.join();
  v.expect(!ts.feed.endpoint_available(), "endpoint still marked available after stop");
  const auto route = random_route(399);
  ts.store->put_route(route);
  const auto consent = s.grant_consent("down-user", ConsentScope::TrainingTelemetry, "shown", kT0);
  const auto refused = error_of(
      [&] { s.begin_session("down", route.id, {Supervision::Remote, {Modality::Text}}, consent.id(), kT0 + 10); });
  v.expect(refused == ErrorCode::FeedUnavailable, "remote start without endpoint gave " + code_name(refused));
  v.expect(!ts.feed.has("down") && !s.session_live("down"), "refused remote session left state behind");
  v.expect(!s.consent().find(consent.id())->spent(), "refused remote session spent its consent");
  v.expect(!error_of([&] { s.begin_session("down", route.id, TrainingConfig{}, consent.id(), kT0 + 20); }),
           "in-person session refused while the endpoint is down");
  return v.outcome(std::to_string(kSessions) + " sessions (4 concurrent), " + std::to_string(total) +
                   " feed events matched the logs");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"perfect walk", perfect_walk},
      {"off-track detection", detection_soundness},
      {"support modes", mode_semantics},
      {"reward and mistake feedback", reward_semantics},
      {"indicator oracle", indicator_oracle},
      {"privacy gate", privacy_gate},
      {"consent gate", consent_gate},
      {"negotiation state machine", negotiation_machine},
      {"determinism and round trip", determinism_and_round_trip},
      {"feed contract", feed_contract},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
