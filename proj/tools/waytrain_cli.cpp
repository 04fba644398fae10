// waytrain command-line front end.
//
//   waytrain [--store DIR] [--config FILE] <command> ...
//
//   erw ingest <trace.csv> --way <id>
//   route curate <id> --edits <file>
//   negotiate run <route> --script <transcript>
//   train simulate --route <id> --profile <file> --seed <n>
//   indicators report <session>
//   indicators trend <way>
//   serve --port <p> --config <file>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "waytrain/config.hpp"
#include "waytrain/error.hpp"
#include "waytrain/http_server.hpp"
#include "waytrain/service.hpp"
#include "waytrain/sim.hpp"

using namespace waytrain;

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Input, path + ": " + e.what());
  }
}

std::vector<nlohmann::json> read_ndjson(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open " + path);
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Input, path + ": " + e.what());
    }
  }
  return lines;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Route training engine: walks, route curation, training sessions and indicators"};
  app.require_subcommand(1);
  std::string store_dir = "waytrain-store";
  std::string config_file;
  app.add_option("--store", store_dir, "Store directory")->capture_default_str();
  app.add_option("--config", config_file, "JSON config file overriding thresholds and policy");

  // erw ingest
  auto* erw = app.add_subcommand("erw", "Exploratory route walks")->require_subcommand(1);
  auto* ingest = erw->add_subcommand("ingest", "Turn a recorded trace into a Draft route");
  std::string trace_file, way_id, erw_id, route_id_opt;
  ingest->add_option("trace", trace_file, "Trace CSV (ts_ms,lat_deg,lon_deg,accuracy_m)")->required();
  ingest->add_option("--way", way_id, "Way id; created from the trace end points when missing")->required();
  ingest->add_option("--session", erw_id, "Walk id");
  ingest->add_option("--route", route_id_opt, "Draft route id");

  // route curate
  auto* route = app.add_subcommand("route", "Route curation")->require_subcommand(1);
  auto* curate = route->add_subcommand("curate", "Apply a JSON array of edits as one new version");
  std::string route_id, edits_file;
  std::optional<int> base_version;
  curate->add_option("id", route_id, "Route id")->required();
  curate->add_option("--edits", edits_file, "Edits file")->required();
  curate->add_option("--base-version", base_version, "Fail unless the route is at this version");
  auto* show = route->add_subcommand("show", "Print the latest route version");
  show->add_option("id", route_id, "Route id")->required();

  // negotiate run
  auto* negotiate = app.add_subcommand("negotiate", "Route negotiation")->require_subcommand(1);
  auto* neg_run = negotiate->add_subcommand("run", "Replay a negotiation transcript and finalize");
  std::string neg_route, script_file, neg_id;
  bool no_finalize = false;
  neg_run->add_option("route", neg_route, "Draft route id")->required();
  neg_run->add_option("--script", script_file, "NDJSON lines {poi_id, action, argument?, ts_ms?}")->required();
  neg_run->add_option("--id", neg_id, "Negotiation id");
  neg_run->add_flag("--no-finalize", no_finalize, "Leave the route under negotiation");

  // train simulate
  auto* train = app.add_subcommand("train", "Training sessions")->require_subcommand(1);
  auto* simulate = train->add_subcommand("simulate", "Run a simulated walker through a training session");
  std::string sim_route, profile_file, supervision = "InPerson", walk_out, session_id;
  std::vector<std::string> modalities{"Text", "Symbol"};
  std::uint64_t seed = 0;
  std::optional<int> confidence;
  simulate->add_option("--route", sim_route, "Working route id")->required();
  simulate->add_option("--profile", profile_file, "Walker profile JSON")->required();
  simulate->add_option("--seed", seed, "Noise seed")->required();
  simulate->add_option("--supervision", supervision, "InPerson, Remote or AppOnly")->capture_default_str();
  simulate->add_option("--modalities", modalities, "Modalities")->capture_default_str();
  simulate->add_option("--session", session_id, "Session id");
  simulate->add_option("--confidence", confidence, "Self-reported confidence 1-5");
  simulate->add_option("--walk-out", walk_out, "Write the walk file here (annotations go to <file>.annotations.json)");

  // indicators
  auto* indicators = app.add_subcommand("indicators", "Progress indicators")->require_subcommand(1);
  auto* report = indicators->add_subcommand("report", "Indicator report of one session");
  std::string report_session;
  report->add_option("session", report_session, "Session id")->required();
  auto* trend = indicators->add_subcommand("trend", "Learning trend and suggestions for a way");
  std::string trend_way;
  trend->add_option("way", trend_way, "Way id")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "Port")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--config", config_file, "JSON config file");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config config = config_file.empty() ? Config{} : load_config(config_file);
    Store store(store_dir);
    FeedHub feed;
    Service service(store, feed, config);

    if (ingest->parsed()) {
      std::ifstream in(trace_file);
      require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open " + trace_file);
      const auto fixes = read_trace_csv(in);
      require(fixes.size() >= 2, ErrorCode::InsufficientData, "trace has fewer than 2 fixes");
      if (!store.exists(EntityKind::Way, way_id)) {
        service.create_way({way_id, "origin", fixes.front().point, "destination", fixes.back().point, "", ""});
      }
      ErwSession s = start_erw_session(erw_id.empty() ? way_id + "-erw-" + std::to_string(store.list(EntityKind::Erw).size() + 1) : erw_id,
                                       way_id, fixes.front().ts_ms);
      for (const auto& f : fixes) s = append_fix(std::move(s), f);
      store.put_erw(s, 0);
      const auto done = service.erw_finish(s.id, route_id_opt);
      std::cout << nlohmann::json{{"erw_id", done.session.id},
                                  {"route_id", done.draft.id},
                                  {"version", done.draft.version},
                                  {"fixes", done.session.fixes.size()},
                                  {"path_vertices", done.draft.geometry.size()},
                                  {"length_m", done.draft.length()}}
                       .dump(2)
                << '\n';
    } else if (curate->parsed()) {
      const auto j = read_json_file(edits_file);
      std::vector<RouteEdit> edits;
      for (const auto& e : j.is_array() ? j : j.at("edits")) edits.push_back(edit_from_json(e));
      const auto r = service.apply_edits(route_id, edits, base_version);
      std::cout << to_json(r).dump(2) << '\n';
    } else if (show->parsed()) {
      std::cout << to_json(service.get_route(route_id)).dump(2) << '\n';
    } else if (neg_run->parsed()) {
      const auto lines = read_ndjson(script_file);
      auto start = service.start_negotiation(neg_route, neg_id);
      const std::string nid = start.session.id;
      NegotiationSession neg = start.session;
      const RouteDefinition& r = start.route;
      TimestampMs ts = 0;
      for (const auto& line : lines) {
        ts = std::max(ts + 1, line.value("ts_ms", ts + 1));
        const std::string poi_id = line.at("poi_id").get<std::string>();
        std::size_t target = r.pois.size();
        for (std::size_t i = 0; i < r.pois.size(); ++i) {
          if (r.pois[i].id == poi_id) target = i;
        }
        require(target < r.pois.size(), ErrorCode::NotFound, "transcript names unknown POI " + poi_id);
        while (neg.cursor != target) {
          const auto dir = neg.cursor < target ? NegotiationActionType::Next : NegotiationActionType::Prev;
          neg = service.negotiation_step(nid, {dir, ""}, ts).session;
        }
        const NegotiationAction action{parse_negotiation_action(line.at("action").get<std::string>()),
                                       line.value("argument", "")};
        neg = service.negotiation_step(nid, action, ts).session;
      }
      nlohmann::json out{{"negotiation_id", nid}, {"steps", service.get_negotiation(nid).transcript.size()}};
      if (!no_finalize) {
        const auto working = service.finalize_negotiation(nid, ts + 1);
        out["route"] = to_json(working);
      }
      std::cout << out.dump(2) << '\n';
    } else if (simulate->parsed()) {
      const RouteDefinition r = service.get_route(sim_route);
      const WalkerProfile profile = profile_from_json(read_json_file(profile_file));
      TrainingConfig tc;
      tc.supervision = parse_supervision(supervision);
      tc.modalities.clear();
      for (const auto& m : modalities) tc.modalities.insert(parse_modality(m));
      const auto consent = service.grant_consent(
          "trainee", ConsentScope::TrainingTelemetry,
          "Position, prompts and answers are recorded for this simulated practice session.", profile.start_ts);
      ScriptedWalk walk;
      SimOptions opts;
      opts.thresholds = config.thresholds;
      opts.consent = &service.consent();
      opts.consent_id = consent.id();
      opts.session_id = session_id;
      opts.confidence = confidence;
      opts.walk_out = &walk;
      const auto record = run_simulation(r, tc, profile, seed, opts);
      service.import_session_record(record);
      if (!walk_out.empty()) {
        std::ofstream wf(walk_out);
        write_walk_file(wf, walk);
        std::ofstream af(walk_out + ".annotations.json");
        af << annotations_to_json(walk.annotations).dump(2) << '\n';
      }
      std::cout << indicator_report(record, config.policy).dump(2) << '\n';
    } else if (report->parsed()) {
      std::cout << service.indicators(report_session).dump(2) << '\n';
    } else if (trend->parsed()) {
      std::cout << service.trend(trend_way).dump(2) << '\n';
    } else if (serve->parsed()) {
      HttpServer server(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << bound << '\n';
      server.serve();
      g_server = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
