#include "waytrain/http_server.hpp"

#include <httplib.h>

#include "waytrain/error.hpp"

namespace waytrain {
namespace {

using httplib::Request;
using httplib::Response;

nlohmann::json body(const Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Input, std::string("request body is not JSON: ") + e.what());
  }
}

void reply(Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

nlohmann::json events_json(const std::vector<TrainingEvent>& events) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : events) out.push_back(to_json(e));
  return out;
}

GpsFix fix_of(const nlohmann::json& j) {
  GpsFix f{{j.at("lat").get<double>(), j.at("lon").get<double>()}, j.at("ts_ms").get<TimestampMs>(), std::nullopt};
  if (j.contains("accuracy_m") && !j.at("accuracy_m").is_null()) f.accuracy_m = j.at("accuracy_m").get<double>();
  return f;
}

TimestampMs ts_of(const nlohmann::json& j) { return j.at("ts_ms").get<TimestampMs>(); }

std::string feed_line(const FeedEvent& e) { return to_json(e).dump() + "\n"; }

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::State:
    case ErrorCode::Ordering: return 409;
    case ErrorCode::ConsentRequired:
    case ErrorCode::Role:
    case ErrorCode::Classification:
    case ErrorCode::SyncPolicy: return 403;
    case ErrorCode::FeedUnavailable: return 503;
    case ErrorCode::Integrity: return 500;
    default: return 422;
  }
}

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  Service& svc = impl_->service;
  httplib::Server& srv = impl_->server;

  srv.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      reply(res, {{"error", to_string(e.code())}, {"message", e.what()}}, http_status(e.code()));
    } catch (const nlohmann::json::exception& e) {
      reply(res, {{"error", "input"}, {"message", e.what()}}, 400);
    } catch (const std::exception& e) {
      reply(res, {{"error", "internal"}, {"message", e.what()}}, 500);
    }
  });

  // Ways
  srv.Post("/ways", [&svc](const Request& req, Response& res) {
    reply(res, to_json(svc.create_way(way_from_json(body(req)))), 201);
  });
  srv.Get(R"(/ways/([^/]+))", [&svc](const Request& req, Response& res) {
    reply(res, to_json(svc.get_way(req.matches[1])));
  });
  srv.Get(R"(/ways/([^/]+)/trend)", [&svc](const Request& req, Response& res) {
    reply(res, svc.trend(req.matches[1]));
  });

  // Exploratory walks. `start` takes the way id, the other calls the walk id.
  srv.Post(R"(/erw/([^/]+)/start)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    reply(res, to_json(svc.erw_start(req.matches[1], j.value("session_id", ""), ts_of(j), j.value("video_ref", ""))),
          201);
  });
  srv.Post(R"(/erw/([^/]+)/fix)", [&svc](const Request& req, Response& res) {
    const auto s = svc.erw_fix(req.matches[1], fix_of(body(req)));
    reply(res, {{"id", s.id}, {"fixes", s.fixes.size()}});
  });
  srv.Post(R"(/erw/([^/]+)/poi)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const auto role = j.value("role", "Trainer") == "User" ? CaptureRole::User : CaptureRole::Trainer;
    const auto s = svc.erw_poi(req.matches[1], fix_of(j), j.value("photos", std::vector<std::string>{}),
                               j.value("note", ""), role);
    reply(res, poi_to_json(s.candidate_pois.back()), 201);
  });
  srv.Post(R"(/erw/([^/]+)/finish)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const auto done = svc.erw_finish(req.matches[1], j.value("route_id", ""));
    reply(res, {{"erw", to_json(done.session)}, {"route", to_json(done.draft)}});
  });
  srv.Post(R"(/erw/([^/]+)/package)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const auto dest =
        j.value("destination", "TrainerDevice") == "Cloud" ? TransferDestination::Cloud : TransferDestination::TrainerDevice;
    const auto pkg = svc.erw_package(req.matches[1], dest);
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : pkg.items) items.push_back(to_json(item));
    reply(res, {{"session_id", pkg.session_id}, {"items", items}});
  });

  // Routes
  srv.Get(R"(/routes/([^/]+))", [&svc](const Request& req, Response& res) {
    std::optional<int> version;
    if (req.has_param("version")) version = std::stoi(req.get_param_value("version"));
    reply(res, to_json(svc.get_route(req.matches[1], version)));
  });
  srv.Post(R"(/routes/([^/]+)/edits)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    std::vector<RouteEdit> edits;
    const auto& list = j.is_array() ? j : j.at("edits");
    for (const auto& e : list) edits.push_back(edit_from_json(e));
    std::optional<int> base;
    if (j.is_object() && j.contains("base_version")) base = j.at("base_version").get<int>();
    reply(res, to_json(svc.apply_edits(req.matches[1], edits, base)));
  });
  srv.Post(R"(/routes/([^/]+)/reopen)", [&svc](const Request& req, Response& res) {
    reply(res, to_json(svc.reopen(req.matches[1])));
  });
  srv.Get(R"(/routes/([^/]+)/preview/([^/]+))", [&svc](const Request& req, Response& res) {
    reply(res, to_json(svc.preview(req.matches[1], req.matches[2])));
  });

  // Negotiation. The start call takes the route id, the others the negotiation id.
  srv.Post(R"(/negotiations/([^/]+))", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const auto start = svc.start_negotiation(req.matches[1], j.value("neg_id", ""));
    reply(res, {{"negotiation", to_json(start.session)}, {"route", to_json(start.route)}}, 201);
  });
  srv.Post(R"(/negotiations/([^/]+)/step)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const NegotiationAction action{parse_negotiation_action(j.at("action").get<std::string>()), j.value("argument", "")};
    const auto step = svc.negotiation_step(req.matches[1], action, ts_of(j));
    reply(res, {{"negotiation", to_json(step.session)}, {"feedback", to_json(step.feedback)}});
  });
  srv.Post(R"(/negotiations/([^/]+)/finalize)", [&svc](const Request& req, Response& res) {
    reply(res, to_json(svc.finalize_negotiation(req.matches[1], ts_of(body(req)))));
  });

  srv.Post("/consents", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const auto rec = svc.grant_consent(j.at("user_id").get<std::string>(),
                                       parse_consent_scope(j.value("scope", "training-telemetry")),
                                       j.value("disclosure", ""), ts_of(j));
    nlohmann::json out = ConsentLedger::ledger_line(rec);
    out["id"] = rec.id();
    reply(res, out, 201);
  });

  // Training sessions
  srv.Post("/sessions", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const auto started = svc.begin_session(j.value("session_id", ""), j.at("route_id").get<std::string>(),
                                           training_config_from_json(j.value("config", nlohmann::json::object())),
                                           j.at("consent_id").get<std::string>(), ts_of(j));
    reply(res, {{"session_id", started.session_id}, {"events", events_json(started.events)}}, 201);
  });
  srv.Post(R"(/sessions/([^/]+)/fix)", [&svc](const Request& req, Response& res) {
    reply(res, {{"events", events_json(svc.session_fix(req.matches[1], fix_of(body(req))))}});
  });
  srv.Post(R"(/sessions/([^/]+)/quiz)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    reply(res, {{"events", events_json(svc.session_quiz(req.matches[1], j.at("quiz_id").get<std::string>(),
                                                        j.at("choice").get<std::string>(), ts_of(j)))}});
  });
  srv.Post(R"(/sessions/([^/]+)/report)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<TrainingEvent> events;
    if (kind == "Help") {
      events = svc.session_help(req.matches[1], ts_of(j), j.value("note", ""));
    } else if (kind == "AR") {
      events = svc.session_ar(req.matches[1], ts_of(j));
    } else {
      events = svc.session_report(req.matches[1], parse_unexpected_kind(kind), ts_of(j));
    }
    reply(res, {{"events", events_json(events)}});
  });
  srv.Post(R"(/sessions/([^/]+)/assist)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    reply(res, {{"events", events_json(svc.session_assist(req.matches[1],
                                                          parse_assist_source(j.at("source").get<std::string>()),
                                                          j.value("note", ""), ts_of(j)))}});
  });
  srv.Post(R"(/sessions/([^/]+)/end)", [&svc](const Request& req, Response& res) {
    const auto j = body(req);
    std::optional<int> confidence;
    if (j.contains("confidence") && !j.at("confidence").is_null()) confidence = j.at("confidence").get<int>();
    const auto record = svc.session_end(req.matches[1], confidence, ts_of(j));
    reply(res, {{"session_id", record.session_id}, {"events", record.events.size()}, {"ended_ts_ms", record.ended_ts}});
  });
  srv.Get(R"(/sessions/([^/]+)/indicators)", [&svc](const Request& req, Response& res) {
    reply(res, svc.indicators(req.matches[1]));
  });

  // Monitoring feed: NDJSON replay from `from_seq`; `follow=1` keeps the
  // connection open and streams new envelopes until the session ends.
  srv.Get(R"(/sessions/([^/]+)/feed)", [&svc](const Request& req, Response& res) {
    const std::string id = req.matches[1];
    const std::uint64_t from = req.has_param("from_seq") ? std::stoull(req.get_param_value("from_seq")) : 1;
    if (req.get_param_value("follow") != "1") {
      std::string out;
      for (const auto& e : svc.feed().replay(id, from)) out += feed_line(e);
      res.set_content(out, "application/x-ndjson");
      return;
    }
    auto sub = std::make_shared<FeedHub::Subscription>(svc.feed().subscribe(id, std::max<std::uint64_t>(1, from)));
    res.set_chunked_content_provider("application/x-ndjson", [sub](std::size_t, httplib::DataSink& sink) {
      if (auto e = sub->next(std::chrono::milliseconds(200))) {
        const std::string line = feed_line(*e);
        return sink.write(line.data(), line.size());
      }
      if (sub->finished()) sink.done();
      return sink.is_writable();
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  require(bound > 0, ErrorCode::Input, "cannot bind " + host + ":" + std::to_string(port));
  impl_->service.feed().set_endpoint_available(true);
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->service.feed().set_endpoint_available(false);
  impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace waytrain
