#include "riskbn/service.hpp"

#include <atomic>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "riskbn/canonical_json.hpp"
#include "riskbn/error.hpp"
#include "riskbn/product.hpp"
#include "riskbn/rapex.hpp"

namespace riskbn::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return 400;
    case ErrorCode::ImpossibleEvidence: return 409;
    case ErrorCode::UnknownNode:
    case ErrorCode::InvalidEvidence:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ValidationFailed:
    case ErrorCode::BadSupport:
    case ErrorCode::BadCount:
    case ErrorCode::EmptyScenario:
    case ErrorCode::BadProbability:
    case ErrorCode::OutOfRange:
    case ErrorCode::DuplicateId:
    case ErrorCode::CycleDetected: return 422;
    default: return 500;
  }
}

Response error_response(int status, std::string_view code, const std::string& message) {
  return {status, canonical_dump(json{{"error", {{"code", code}, {"message", message}}}})};
}

Response error_response(const Error& e) { return error_response(http_status(e.code()), to_string(e.code()), e.what()); }

Response ok(int status, const json& body) { return {status, canonical_dump(body)}; }

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

template <class F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::bad_alloc&) {
    return error_response(500, "OutOfMemory", "model too large for the requested binning");
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw Error(ErrorCode::InvalidEvidence, std::string("interval needs numeric '") + key + "'");
  return j[key].get<double>();
}

}  // namespace

Observation observation_from_json(const json& j) {
  if (j.is_string()) return DiscreteState{j.get<std::string>()};
  if (j.is_boolean()) return DiscreteState{j.get<bool>() ? "true" : "false"};
  if (j.is_number()) return Point{j.get<double>()};
  if (j.is_array()) {
    if (j.size() != 2 || !j[0].is_number() || !j[1].is_number())
      throw Error(ErrorCode::InvalidEvidence, "interval evidence must be [lo, hi]");
    return Interval{j[0].get<double>(), j[1].get<double>()};
  }
  if (j.is_object()) {
    if (j.contains("state") && j["state"].is_string()) return DiscreteState{j["state"].get<std::string>()};
    if (j.contains("value") && j["value"].is_number()) return Point{j["value"].get<double>()};
    return Interval{number_field(j, "lo"), number_field(j, "hi")};
  }
  throw Error(ErrorCode::InvalidEvidence, "unsupported evidence value " + j.dump());
}

json observation_to_json(const Observation& o) {
  if (const auto* s = std::get_if<DiscreteState>(&o)) return s->state;
  if (const auto* p = std::get_if<Point>(&o)) return p->value;
  const auto& iv = std::get<Interval>(o);
  return json{{"lo", iv.lo}, {"hi", iv.hi}};
}

json posterior_to_json(const Posterior& p) {
  json j{{"node", p.node}, {"mass", p.mass}, {"mean", p.mean()}};
  if (!p.labels.empty()) {
    j["states"] = p.labels;
    j["mode"] = p.labels[p.mode()];
  } else {
    j["values"] = p.values;
  }
  if (p.moments) {
    const auto& m = *p.moments;
    j["moments"] = {{"mean", m.mean}, {"variance", m.variance}, {"p5", m.p5}, {"p50", m.p50}, {"p95", m.p95}};
  }
  return j;
}

struct Service::Session {
  std::string id;
  ScenarioConfig config;
  std::shared_ptr<const CompiledModel> model;
  int bins = 100;
  std::uint64_t seed = 42;

  mutable std::shared_mutex mutex;  // guards evidence and version
  Evidence evidence;
  std::uint64_t version = 0;

  std::mutex report_mutex;
  std::optional<std::pair<std::uint64_t, std::string>> report;  // version, canonical body

  std::atomic<Clock::rep> last_used{Clock::now().time_since_epoch().count()};

  void touch() { last_used = Clock::now().time_since_epoch().count(); }
  std::pair<Evidence, std::uint64_t> snapshot() const {
    std::shared_lock lock(mutex);
    return {evidence, version};
  }
};

Service::Service(ServiceConfig config) : config_(std::move(config)) {}
Service::~Service() = default;

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
  expire_idle();
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  it->second->touch();
  return it->second;
}

std::size_t Service::expire_idle() {
  const auto cutoff = (Clock::now() - config_.session_ttl).time_since_epoch().count();
  std::unique_lock lock(mutex_);
  return std::erase_if(sessions_, [&](const auto& kv) { return kv.second->last_used.load() < cutoff; });
}

std::size_t Service::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

Response Service::health() const {
  return ok(200, {{"status", "ok"}, {"engine_version", kEngineVersion}, {"sessions", session_count()}});
}

Response Service::create_session(const std::string& body) {
  return guarded([&] {
    expire_idle();
    const json j = parse_body(body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "request body must be a JSON object");
    auto s = std::make_shared<Session>();
    s->bins = config_.default_bins;
    s->seed = config_.seed;
    const json* scenario = &j;
    if (j.contains("scenario")) {
      scenario = &j["scenario"];
      if (j.contains("bins")) s->bins = j["bins"].get<int>();
      if (j.contains("seed")) s->seed = j["seed"].get<std::uint64_t>();
      if (s->bins < 2) throw Error(ErrorCode::InvalidConfig, "bins must be at least 2");
    }
    s->config = scenario_from_json(*scenario);
    auto built = build_scenario(s->config, s->bins);
    const auto report = validate(built.model);
    s->model = std::make_shared<const CompiledModel>(compile(built.model, built.binning));
    s->evidence = std::move(built.evidence);
    {
      std::unique_lock lock(mutex_);
      s->id = "s" + std::to_string(next_id_++);
      sessions_[s->id] = s;
    }
    json findings = json::array();
    for (const auto& f : report.findings) findings.push_back({{"node", f.node}, {"message", f.message}});
    json evidence = json::object();
    for (const auto& [node, o] : s->evidence) evidence[node] = observation_to_json(o);
    return ok(201, {{"session_id", s->id},
                    {"scenario", s->config.name},
                    {"validation", {{"ok", report.ok()}, {"findings", findings}}},
                    {"evidence", evidence}});
  });
}

Response Service::get_session(const std::string& id) {
  return guarded([&] {
    auto s = find(id);
    if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
    const auto [evidence, version] = s->snapshot();
    json nodes = json::array();
    for (auto v : s->model->order()) {
      const auto& d = s->model->domain(v);
      json parents = json::array();
      for (auto p : s->model->parents(v)) parents.push_back(s->model->domain(p).id);
      json n{{"id", d.id}, {"kind", kind_name(d.kind)}, {"parents", parents}, {"states", d.size()}};
      if (!d.labels.empty()) n["labels"] = d.labels;
      nodes.push_back(std::move(n));
    }
    json ev = json::object();
    for (const auto& [node, o] : evidence) ev[node] = observation_to_json(o);
    return ok(200, {{"session_id", s->id},
                    {"scenario", s->config.name},
                    {"bins", s->bins},
                    {"seed", s->seed},
                    {"nodes", nodes},
                    {"evidence", ev},
                    {"evidence_version", version}});
  });
}

Response Service::put_evidence(const std::string& id, const std::string& body) {
  return guarded([&] {
    auto s = find(id);
    if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
    const json j = parse_body(body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidEvidence, "evidence must be an object of node -> value");

    std::unique_lock lock(s->mutex);
    Evidence next = s->evidence;
    std::vector<std::string> changed;
    for (const auto& [node, value] : j.items()) {
      if (!s->model->contains(node)) throw Error(ErrorCode::UnknownNode, "unknown node '" + node + "'");
      changed.push_back(node);
      if (value.is_null()) {
        next.erase(node);
        continue;
      }
      try {
        const auto o = observation_from_json(value);
        evidence_mask(*s->model, node, o);
        next[node] = o;
      } catch (const Error& e) {
        throw Error(e.code(), node + ": " + e.what());
      }
    }
    // rejects evidence of zero joint probability before it is committed
    if (!next.empty()) log_evidence_probability(*s->model, next);

    std::vector<std::string> observed;
    for (const auto& [node, o] : next) observed.push_back(node);
    std::set<std::string> affected;
    for (const auto& node : changed)
      for (auto& n : dependent_nodes(s->model->spec(), node, observed)) affected.insert(std::move(n));

    s->evidence = std::move(next);
    ++s->version;
    json ev = json::object();
    for (const auto& [node, o] : s->evidence) ev[node] = observation_to_json(o);
    return ok(200, {{"affected", std::vector<std::string>(affected.begin(), affected.end())},
                    {"evidence", ev},
                    {"evidence_version", s->version}});
  });
}

Response Service::get_posteriors(const std::string& id, const std::string& nodes) {
  return guarded([&] {
    auto s = find(id);
    if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
    std::vector<std::string> query;
    std::stringstream in(nodes);
    for (std::string node; std::getline(in, node, ',');)
      if (!node.empty()) query.push_back(node);
    if (query.empty())
      for (auto v : s->model->order()) query.push_back(s->model->domain(v).id);
    for (const auto& q : query)
      if (!s->model->contains(q)) throw Error(ErrorCode::UnknownNode, "unknown node '" + q + "'");
    const auto [evidence, version] = s->snapshot();
    json out = json::array();
    for (const auto& p : posterior(*s->model, evidence, query)) out.push_back(posterior_to_json(p));
    return ok(200, {{"session_id", s->id}, {"evidence_version", version}, {"posteriors", out}});
  });
}

Response Service::get_report(const std::string& id) {
  return guarded([&] {
    auto s = find(id);
    if (!s) return error_response(404, "UnknownSession", "no session '" + id + "'");
    const auto [evidence, version] = s->snapshot();
    {
      std::lock_guard lock(s->report_mutex);
      if (s->report && s->report->first == version) return Response{200, s->report->second};
    }
    AssessOptions options;
    options.bins = s->bins;
    options.seed = s->seed;
    const auto body = canonical_dump(report_to_json(assess_compiled(s->config, *s->model, evidence, options)));
    std::lock_guard lock(s->report_mutex);
    s->report = {version, body};
    return Response{200, body};
  });
}

Response Service::delete_session(const std::string& id) {
  std::unique_lock lock(mutex_);
  if (sessions_.erase(id) == 0) return error_response(404, "UnknownSession", "no session '" + id + "'");
  return {204, ""};
}

Response Service::rapex_assess(const std::string& body) {
  return guarded([&] {
    const json j = parse_body(body);
    const auto scenario = rapex::scenario_from_json(j);
    rapex::Assessment a;
    if (j.contains("sensitivity")) {
      const auto& sj = j["sensitivity"];
      a = rapex::assess(scenario, sj.value("factor", 2.0), sj.value("severity_shift", 1));
    } else {
      a = rapex::assess(scenario);
    }
    return ok(200, rapex::to_json(a));
  });
}

// HTTP ---------------------------------------------------------------------------

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : service(s) { routes(); }

  static void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    if (!r.body.empty()) res.set_content(r.body, "application/json");
  }

  void routes() {
    const std::string sid = R"(/v1/sessions/([A-Za-z0-9_-]+))";
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) { reply(res, service.health()); });
    server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.create_session(req.body));
    });
    server.Get(sid, [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.get_session(req.matches[1]));
    });
    server.Delete(sid, [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.delete_session(req.matches[1]));
    });
    server.Put(sid + "/evidence", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.put_evidence(req.matches[1], req.body));
    });
    server.Get(sid + "/posteriors", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.get_posteriors(req.matches[1], req.get_param_value("nodes")));
    });
    server.Get(sid + "/report", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.get_report(req.matches[1]));
    });
    server.Post("/v1/rapex/assess", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.rapex_assess(req.body));
    });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace riskbn::service
