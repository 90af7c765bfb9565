#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskbn/infer.hpp"

namespace riskbn::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Sessions idle longer than this are dropped.
  std::chrono::seconds session_ttl{3600};
  int default_bins = 100;
  std::uint64_t seed = 42;
};

/// Status code plus canonical JSON body (empty for 204).
struct Response {
  int status = 200;
  std::string body;
};

/// Reads one evidence value: "state", true/false, a number, [lo, hi] or
/// {"lo": .., "hi": ..}. Throws Error(InvalidEvidence).
Observation observation_from_json(const nlohmann::json& j);
nlohmann::json observation_to_json(const Observation& o);
nlohmann::json posterior_to_json(const Posterior& p);

/// The /v1 API without the transport. Every handler is safe to call from
/// many threads; a session serializes its own evidence updates while reads
/// run concurrently.
class Service {
 public:
  explicit Service(ServiceConfig config = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response create_session(const std::string& body);
  Response get_session(const std::string& id);
  Response put_evidence(const std::string& id, const std::string& body);
  /// `nodes` is a comma-separated list; empty means every node.
  Response get_posteriors(const std::string& id, const std::string& nodes);
  Response get_report(const std::string& id);
  Response delete_session(const std::string& id);
  Response rapex_assess(const std::string& body);
  Response health() const;

  /// Drops idle sessions; returns how many were removed.
  std::size_t expire_idle();
  std::size_t session_count() const;
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id);

  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// HTTP front end over a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port, or -1.
  int start(const std::string& host, int port);
  /// Blocks serving on the calling thread.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace riskbn::service
