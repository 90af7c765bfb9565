#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>
#include <atomic>
#include <cmath>

#include "httplib.h"
#include "riskbn/canonical_json.hpp"
#include "riskbn/product.hpp"
#include "riskbn/service.hpp"

using namespace riskbn;
using namespace riskbn::service;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string scenario_text(const std::string& name) {
  return read_file(std::string(RISKBN_SOURCE_DIR) + "/scenarios/" + name + ".json");
}

std::string create(Service& s, const std::string& name) {
  const auto r = s.create_session(scenario_text(name));
  EXPECT_EQ(r.status, 201) << r.body;
  return json::parse(r.body)["session_id"];
}

double mean_of(const Response& r, const std::string& node) {
  const auto body = json::parse(r.body);
  for (const auto& p : body["posteriors"])
    if (p["node"] == node) return p["mean"];
  ADD_FAILURE() << node << " missing";
  return 0.0;
}

}  // namespace

TEST(Service, CreateSessionReportsValidation) {
  Service s;
  const auto r = s.create_session(scenario_text("teddy_s2"));
  ASSERT_EQ(r.status, 201);
  const auto j = json::parse(r.body);
  EXPECT_TRUE(j["validation"]["ok"].get<bool>());
  EXPECT_EQ(j["scenario"], "teddy_s2");
  EXPECT_EQ(s.session_count(), 1u);
}

TEST(Service, InvalidScenario) {
  Service s;
  EXPECT_EQ(s.create_session("{not json").status, 400);
  auto j = json::parse(scenario_text("teddy_s2"));
  j["usage"]["years_in_use"] = -1;
  const auto r = s.create_session(j.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_NE(r.body.find("usage.years_in_use"), std::string::npos);
}

TEST(Service, BackwardInferenceThroughEvidence) {
  Service s;
  const auto id = create(s, "kettle_s2");
  const auto put = s.put_evidence(id, R"({"major_injury_instances": 1})");
  ASSERT_EQ(put.status, 200) << put.body;
  const auto affected = json::parse(put.body)["affected"];
  EXPECT_NE(std::find(affected.begin(), affected.end(), "p_major_injury"), affected.end());
  const auto rep = s.get_report(id);
  ASSERT_EQ(rep.status, 200);
  const double pm = json::parse(rep.body)["moments"]["p_major_injury"]["mean"];
  EXPECT_GT(pm, 4e-5 / 3);
  EXPECT_LT(pm, 4e-5 * 3);
}

TEST(Service, NoEvidenceGivesPriors) {
  Service s;
  const auto id = create(s, "teddy_s2");
  const auto session = json::parse(s.get_session(id).body);
  json clear = json::object();
  for (const auto& [node, v] : session["evidence"].items()) clear[node] = nullptr;
  ASSERT_EQ(s.put_evidence(id, clear.dump()).status, 200);

  const auto built = build_scenario(load_scenario(std::string(RISKBN_SOURCE_DIR) + "/scenarios/teddy_s2.json"));
  const auto c = compile(built.model, built.binning);
  const auto r = s.get_posteriors(id, "p_hazard_testing,hazard_occurrence");
  ASSERT_EQ(r.status, 200);
  // bodies carry 6 significant digits
  const double testing = posterior(c, {}, "p_hazard_testing").mean();
  const double occurrence = posterior(c, {}, "hazard_occurrence").mean();
  EXPECT_NEAR(mean_of(r, "p_hazard_testing"), testing, 1e-5 * testing);
  EXPECT_NEAR(mean_of(r, "hazard_occurrence"), occurrence, 1e-5 * occurrence);
}

TEST(Service, EvidenceErrors) {
  Service s;
  const auto id = create(s, "teddy_s2");
  auto r = s.put_evidence(id, R"({"no_such_node": 1})");
  EXPECT_EQ(r.status, 422);
  EXPECT_NE(r.body.find("no_such_node"), std::string::npos);
  r = s.put_evidence(id, R"({"risk_level": "enormous"})");
  EXPECT_EQ(r.status, 422);
  // deterministic recommendation table: tolerable risk never triggers intervention
  r = s.put_evidence(id, R"({"risk_tolerability": "very_high", "government_intervention": true})");
  EXPECT_EQ(r.status, 409) << r.body;
  // rejected evidence is not committed
  EXPECT_EQ(json::parse(s.get_session(id).body)["evidence_version"], 0);
  EXPECT_EQ(s.get_posteriors(id, "bogus").status, 422);
}

TEST(Service, UnknownAndDeletedSessions) {
  Service s;
  EXPECT_EQ(s.get_report("nope").status, 404);
  EXPECT_EQ(s.put_evidence("nope", "{}").status, 404);
  const auto id = create(s, "teddy_s2");
  EXPECT_EQ(s.delete_session(id).status, 204);
  EXPECT_EQ(s.get_posteriors(id, "").status, 404);
  EXPECT_EQ(s.delete_session(id).status, 404);
}

TEST(Service, IdleSessionsExpire) {
  ServiceConfig cfg;
  cfg.session_ttl = std::chrono::seconds(0);
  Service s(cfg);
  create(s, "teddy_s2");
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  EXPECT_EQ(s.expire_idle(), 1u);
  EXPECT_EQ(s.session_count(), 0u);
}

TEST(Service, ReportMatchesLibraryAndCli) {
  Service s;
  const auto id = create(s, "kettle_s1");
  const auto body = s.get_report(id).body;
  const auto config = load_scenario(std::string(RISKBN_SOURCE_DIR) + "/scenarios/kettle_s1.json");
  EXPECT_EQ(body, canonical_dump(report_to_json(assess(config))));

  const std::string out = testing::TempDir() + "riskbn_cli_report.json";
  const std::string cmd = std::string(RISKBN_CLI) + " assess " + RISKBN_SOURCE_DIR +
                          "/scenarios/kettle_s1.json --bins 100 --seed 42 --format json --out " + out;
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(read_file(out), body);
}

TEST(Service, SessionsAreIsolated) {
  Service s;
  const auto a = create(s, "teddy_s2");
  const auto b = create(s, "teddy_s2");
  const auto built = build_scenario(load_scenario(std::string(RISKBN_SOURCE_DIR) + "/scenarios/teddy_s2.json"));
  const auto c = compile(built.model, built.binning);
  auto expected = [&](const std::string& strategy) {
    auto ev = built.evidence;
    ev[node::testing_strategy] = DiscreteState{strategy};
    return posterior(c, ev, node::p_hazard_operational).mean();
  };
  const double poor = expected("poor"), beyond = expected("beyond_intended_scope");

  std::atomic<int> failures{0};
  auto worker = [&](const std::string& id, const std::string& strategy, double want) {
    for (int i = 0; i < 4; ++i) {
      if (s.put_evidence(id, json{{"testing_strategy", strategy}}.dump()).status != 200) ++failures;
      const auto r = s.get_posteriors(id, node::p_hazard_operational);
      if (std::abs(mean_of(r, node::p_hazard_operational) - want) > 1e-5 * want) ++failures;
    }
  };
  std::thread ta(worker, a, "poor", poor), tb(worker, b, "beyond_intended_scope", beyond);
  ta.join();
  tb.join();
  EXPECT_EQ(failures.load(), 0);
}

TEST(Service, RapexEndpoint) {
  Service s;
  auto r = s.rapex_assess(read_file(std::string(RISKBN_SOURCE_DIR) + "/scenarios/axe_rapex.json"));
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["probability"], 1e-4);
  r = s.rapex_assess(R"({"severity": 2, "steps": []})");
  EXPECT_EQ(r.status, 422);
}

TEST(Http, EndToEnd) {
  Service svc;
  HttpServer http(svc);
  const int port = http.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(std::chrono::seconds(60));

  auto res = cli.Get("/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);

  res = cli.Post("/v1/sessions", scenario_text("teddy_s2"), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const std::string id = json::parse(res->body)["session_id"];

  res = cli.Put("/v1/sessions/" + id + "/evidence", R"({"risk_level": "medium"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  res = cli.Put("/v1/sessions/" + id + "/evidence", R"({"ghost": 3})", "application/json");
  EXPECT_EQ(res->status, 422);

  res = cli.Get("/v1/sessions/" + id + "/posteriors?nodes=risk_level,p_major_injury");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["posteriors"].size(), 2u);

  res = cli.Get("/v1/sessions/" + id + "/report");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["scenario"], "teddy_s2");

  res = cli.Post("/v1/rapex/assess", R"({"severity": 3, "steps": [0.07]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["risk"], "Serious");

  res = cli.Delete("/v1/sessions/" + id);
  EXPECT_EQ(res->status, 204);
  res = cli.Get("/v1/sessions/" + id + "/report");
  EXPECT_EQ(res->status, 404);
  http.stop();
}
