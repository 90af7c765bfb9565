#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <tuple>

#include "riskbn/canonical_json.hpp"
#include "riskbn/error.hpp"
#include "riskbn/product.hpp"

using namespace riskbn;
using namespace riskbn::cpd;
using nlohmann::json;

namespace {

ScenarioConfig scenario(const std::string& name) {
  return load_scenario(std::string(RISKBN_SOURCE_DIR) + "/scenarios/" + name + ".json");
}

/// Posterior means of the report nodes, via the full template.
std::map<std::string, double> means(const ScenarioConfig& c) {
  const auto r = assess(c);
  std::map<std::string, double> out;
  for (const auto& [k, m] : r.moments) out[k] = m.mean;
  return out;
}

std::string invalid_field(const json& j) {
  try {
    scenario_from_json(j);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    return e.what();
  }
  ADD_FAILURE() << "accepted";
  return {};
}

json kettle_json() {
  std::ifstream in(std::string(RISKBN_SOURCE_DIR) + "/scenarios/kettle_s1.json");
  return json::parse(in);
}

}  // namespace

TEST(Scenario, BundledFilesLoad) {
  for (auto name : {"teddy_s1", "teddy_s2", "kettle_s1", "kettle_s2"}) {
    const auto c = scenario(name);
    EXPECT_EQ(c.name, name);
  }
}

TEST(Scenario, RoundTripKeepsTheHash) {
  const auto c = scenario("kettle_s1");
  const auto back = scenario_from_json(scenario_to_json(c));
  EXPECT_EQ(config_hash(c), config_hash(back));
  auto other = c;
  other.usage.years_in_use = 3;
  EXPECT_NE(config_hash(c), config_hash(other));
}

TEST(Scenario, ValidationNamesTheField) {
  auto j = kettle_json();
  j["usage"]["usage_profile"]["as_intended"] = 0.5;
  EXPECT_NE(invalid_field(j).find("usage.usage_profile"), std::string::npos);

  j = kettle_json();
  j["testing"]["demands_tested"] = json::array({2500, 2000});
  EXPECT_NE(invalid_field(j).find("testing.demands_tested"), std::string::npos);

  j = kettle_json();
  j["hazard_injury"]["p_uncontrolled_major"] = 1.5;
  EXPECT_NE(invalid_field(j).find("hazard_injury.p_uncontrolled_major"), std::string::npos);

  j = kettle_json();
  j["population"]["observed_major_injury_instances"] = 200000;
  EXPECT_NE(invalid_field(j).find("population.observed_major_injury_instances"), std::string::npos);

  j = kettle_json();
  j["unexpected"] = 1;
  EXPECT_NE(invalid_field(j).find("unexpected"), std::string::npos);
}

TEST(Scenario, MissingFile) {
  try {
    load_scenario("/nonexistent/missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    EXPECT_NE(std::string(e.what()).find("file not found"), std::string::npos);
  }
}

TEST(Building, HazardOccurrence) {
  EXPECT_EQ(hazard_occurrence_prob(0.0, 250), 0.0);
  EXPECT_NEAR(hazard_occurrence_prob(0.001, 100), 0.0952, 5e-5);
  EXPECT_EQ(hazard_occurrence_prob(1.0, 1), 1.0);
}

TEST(Building, InjuryProbability) {
  EXPECT_NEAR(injury_prob(0.1, 0.1, 1.0, 0.5), 0.005, 1e-15);
  EXPECT_NEAR(injury_prob(0.1, 0.2, 1.0, 0.5), 0.01, 1e-15);
  EXPECT_NEAR(injury_prob(0.3, 0.2, 0.0, 0.9), 0.06, 1e-15);
}

TEST(Building, ExpectedInjuryCounts) {
  // priors with means 0.018 / 0.036 for a fixed population of 519,000
  const auto toy = expected_injury_counts(CountPrior::point(519000), beta(lit(18), lit(982)), beta(lit(36), lit(964)));
  EXPECT_NEAR(toy.major, 9335, 0.02 * 9335);
  EXPECT_NEAR(toy.minor, 18668, 0.02 * 18668);

  const auto kettle = expected_injury_counts(CountPrior::range(50000, 100000), beta(lit(5), lit(995)),
                                             beta(lit(10), lit(990)));
  EXPECT_NEAR(kettle.major, 375, 0.02 * 375);
  EXPECT_NEAR(kettle.minor, 750, 0.02 * 750);

  // zero lands in the lowest probability bin, whose midpoint is below 1e-6
  const auto none = expected_injury_counts(CountPrior::point(1000), deterministic(lit(0)), deterministic(lit(0)));
  EXPECT_LT(none.major, 1e-3);
  EXPECT_LT(none.minor, 1e-3);
}

TEST(Building, PerceptionNoisyOr) {
  const double none = perception_change(false, false, false);
  const double all = perception_change(true, true, true);
  EXPECT_LT(none, 0.05);
  EXPECT_GT(all, 0.9);
  for (auto [m, w, g] : {std::tuple{true, false, false}, {false, true, false}, {false, false, true}}) {
    const double one = perception_change(m, w, g);
    EXPECT_GT(one, none);
    EXPECT_LT(one, all);
  }
}

TEST(Building, RiskLevelForCertainZeroIsVeryLow) {
  const auto c = compile(count_fragment(CountPrior::point(10), deterministic(lit(0)), deterministic(lit(0))).model);
  const auto pm = posterior(c, {}, node::p_major_injury);
  const auto pn = posterior(c, {}, node::p_minor_injury);
  const auto level = classify_risk_level(pm, pn);
  // TNormal(0, s2) truncated to [0,1]: mass below the first edge at 0.2
  const double s = std::sqrt(2.0 * Calibration{}.risk_variance);
  EXPECT_NEAR(level[0], std::erf(0.2 / s) / std::erf(1.0 / s), 1e-6);
  EXPECT_GT(level[0], 0.99);
}

// Raising either injury probability never lowers the risk level in
// stochastic order.
TEST(BuildingProperty, RiskLevelMonotone) {
  std::vector<double> grid{1e-5, 3e-4, 1.5e-3, 3e-3, 6e-3, 2e-2, 0.1};
  auto level = [&](double maj, double min) {
    const auto c = compile(count_fragment(CountPrior::point(10), deterministic(lit(maj)), deterministic(lit(min))).model);
    return classify_risk_level(posterior(c, {}, node::p_major_injury), posterior(c, {}, node::p_minor_injury));
  };
  auto upper_tail = [](const std::vector<double>& d, std::size_t k) {
    double s = 0.0;
    for (std::size_t i = k; i < d.size(); ++i) s += d[i];
    return s;
  };
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const auto lo = level(grid[i], grid[i]), hi = level(grid[i + 1], grid[i]);
    for (std::size_t k = 1; k < 5; ++k) EXPECT_GE(upper_tail(hi, k), upper_tail(lo, k) - 1e-12);
  }
}

TEST(BuildingProperty, ToleranceDecreasingInRiskIncreasingInUtility) {
  auto mean_state = [](const std::vector<double>& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += i * d[i];
    return s;
  };
  double prev_tol = 1e9, prev_int = -1;
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<double> risk(5, 0.0);
    risk[k] = 1.0;
    const auto t = tolerability_and_recommendation(risk, "medium");
    EXPECT_LT(mean_state(t.tolerability), prev_tol);
    EXPECT_GE(t.p_intervene, prev_int);
    prev_tol = mean_state(t.tolerability);
    prev_int = t.p_intervene;
  }
  const std::vector<double> risk{0.1, 0.2, 0.4, 0.2, 0.1};
  double prev = -1;
  for (const auto& u : states::five) {
    const double m = mean_state(tolerability_and_recommendation(risk, u).tolerability);
    EXPECT_GT(m, prev);
    prev = m;
  }
}

TEST(Template, ContainsEveryTemplateNode) {
  const auto m = build_product_risk_bn(scenario("kettle_s1"));
  for (auto id : {node::demands_tested, node::hazards_observed, node::testing_strategy, node::p_hazard_testing,
                  node::p_hazard_operational, node::manufacturer_quality, node::particular_product_usage,
                  node::years_in_use, node::p_hazard_effective, node::number_of_demands, node::hazard_occurrence,
                  node::p_major_injury, node::p_minor_injury, node::n_instances, node::major_injury_instances,
                  node::minor_injury_instances, node::risk_level, node::risk_tolerability,
                  node::government_intervention, node::perception_change})
    EXPECT_TRUE(m.contains(id)) << id;
  EXPECT_TRUE(validate(m).ok()) << validate(m).to_string();
  const auto c = compile(m, build_scenario(scenario("kettle_s1")).binning);
  EXPECT_EQ(c.size(), m.size());
}

TEST(Template, NeutralUsageMultiplier) {
  auto c = scenario("kettle_s1");
  c.usage.usage_profile = {1.0, 0.0, 0.0};
  c.usage.years_in_use = 0;
  const auto r = means(c);
  EXPECT_NEAR(r.at("hazard_per_demand_effective"), r.at("hazard_per_demand_operational"),
              0.01 * r.at("hazard_per_demand_operational"));
}

TEST(TemplateProperty, ExposureMonotone) {
  const auto s1 = means(scenario("teddy_s1"));
  auto c = scenario("teddy_s1");
  c.usage.demands_per_lifetime = CountPrior::point(200);
  const auto fewer = means(c);
  EXPECT_GT(s1.at("hazard_occurrence"), fewer.at("hazard_occurrence"));
  EXPECT_GT(s1.at("p_major_injury"), fewer.at("p_major_injury"));
}

TEST(TemplateProperty, ControlMonotone) {
  auto c = scenario("kettle_s1");
  double prev = 1.0;
  for (double eff : {0.0, 0.3, 0.6, 0.9}) {
    c.hazard_injury.control_effectiveness = eff;
    const double m = means(c).at("p_major_injury");
    EXPECT_LT(m, prev);
    prev = m;
  }
}

TEST(TemplateProperty, PoorTestingRaisesOperationalRate) {
  auto c = scenario("kettle_s1");
  const double typical = means(c).at("hazard_per_demand_operational");
  c.testing.strategy = "poor";
  EXPECT_GT(means(c).at("hazard_per_demand_operational"), typical);
}

TEST(TemplateProperty, WearNeverLowersEffectiveRate) {
  auto c = scenario("kettle_s1");
  double prev = 0.0;
  for (std::int64_t years : {0, 2, 5, 10}) {
    c.usage.years_in_use = years;
    const double m = means(c).at("hazard_per_demand_effective");
    EXPECT_GE(m, prev);
    prev = m;
  }
}

TEST(TemplateProperty, FewerInjuriesThanPredictedLowersPMajor) {
  auto c = scenario("kettle_s1");
  const double prior = means(c).at("p_major_injury");
  c.population.observed_major_injury_instances = 1;
  EXPECT_LT(means(c).at("p_major_injury"), prior);
}

TEST(TemplateProperty, CleanRecordBeatsHazardousOne) {
  auto clean = scenario("kettle_s1");
  clean.testing.demands_tested = CountPrior::point(100000);
  clean.testing.hazards_observed = 0;
  clean.manufacturer.years_in_operation = "over_20";
  clean.manufacturer.country_safety_record = "very_good";
  clean.manufacturer.customer_satisfaction = "very_high";
  clean.manufacturer.design_change = "major_improvement";
  const double best = means(clean).at("p_major_injury");
  for (auto name : {"kettle_s1", "teddy_s1", "teddy_s2"}) EXPECT_LT(best, means(scenario(name)).at("p_major_injury"));
}

TEST(Assess, BitIdenticalReports) {
  const auto c = scenario("teddy_s2");
  const auto a = canonical_dump(report_to_json(assess(c)));
  const auto b = canonical_dump(report_to_json(assess(c)));
  EXPECT_EQ(a, b);
  const auto j = json::parse(a);
  EXPECT_EQ(j["provenance"]["config_hash"], config_hash(c));
  EXPECT_EQ(j["provenance"]["engine_version"], kEngineVersion);
  EXPECT_EQ(j["provenance"]["default_bins"], 100);
}

TEST(Assess, ReportInvariants) {
  const auto r = assess(scenario("kettle_s1"));
  for (const auto& [id, d] : r.distributions) {
    double s = 0.0;
    for (double x : d.mass) s += x;
    EXPECT_NEAR(s, 1.0, 1e-6) << id;
  }
  EXPECT_GE(r.moments.at("major_injury_instances").p5, 0.0);
  EXPECT_GE(r.moments.at("minor_injury_instances").mean, 0.0);
}

TEST(CanonicalJson, SortedKeysAndSixDigits) {
  const json j{{"b", 1.0 / 3.0}, {"a", {1, 2}}, {"c", 1e-7}};
  EXPECT_EQ(canonical_dump(j), "{\n  \"a\": [1, 2],\n  \"b\": 0.333333,\n  \"c\": 1e-07\n}\n");
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}
