#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "riskbn/error.hpp"
#include "riskbn/product.hpp"

namespace riskbn {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& msg) {
  throw Error(ErrorCode::InvalidConfig, field + ": " + msg);
}

std::string normalize_label(std::string s) {
  for (auto& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-' || c == ' ') c = '_';
  }
  return s;
}

std::string pick_state(const std::string& field, const json& j, const std::vector<std::string>& allowed,
                       const std::map<std::string, std::string>& aliases = {}) {
  if (!j.is_string()) bad(field, "expected a state name");
  auto s = normalize_label(j.get<std::string>());
  if (auto it = aliases.find(s); it != aliases.end()) s = it->second;
  if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    bad(field, "unknown state '" + j.get<std::string>() + "' (expected one of " + list + ")");
  }
  return s;
}

std::string years_bucket(double years) {
  if (years < 1.0) return "under_1";
  if (years < 5.0) return "1_to_5";
  if (years < 10.0) return "5_to_10";
  if (years < 20.0) return "10_to_20";
  return "over_20";
}

std::string pick_years(const json& j) {
  const std::string field = "manufacturer.years_in_operation";
  if (j.is_number()) {
    if (j.get<double>() < 0.0) bad(field, "must be non-negative");
    return years_bucket(j.get<double>());
  }
  if (j.is_string()) {
    auto s = normalize_label(j.get<std::string>());
    if (!s.empty() && s.back() == '+') {
      try {
        return years_bucket(std::stod(s.substr(0, s.size() - 1)));
      } catch (const std::exception&) {
      }
    }
  }
  return pick_state(field, j, states::years, {{"5_10", "5_to_10"}, {"1_5", "1_to_5"}, {"10_20", "10_to_20"}});
}

double number(const std::string& field, const json& j) {
  if (!j.is_number()) bad(field, "expected a number");
  return j.get<double>();
}

std::int64_t integer(const std::string& field, const json& j) {
  const double v = number(field, j);
  if (v != std::floor(v)) bad(field, "expected an integer");
  return static_cast<std::int64_t>(v);
}

bool presence(const std::string& field, const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_string()) {
    const auto s = normalize_label(j.get<std::string>());
    if (s == "none" || s == "absent" || s == "no" || s == "false") return false;
    if (s == "present" || s == "yes" || s == "true") return true;
  }
  bad(field, "expected true/false or \"present\"/\"none\"");
}

CountPrior count_prior(const std::string& field, const json& j) {
  if (j.is_number()) return CountPrior::point(number(field, j));
  if (j.is_array()) {
    if (j.size() != 2) bad(field, "interval needs exactly [lo, hi]");
    return CountPrior::range(number(field + "[0]", j[0]), number(field + "[1]", j[1]));
  }
  if (j.is_object()) {
    if (j.contains("mean")) return CountPrior::normal(number(field + ".mean", j["mean"]), number(field + ".sd", j.value("sd", json(0.0))));
    if (j.contains("lo") && j.contains("hi"))
      return CountPrior::range(number(field + ".lo", j["lo"]), number(field + ".hi", j["hi"]));
  }
  bad(field, "expected a number, [lo, hi] or {\"mean\", \"sd\"}");
}

json count_prior_json(const CountPrior& c) {
  switch (c.shape) {
    case CountPrior::Shape::Point: return c.a;
    case CountPrior::Shape::Range: return json::array({c.a, c.b});
    case CountPrior::Shape::Normal: return json{{"mean", c.a}, {"sd", c.b}};
  }
  return nullptr;
}

const json& section(const json& j, const char* key) {
  if (!j.contains(key)) bad(key, "missing section");
  if (!j[key].is_object()) bad(key, "expected an object");
  return j[key];
}

void reject_unknown(const std::string& where, const json& j, std::initializer_list<const char*> known) {
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      bad(where.empty() ? k : where + "." + k, "unknown field");
  }
}

template <std::size_t N>
void read_array(const json& j, const char* key, std::array<double, N>& out) {
  if (!j.contains(key)) return;
  const std::string field = std::string("calibration.") + key;
  if (!j[key].is_array() || j[key].size() != N) bad(field, "expected an array of " + std::to_string(N) + " numbers");
  for (std::size_t i = 0; i < N; ++i) out[i] = number(field, j[key][i]);
}

void read_number(const json& j, const char* key, double& out) {
  if (j.contains(key)) out = number(std::string("calibration.") + key, j[key]);
}

Calibration calibration_from_json(const json& j) {
  reject_unknown("calibration", j,
                 {"strategy_multiplier", "quality_multiplier", "manufacturer_weights", "quality_variance",
                  "usage_multiplier", "wear_rate", "risk_weight_major", "risk_band_edges", "risk_variance",
                  "tolerability_variance", "perception_activation", "perception_leak"});
  Calibration c;
  read_array(j, "strategy_multiplier", c.strategy_multiplier);
  read_array(j, "quality_multiplier", c.quality_multiplier);
  read_array(j, "manufacturer_weights", c.manufacturer_weights);
  read_number(j, "quality_variance", c.quality_variance);
  read_array(j, "usage_multiplier", c.usage_multiplier);
  read_number(j, "wear_rate", c.wear_rate);
  read_number(j, "risk_weight_major", c.risk_weight_major);
  read_array(j, "risk_band_edges", c.risk_band_edges);
  read_number(j, "risk_variance", c.risk_variance);
  read_number(j, "tolerability_variance", c.tolerability_variance);
  read_array(j, "perception_activation", c.perception_activation);
  read_number(j, "perception_leak", c.perception_leak);
  return c;
}

json calibration_to_json(const Calibration& c) {
  return json{{"strategy_multiplier", c.strategy_multiplier},
              {"quality_multiplier", c.quality_multiplier},
              {"manufacturer_weights", c.manufacturer_weights},
              {"quality_variance", c.quality_variance},
              {"usage_multiplier", c.usage_multiplier},
              {"wear_rate", c.wear_rate},
              {"risk_weight_major", c.risk_weight_major},
              {"risk_band_edges", c.risk_band_edges},
              {"risk_variance", c.risk_variance},
              {"tolerability_variance", c.tolerability_variance},
              {"perception_activation", c.perception_activation},
              {"perception_leak", c.perception_leak}};
}

void check_probability(const std::string& field, double p) {
  if (!(p >= 0.0 && p <= 1.0)) bad(field, "probability must lie in [0, 1]");
}

void check_count_prior(const std::string& field, const CountPrior& c, bool allow_zero) {
  switch (c.shape) {
    case CountPrior::Shape::Point:
      if (!(c.a >= (allow_zero ? 0.0 : 1.0)) || c.a != std::floor(c.a))
        bad(field, allow_zero ? "must be a non-negative integer" : "must be a positive integer");
      break;
    case CountPrior::Shape::Range:
      if (!(c.a <= c.b)) bad(field, "interval needs lo <= hi");
      if (c.a < 0.0 || c.a != std::floor(c.a) || c.b != std::floor(c.b)) bad(field, "bounds must be non-negative integers");
      if (!allow_zero && c.b < 1.0) bad(field, "upper bound must be at least 1");
      break;
    case CountPrior::Shape::Normal:
      if (!(c.a > 0.0) || !std::isfinite(c.a)) bad(field, "mean must be positive");
      if (!(c.b >= 0.0) || !std::isfinite(c.b)) bad(field, "sd must be non-negative");
      break;
  }
  if (c.upper() > 100'000'000) bad(field, "values above 1e8 are not supported");
}

}  // namespace

std::int64_t CountPrior::upper() const {
  switch (shape) {
    case Shape::Point: return static_cast<std::int64_t>(std::llround(a));
    case Shape::Range: return static_cast<std::int64_t>(std::llround(b));
    case Shape::Normal: return static_cast<std::int64_t>(std::ceil(a + 6.0 * b));
  }
  return 0;
}

double CountPrior::mean() const { return shape == Shape::Range ? 0.5 * (a + b) : a; }

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) bad("scenario", "expected a JSON object");
  reject_unknown("", j,
                 {"schema_version", "name", "description", "testing", "manufacturer", "usage", "hazard_injury",
                  "population", "perception", "utility", "calibration", "binning"});
  ScenarioConfig c;
  if (j.contains("schema_version")) {
    c.schema_version = static_cast<int>(integer("schema_version", j["schema_version"]));
    if (c.schema_version != kScenarioSchemaVersion)
      bad("schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  if (j.contains("name")) {
    if (!j["name"].is_string()) bad("name", "expected a string");
    c.name = j["name"].get<std::string>();
  }

  const auto& t = section(j, "testing");
  reject_unknown("testing", t, {"demands_tested", "hazards_observed", "strategy"});
  if (!t.contains("demands_tested")) bad("testing.demands_tested", "missing");
  c.testing.demands_tested = count_prior("testing.demands_tested", t["demands_tested"]);
  if (c.testing.demands_tested.shape == CountPrior::Shape::Normal)
    bad("testing.demands_tested", "expected a number or [lo, hi]");
  if (!t.contains("hazards_observed")) bad("testing.hazards_observed", "missing");
  c.testing.hazards_observed = integer("testing.hazards_observed", t["hazards_observed"]);
  if (t.contains("strategy")) {
    c.testing.strategy = pick_state("testing.strategy", t["strategy"], states::strategy,
                                    {{"typical", "typical_of_normal_use"},
                                     {"beyond_scope", "beyond_intended_scope"},
                                     {"beyond", "beyond_intended_scope"}});
  }

  if (j.contains("manufacturer")) {
    const auto& m = section(j, "manufacturer");
    reject_unknown("manufacturer", m,
                   {"years_in_operation", "country_safety_record", "customer_satisfaction", "design_change"});
    if (m.contains("years_in_operation")) c.manufacturer.years_in_operation = pick_years(m["years_in_operation"]);
    if (m.contains("country_safety_record"))
      c.manufacturer.country_safety_record =
          pick_state("manufacturer.country_safety_record", m["country_safety_record"], states::safety_record);
    if (m.contains("customer_satisfaction"))
      c.manufacturer.customer_satisfaction =
          pick_state("manufacturer.customer_satisfaction", m["customer_satisfaction"], states::five);
    if (m.contains("design_change"))
      c.manufacturer.design_change = pick_state("manufacturer.design_change", m["design_change"], states::design_change,
                                                {{"major", "major_improvement"}, {"no_change", "none"}});
  }

  const auto& u = section(j, "usage");
  reject_unknown("usage", u, {"usage_profile", "demands_per_lifetime", "years_in_use"});
  if (u.contains("usage_profile")) {
    const auto& p = u["usage_profile"];
    if (!p.is_object()) bad("usage.usage_profile", "expected {state: probability}");
    c.usage.usage_profile = {0.0, 0.0, 0.0};
    for (const auto& [k, v] : p.items()) {
      const auto s = pick_state("usage.usage_profile", json(k), states::usage);
      const auto idx = static_cast<std::size_t>(std::find(states::usage.begin(), states::usage.end(), s) - states::usage.begin());
      c.usage.usage_profile[idx] = number("usage.usage_profile." + s, v);
    }
  }
  if (!u.contains("demands_per_lifetime")) bad("usage.demands_per_lifetime", "missing");
  c.usage.demands_per_lifetime = count_prior("usage.demands_per_lifetime", u["demands_per_lifetime"]);
  if (u.contains("years_in_use")) c.usage.years_in_use = integer("usage.years_in_use", u["years_in_use"]);

  const auto& h = section(j, "hazard_injury");
  reject_unknown("hazard_injury", h,
                 {"p_uncontrolled_major", "p_uncontrolled_minor", "control_present_prob", "control_effectiveness"});
  for (const char* k : {"p_uncontrolled_major", "p_uncontrolled_minor"})
    if (!h.contains(k)) bad(std::string("hazard_injury.") + k, "missing");
  c.hazard_injury.p_uncontrolled_major = number("hazard_injury.p_uncontrolled_major", h["p_uncontrolled_major"]);
  c.hazard_injury.p_uncontrolled_minor = number("hazard_injury.p_uncontrolled_minor", h["p_uncontrolled_minor"]);
  if (h.contains("control_present_prob"))
    c.hazard_injury.control_present_prob = number("hazard_injury.control_present_prob", h["control_present_prob"]);
  if (h.contains("control_effectiveness"))
    c.hazard_injury.control_effectiveness = number("hazard_injury.control_effectiveness", h["control_effectiveness"]);

  const auto& pop = section(j, "population");
  reject_unknown("population", pop,
                 {"n_instances", "observed_major_injury_instances", "observed_minor_injury_instances"});
  if (!pop.contains("n_instances")) bad("population.n_instances", "missing");
  c.population.n_instances = count_prior("population.n_instances", pop["n_instances"]);
  if (c.population.n_instances.shape == CountPrior::Shape::Normal)
    bad("population.n_instances", "expected a number or [lo, hi]");
  if (pop.contains("observed_major_injury_instances") && !pop["observed_major_injury_instances"].is_null())
    c.population.observed_major_injury_instances =
        integer("population.observed_major_injury_instances", pop["observed_major_injury_instances"]);
  if (pop.contains("observed_minor_injury_instances") && !pop["observed_minor_injury_instances"].is_null())
    c.population.observed_minor_injury_instances =
        integer("population.observed_minor_injury_instances", pop["observed_minor_injury_instances"]);

  if (j.contains("perception")) {
    const auto& pe = section(j, "perception");
    reject_unknown("perception", pe, {"media_stories", "warnings", "government_intervention_announced"});
    if (pe.contains("media_stories")) c.perception.media_stories = presence("perception.media_stories", pe["media_stories"]);
    if (pe.contains("warnings")) c.perception.warnings = presence("perception.warnings", pe["warnings"]);
    if (pe.contains("government_intervention_announced"))
      c.perception.government_intervention_announced =
          presence("perception.government_intervention_announced", pe["government_intervention_announced"]);
  }

  if (j.contains("utility")) c.utility = pick_state("utility", j["utility"], states::five);
  if (j.contains("calibration")) c.calibration = calibration_from_json(section(j, "calibration"));

  if (j.contains("binning")) {
    if (!j["binning"].is_array()) bad("binning", "expected an array of {node, bins, scheme}");
    for (const auto& b : j["binning"]) {
      if (!b.is_object() || !b.contains("node") || !b["node"].is_string()) bad("binning", "entry needs a node id");
      BinOverride o;
      if (b.contains("bins")) o.bins = static_cast<int>(integer("binning.bins", b["bins"]));
      if (b.contains("scheme")) {
        if (!b["scheme"].is_string()) bad("binning.scheme", "expected a scheme name");
        o.scheme = scheme_from_name(b["scheme"].get<std::string>());
        if (!o.scheme) bad("binning.scheme", "unknown scheme '" + b["scheme"].get<std::string>() + "'");
      }
      c.binning[b["node"].get<std::string>()] = o;
    }
  }

  validate_scenario(c);
  return c;
}

void validate_scenario(const ScenarioConfig& c) {
  check_count_prior("testing.demands_tested", c.testing.demands_tested, false);
  if (c.testing.hazards_observed < 0) bad("testing.hazards_observed", "must be non-negative");
  if (c.testing.hazards_observed > c.testing.demands_tested.upper())
    bad("testing.hazards_observed", "exceeds the number of demands tested");
  if (std::find(states::strategy.begin(), states::strategy.end(), c.testing.strategy) == states::strategy.end())
    bad("testing.strategy", "unknown state '" + c.testing.strategy + "'");

  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    check_probability("usage.usage_profile." + states::usage[i], c.usage.usage_profile[i]);
    total += c.usage.usage_profile[i];
  }
  if (std::abs(total - 1.0) > 1e-9) bad("usage.usage_profile", "probabilities must sum to 1");
  check_count_prior("usage.demands_per_lifetime", c.usage.demands_per_lifetime, true);
  if (c.usage.years_in_use < 0 || c.usage.years_in_use > 100) bad("usage.years_in_use", "must lie in [0, 100]");

  check_probability("hazard_injury.p_uncontrolled_major", c.hazard_injury.p_uncontrolled_major);
  check_probability("hazard_injury.p_uncontrolled_minor", c.hazard_injury.p_uncontrolled_minor);
  check_probability("hazard_injury.control_present_prob", c.hazard_injury.control_present_prob);
  check_probability("hazard_injury.control_effectiveness", c.hazard_injury.control_effectiveness);

  check_count_prior("population.n_instances", c.population.n_instances, false);
  const auto n_hi = c.population.n_instances.upper();
  for (const auto& [field, obs] : {std::pair{"population.observed_major_injury_instances", c.population.observed_major_injury_instances},
                                   std::pair{"population.observed_minor_injury_instances", c.population.observed_minor_injury_instances}}) {
    if (!obs) continue;
    if (*obs < 0) bad(field, "must be non-negative");
    if (*obs > n_hi) bad(field, "exceeds the upper bound of n_instances");
  }
  if (std::find(states::five.begin(), states::five.end(), c.utility) == states::five.end())
    bad("utility", "unknown state '" + c.utility + "'");

  const auto& k = c.calibration;
  for (double m : k.strategy_multiplier)
    if (!(m > 0.0)) bad("calibration.strategy_multiplier", "multipliers must be positive");
  for (double m : k.quality_multiplier)
    if (!(m > 0.0)) bad("calibration.quality_multiplier", "multipliers must be positive");
  for (double m : k.usage_multiplier)
    if (!(m > 0.0)) bad("calibration.usage_multiplier", "multipliers must be positive");
  double wsum = 0.0;
  for (double w : k.manufacturer_weights) {
    if (!(w >= 0.0)) bad("calibration.manufacturer_weights", "weights must be non-negative");
    wsum += w;
  }
  if (!(wsum > 0.0)) bad("calibration.manufacturer_weights", "weights must not all be zero");
  if (!(k.wear_rate >= 0.0)) bad("calibration.wear_rate", "must be non-negative");
  check_probability("calibration.risk_weight_major", k.risk_weight_major);
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(k.risk_band_edges[i] > 0.0 && k.risk_band_edges[i] < 1.0))
      bad("calibration.risk_band_edges", "edges must lie in (0, 1)");
    if (i && !(k.risk_band_edges[i] > k.risk_band_edges[i - 1]))
      bad("calibration.risk_band_edges", "edges must be increasing");
  }
  for (double v : {k.quality_variance, k.risk_variance, k.tolerability_variance})
    if (!(v > 0.0)) bad("calibration", "variances must be positive");
  for (double a : k.perception_activation) check_probability("calibration.perception_activation", a);
  check_probability("calibration.perception_leak", k.perception_leak);
  for (const auto& [id, o] : c.binning)
    if (o.bins != 0 && o.bins < 2) bad("binning." + id, "bin count must be at least 2");
}

json scenario_to_json(const ScenarioConfig& c) {
  json manufacturer = json::object();
  if (c.manufacturer.years_in_operation) manufacturer["years_in_operation"] = *c.manufacturer.years_in_operation;
  if (c.manufacturer.country_safety_record) manufacturer["country_safety_record"] = *c.manufacturer.country_safety_record;
  if (c.manufacturer.customer_satisfaction) manufacturer["customer_satisfaction"] = *c.manufacturer.customer_satisfaction;
  if (c.manufacturer.design_change) manufacturer["design_change"] = *c.manufacturer.design_change;

  json profile = json::object();
  for (std::size_t i = 0; i < 3; ++i) profile[states::usage[i]] = c.usage.usage_profile[i];

  json population{{"n_instances", count_prior_json(c.population.n_instances)}};
  if (c.population.observed_major_injury_instances)
    population["observed_major_injury_instances"] = *c.population.observed_major_injury_instances;
  if (c.population.observed_minor_injury_instances)
    population["observed_minor_injury_instances"] = *c.population.observed_minor_injury_instances;

  json binning = json::array();
  for (const auto& [id, o] : c.binning) {
    json b{{"node", id}};
    if (o.bins) b["bins"] = o.bins;
    if (o.scheme) b["scheme"] = scheme_name(*o.scheme);
    binning.push_back(b);
  }

  json j{{"schema_version", c.schema_version},
         {"name", c.name},
         {"testing",
          {{"demands_tested", count_prior_json(c.testing.demands_tested)},
           {"hazards_observed", c.testing.hazards_observed},
           {"strategy", c.testing.strategy}}},
         {"manufacturer", manufacturer},
         {"usage",
          {{"usage_profile", profile},
           {"demands_per_lifetime", count_prior_json(c.usage.demands_per_lifetime)},
           {"years_in_use", c.usage.years_in_use}}},
         {"hazard_injury",
          {{"p_uncontrolled_major", c.hazard_injury.p_uncontrolled_major},
           {"p_uncontrolled_minor", c.hazard_injury.p_uncontrolled_minor},
           {"control_present_prob", c.hazard_injury.control_present_prob},
           {"control_effectiveness", c.hazard_injury.control_effectiveness}}},
         {"population", population},
         {"perception",
          {{"media_stories", c.perception.media_stories},
           {"warnings", c.perception.warnings},
           {"government_intervention_announced", c.perception.government_intervention_announced}}},
         {"utility", c.utility},
         {"calibration", calibration_to_json(c.calibration)}};
  if (!binning.empty()) j["binning"] = binning;
  return j;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, path + ": file not found");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::Parse, path + ": " + ex.what());
  }
  return scenario_from_json(j);
}

}  // namespace riskbn
