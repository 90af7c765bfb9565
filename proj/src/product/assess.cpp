#include <algorithm>
#include <cstdio>

#include "riskbn/canonical_json.hpp"
#include "riskbn/error.hpp"
#include "riskbn/product.hpp"

namespace riskbn {

using nlohmann::json;

std::string Distribution::mode() const {
  if (mass.empty()) return {};
  return labels[static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin())];
}

double Distribution::mass_of(const std::vector<std::string>& states) const {
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (std::find(states.begin(), states.end(), labels[i]) != states.end()) s += mass[i];
  return s;
}

const std::vector<std::pair<std::string, std::string>>& report_moment_nodes() {
  static const std::vector<std::pair<std::string, std::string>> nodes{
      {node::p_hazard_testing, "hazard_per_demand_testing"},
      {node::p_hazard_operational, "hazard_per_demand_operational"},
      {node::p_hazard_effective, "hazard_per_demand_effective"},
      {node::hazard_occurrence, "hazard_occurrence"},
      {node::p_major_injury, "p_major_injury"},
      {node::p_minor_injury, "p_minor_injury"},
      {node::major_injury_instances, "major_injury_instances"},
      {node::minor_injury_instances, "minor_injury_instances"},
  };
  return nodes;
}

const std::vector<std::string>& report_distribution_nodes() {
  static const std::vector<std::string> nodes{node::risk_level, node::risk_tolerability, node::government_intervention,
                                              node::perception_change};
  return nodes;
}

std::string config_hash(const ScenarioConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_dump(scenario_to_json(config)))));
  return buf;
}

std::string evidence_to_string(const std::string& node, const Observation& o) {
  if (const auto* s = std::get_if<DiscreteState>(&o)) return node + " = " + s->state;
  if (const auto* p = std::get_if<Point>(&o)) return node + " = " + format_number(p->value);
  const auto& iv = std::get<Interval>(o);
  return node + " in [" + format_number(iv.lo) + ", " + format_number(iv.hi) + "]";
}

AssessmentReport assess_compiled(const ScenarioConfig& config, const CompiledModel& compiled,
                                 const Evidence& evidence, const AssessOptions& options) {
  std::vector<std::string> query;
  for (const auto& [id, key] : report_moment_nodes()) query.push_back(id);
  for (const auto& id : report_distribution_nodes()) query.push_back(id);

  const auto post = posterior(compiled, evidence, query);

  AssessmentReport r;
  r.scenario = config.name;
  std::size_t i = 0;
  for (const auto& [id, key] : report_moment_nodes()) r.moments[key] = *post[i++].moments;
  for (const auto& id : report_distribution_nodes()) {
    const auto& p = post[i++];
    r.distributions[id] = Distribution{p.labels, p.mass};
  }
  r.risk_level_mode = r.distributions[node::risk_level].mode();
  r.p_intervene = r.distributions[node::government_intervention].mass[1];
  r.intervene = r.p_intervene > 0.5;

  r.provenance.config_hash = config_hash(config);
  r.provenance.seed = options.seed;
  r.provenance.default_bins = compiled.binning().default_bins;
  for (std::size_t v = 0; v < compiled.size(); ++v) {
    const auto& d = compiled.domain(v);
    if (d.binned()) r.provenance.node_bins[d.id] = d.size();
  }
  for (const auto& [node, o] : evidence) r.provenance.evidence.push_back(evidence_to_string(node, o));

  if (options.samples > 0) {
    std::vector<std::string> ids;
    for (const auto& [id, key] : report_moment_nodes()) ids.push_back(id);
    const auto sampled = sample_posterior(compiled, evidence, ids, options.samples, options.seed);
    std::size_t k = 0;
    for (const auto& [id, key] : report_moment_nodes()) {
      r.sampled_means[key] = {sampled[k].mean(), sampled[k].mean_std_error};
      ++k;
    }
  }
  return r;
}

AssessmentReport assess(const ScenarioConfig& config, const AssessOptions& options) {
  const auto built = build_scenario(config, options.bins);
  const auto compiled = compile(built.model, built.binning);
  Evidence evidence = built.evidence;
  for (const auto& [node, o] : options.extra_evidence) evidence[node] = o;
  return assess_compiled(config, compiled, evidence, options);
}

json report_to_json(const AssessmentReport& r) {
  json moments = json::object();
  for (const auto& [key, m] : r.moments) {
    moments[key] = json{{"mean", m.mean}, {"variance", m.variance}, {"p5", m.p5}, {"p50", m.p50}, {"p95", m.p95}};
  }
  json dists = json::object();
  for (const auto& [id, d] : r.distributions) {
    dists[id] = json{{"states", d.labels}, {"mass", d.mass}, {"mode", d.mode()}};
  }
  json node_bins = json::object();
  for (const auto& [id, n] : r.provenance.node_bins) node_bins[id] = n;
  json j{{"scenario", r.scenario},
         {"moments", moments},
         {"distributions", dists},
         {"verdict",
          {{"risk_level_mode", r.risk_level_mode},
           {"p_intervene", r.p_intervene},
           {"recommendation", r.intervene ? "intervene" : "no_intervention"}}},
         {"provenance",
          {{"config_hash", r.provenance.config_hash},
           {"engine_version", r.provenance.engine_version},
           {"seed", r.provenance.seed},
           {"default_bins", r.provenance.default_bins},
           {"node_bins", node_bins},
           {"evidence", r.provenance.evidence}}}};
  if (!r.sampled_means.empty()) {
    json s = json::object();
    for (const auto& [key, v] : r.sampled_means) s[key] = json{{"mean", v.first}, {"std_error", v.second}};
    j["sampled_means"] = s;
  }
  return j;
}

RapexComparison compare_with_rapex(const AssessmentReport& r, int severity) {
  RapexComparison c;
  rapex::InjuryScenario s;
  s.description = r.scenario + ": posterior mean probability of a major injury";
  s.steps.push_back({"major injury", r.moments.at("p_major_injury").mean});
  s.severity = severity;
  c.rapex = rapex::assess(s);
  const auto& level = r.distributions.at(node::risk_level);
  c.bn_risk_level_mode = level.mode();
  c.bn_low_mass = level.mass_of({"very_low", "low"});
  const bool rapex_high = c.rapex.risk == rapex::RiskClass::High || c.rapex.risk == rapex::RiskClass::Serious;
  const bool bn_high = c.bn_risk_level_mode == "high" || c.bn_risk_level_mode == "very_high";
  c.agree = rapex_high == bn_high;
  return c;
}

json comparison_to_json(const RapexComparison& c) {
  return json{{"rapex", rapex::to_json(c.rapex)},
              {"bn_risk_level_mode", c.bn_risk_level_mode},
              {"bn_low_mass", c.bn_low_mass},
              {"agree", c.agree}};
}

}  // namespace riskbn
