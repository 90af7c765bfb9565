#include <algorithm>
#include <cmath>

#include "riskbn/cpt.hpp"
#include "riskbn/error.hpp"
#include "riskbn/product.hpp"

namespace riskbn {

namespace {

std::vector<double> uniform_prior(std::size_t k) { return std::vector<double>(k, 1.0 / static_cast<double>(k)); }

std::int64_t support_max(const CountPrior& c) { return std::max<std::int64_t>(1, c.upper()); }

/// Prior CPD for a count node described by `c`.
CpdExpr count_cpd(const CountPrior& c) {
  switch (c.shape) {
    case CountPrior::Shape::Point: return cpd::uniform(lit(c.a), lit(c.a));
    case CountPrior::Shape::Range: return cpd::uniform(lit(c.a), lit(c.b));
    case CountPrior::Shape::Normal:
      if (c.b == 0.0) return cpd::uniform(lit(std::round(c.a)), lit(std::round(c.a)));
      return cpd::tnormal(lit(c.a), lit(c.b * c.b), -0.5, static_cast<double>(support_max(c)) + 0.5);
  }
  return {};
}

void add(ModelSpec& m, const std::string& id, NodeKind kind, CpdExpr cpd) {
  m.add_node(NodeSpec{id, std::move(kind), std::move(cpd)});
}

/// Adds edges for every parent the node's CPD reads, in the given order.
void connect(ModelSpec& m, const std::string& id, const std::vector<std::string>& parents) {
  for (const auto& p : parents) m.add_edge(p, id);
}

void add_testing(ModelSpec& m, const ScenarioConfig::Testing& t) {
  const auto n_max = support_max(t.demands_tested);
  add(m, node::testing_strategy, Ranked{states::strategy}, cpd::prior(uniform_prior(3)));
  add(m, node::demands_tested, Count{n_max}, count_cpd(t.demands_tested));
  add(m, node::p_hazard_testing, Continuous{0.0, 1.0}, cpd::beta(lit(1.0), lit(1.0)));
  add(m, node::hazards_observed, Count{n_max}, cpd::binomial(ref(node::demands_tested), ref(node::p_hazard_testing)));
  connect(m, node::hazards_observed, {node::demands_tested, node::p_hazard_testing});
}

/// Operational rate: testing rate scaled by strategy, optionally by quality.
CpdExpr operational_cpd(const Calibration& k, bool with_quality) {
  std::vector<CpdExpr> by_strategy;
  for (std::size_t s = 0; s < 3; ++s) {
    if (!with_quality) {
      by_strategy.push_back(cpd::deterministic(minimum(lit(1.0), ref(node::p_hazard_testing) * lit(k.strategy_multiplier[s]))));
      continue;
    }
    std::vector<CpdExpr> by_quality;
    for (std::size_t q = 0; q < 5; ++q) {
      by_quality.push_back(cpd::deterministic(minimum(
          lit(1.0), ref(node::p_hazard_testing) * lit(k.strategy_multiplier[s] * k.quality_multiplier[q]))));
    }
    by_strategy.push_back(cpd::partitioned(node::manufacturer_quality, std::move(by_quality)));
  }
  return cpd::partitioned(node::testing_strategy, std::move(by_strategy));
}

CpdExpr injury_cpd(double p_uncontrolled, double control_effectiveness) {
  return cpd::partitioned(node::control_present,
                          {cpd::deterministic(ref(node::hazard_occurrence) * lit(p_uncontrolled)),
                           cpd::deterministic(ref(node::hazard_occurrence) *
                                              lit(p_uncontrolled * (1.0 - control_effectiveness)))});
}

CpdExpr tolerability_cpd(const Calibration& k) {
  return cpd::tnormal((lit(2.0) * (lit(1.0) - ref(node::risk_level)) + ref(node::utility)) / lit(3.0),
                      lit(k.tolerability_variance));
}

CpdExpr intervention_cpd() {
  // intervene exactly when tolerability is low or very low
  return cpd::table({node::risk_tolerability}, {{0.0, 1.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}});
}

CpdExpr perception_cpd(const Calibration& k) {
  return noisy_or({node::media_stories, node::warnings, node::government_intervention_announced},
                  {k.perception_activation.begin(), k.perception_activation.end()}, k.perception_leak);
}

void add_perception(ModelSpec& m, const Calibration& k) {
  for (const char* cause : {node::media_stories, node::warnings, node::government_intervention_announced})
    add(m, cause, Boolean{}, cpd::prior({0.5, 0.5}));
  add(m, node::perception_change, Boolean{}, perception_cpd(k));
  connect(m, node::perception_change, {node::media_stories, node::warnings, node::government_intervention_announced});
}

void add_counts(ModelSpec& m, const CountPrior& n_instances) {
  const auto n_max = support_max(n_instances);
  add(m, node::n_instances, Count{n_max}, count_cpd(n_instances));
  add(m, node::major_injury_instances, Count{n_max}, cpd::binomial(ref(node::n_instances), ref(node::p_major_injury)));
  add(m, node::minor_injury_instances, Count{n_max}, cpd::binomial(ref(node::n_instances), ref(node::p_minor_injury)));
  connect(m, node::major_injury_instances, {node::n_instances, node::p_major_injury});
  connect(m, node::minor_injury_instances, {node::n_instances, node::p_minor_injury});
}

std::string bool_state(bool b) { return b ? "true" : "false"; }

/// Explicit partitions for count nodes whose prior is a point or range.
void add_range_bins(BinningConfig& b, const std::string& id, const CountPrior& c, int pieces) {
  if (b.overrides.count(id) || c.shape == CountPrior::Shape::Normal) return;
  const auto n_max = support_max(c);
  b.explicit_bins[id] = make_range_bins(id, n_max, static_cast<std::int64_t>(c.a), static_cast<std::int64_t>(c.b), pieces);
}

int range_pieces(int default_bins) { return std::max(1, default_bins / 10); }

}  // namespace

Expr risk_position(const Expr& p_major, const Expr& p_minor, const Calibration& k) {
  const double w = k.risk_weight_major;
  const Expr level = log10_of(lit(w) * p_major + lit(1.0 - w) * p_minor);
  std::array<double, 6> knots{};
  for (std::size_t i = 0; i < 4; ++i) knots[i + 1] = std::log10(k.risk_band_edges[i]);
  knots[0] = knots[1] - (knots[2] - knots[1]);
  knots[5] = knots[4] + (knots[4] - knots[3]);
  // piecewise linear in log10: each band occupies a fifth of [0,1]
  Expr pos = lit(0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    const Expr frac = (level - lit(knots[i])) / lit(knots[i + 1] - knots[i]);
    pos = pos + lit(0.2) * minimum(lit(1.0), maximum(lit(0.0), frac));
  }
  return pos;
}

ModelSpec build_product_risk_bn(const ScenarioConfig& config) {
  validate_scenario(config);
  const auto& k = config.calibration;
  ModelSpec m;

  add_testing(m, config.testing);

  add(m, node::years_in_operation, Ranked{states::years}, cpd::prior(uniform_prior(5)));
  add(m, node::country_safety_record, Ranked{states::safety_record}, cpd::prior(uniform_prior(5)));
  add(m, node::customer_satisfaction, Ranked{states::five}, cpd::prior(uniform_prior(5)));
  add(m, node::design_change, Ranked{states::design_change}, cpd::prior(uniform_prior(3)));
  {
    const auto& w = k.manufacturer_weights;
    const double total = w[0] + w[1] + w[2] + w[3];
    const Expr mean = (lit(w[0]) * ref(node::years_in_operation) + lit(w[1]) * ref(node::country_safety_record) +
                       lit(w[2]) * ref(node::customer_satisfaction) + lit(w[3]) * ref(node::design_change)) /
                      lit(total);
    add(m, node::manufacturer_quality, Ranked{states::five}, cpd::tnormal(mean, lit(k.quality_variance)));
    connect(m, node::manufacturer_quality,
            {node::years_in_operation, node::country_safety_record, node::customer_satisfaction, node::design_change});
  }

  add(m, node::p_hazard_operational, Continuous{0.0, 1.0}, operational_cpd(k, true));
  connect(m, node::p_hazard_operational, {node::testing_strategy, node::manufacturer_quality, node::p_hazard_testing});

  add(m, node::particular_product_usage, Labelled{states::usage},
      cpd::prior({config.usage.usage_profile.begin(), config.usage.usage_profile.end()}));
  {
    const double years = static_cast<double>(config.usage.years_in_use);
    add(m, node::years_in_use, Count{std::max<std::int64_t>(1, config.usage.years_in_use)},
        cpd::uniform(lit(years), lit(years)));
    std::vector<CpdExpr> by_usage;
    for (std::size_t u = 0; u < 3; ++u) {
      by_usage.push_back(cpd::deterministic(
          minimum(lit(1.0), ref(node::p_hazard_operational) * lit(k.usage_multiplier[u]) *
                                power(lit(1.0 + k.wear_rate), ref(node::years_in_use)))));
    }
    add(m, node::p_hazard_effective, Continuous{0.0, 1.0}, cpd::partitioned(node::particular_product_usage, std::move(by_usage)));
    connect(m, node::p_hazard_effective, {node::particular_product_usage, node::p_hazard_operational, node::years_in_use});
  }

  add(m, node::number_of_demands, Count{support_max(config.usage.demands_per_lifetime)},
      count_cpd(config.usage.demands_per_lifetime));
  add(m, node::hazard_occurrence, Continuous{0.0, 1.0},
      cpd::deterministic(exposure(ref(node::p_hazard_effective), ref(node::number_of_demands))));
  connect(m, node::hazard_occurrence, {node::p_hazard_effective, node::number_of_demands});

  const auto& h = config.hazard_injury;
  add(m, node::control_present, Boolean{}, cpd::prior({1.0 - h.control_present_prob, h.control_present_prob}));
  add(m, node::p_major_injury, Continuous{0.0, 1.0}, injury_cpd(h.p_uncontrolled_major, h.control_effectiveness));
  add(m, node::p_minor_injury, Continuous{0.0, 1.0}, injury_cpd(h.p_uncontrolled_minor, h.control_effectiveness));
  connect(m, node::p_major_injury, {node::control_present, node::hazard_occurrence});
  connect(m, node::p_minor_injury, {node::control_present, node::hazard_occurrence});

  add_counts(m, config.population.n_instances);

  add(m, node::risk_level, Ranked{states::five},
      cpd::tnormal(risk_position(ref(node::p_major_injury), ref(node::p_minor_injury), k), lit(k.risk_variance)));
  connect(m, node::risk_level, {node::p_major_injury, node::p_minor_injury});
  add(m, node::utility, Ranked{states::five}, cpd::prior(uniform_prior(5)));
  add(m, node::risk_tolerability, Ranked{states::five}, tolerability_cpd(k));
  connect(m, node::risk_tolerability, {node::risk_level, node::utility});
  add(m, node::government_intervention, Boolean{}, intervention_cpd());
  connect(m, node::government_intervention, {node::risk_tolerability});

  add_perception(m, k);
  return m;
}

BuiltModel build_scenario(const ScenarioConfig& config, int default_bins) {
  BuiltModel b;
  b.model = build_product_risk_bn(config);
  b.binning.default_bins = default_bins;
  b.binning.overrides = config.binning;
  const int pieces = range_pieces(default_bins);
  add_range_bins(b.binning, node::demands_tested, config.testing.demands_tested, pieces);
  add_range_bins(b.binning, node::number_of_demands, config.usage.demands_per_lifetime, pieces);
  add_range_bins(b.binning, node::n_instances, config.population.n_instances, pieces);
  add_range_bins(b.binning, node::years_in_use, CountPrior::point(static_cast<double>(config.usage.years_in_use)), 1);

  auto& e = b.evidence;
  e[node::testing_strategy] = DiscreteState{config.testing.strategy};
  e[node::hazards_observed] = Point{static_cast<double>(config.testing.hazards_observed)};
  const auto& mf = config.manufacturer;
  if (mf.years_in_operation) e[node::years_in_operation] = DiscreteState{*mf.years_in_operation};
  if (mf.country_safety_record) e[node::country_safety_record] = DiscreteState{*mf.country_safety_record};
  if (mf.customer_satisfaction) e[node::customer_satisfaction] = DiscreteState{*mf.customer_satisfaction};
  if (mf.design_change) e[node::design_change] = DiscreteState{*mf.design_change};
  if (config.population.observed_major_injury_instances)
    e[node::major_injury_instances] = Point{static_cast<double>(*config.population.observed_major_injury_instances)};
  if (config.population.observed_minor_injury_instances)
    e[node::minor_injury_instances] = Point{static_cast<double>(*config.population.observed_minor_injury_instances)};
  e[node::utility] = DiscreteState{config.utility};
  e[node::media_stories] = DiscreteState{bool_state(config.perception.media_stories)};
  e[node::warnings] = DiscreteState{bool_state(config.perception.warnings)};
  e[node::government_intervention_announced] =
      DiscreteState{bool_state(config.perception.government_intervention_announced)};
  return b;
}

// Fragments ---------------------------------------------------------------------------

BuiltModel testing_fragment(std::int64_t demands, std::int64_t hazards, const std::string& strategy,
                            const Calibration& calibration, int default_bins) {
  if (demands < 1 || hazards < 0 || hazards > demands)
    throw Error(ErrorCode::InvalidConfig, "testing fragment needs 0 <= hazards <= demands, demands >= 1");
  BuiltModel b;
  ScenarioConfig::Testing t;
  t.demands_tested = CountPrior::point(static_cast<double>(demands));
  t.hazards_observed = hazards;
  add_testing(b.model, t);
  add(b.model, node::p_hazard_operational, Continuous{0.0, 1.0}, operational_cpd(calibration, false));
  connect(b.model, node::p_hazard_operational, {node::testing_strategy, node::p_hazard_testing});
  b.binning.default_bins = default_bins;
  add_range_bins(b.binning, node::demands_tested, t.demands_tested, range_pieces(default_bins));
  b.evidence[node::testing_strategy] = DiscreteState{strategy};
  b.evidence[node::hazards_observed] = Point{static_cast<double>(hazards)};
  return b;
}

BuiltModel count_fragment(const CountPrior& n_instances, const CpdExpr& p_major, const CpdExpr& p_minor,
                          int default_bins) {
  BuiltModel b;
  add(b.model, node::p_major_injury, Continuous{0.0, 1.0}, p_major);
  add(b.model, node::p_minor_injury, Continuous{0.0, 1.0}, p_minor);
  add_counts(b.model, n_instances);
  b.binning.default_bins = default_bins;
  add_range_bins(b.binning, node::n_instances, n_instances, range_pieces(default_bins));
  return b;
}

BuiltModel perception_fragment(bool media, bool warnings, bool intervention, const Calibration& calibration) {
  BuiltModel b;
  add_perception(b.model, calibration);
  b.evidence[node::media_stories] = DiscreteState{bool_state(media)};
  b.evidence[node::warnings] = DiscreteState{bool_state(warnings)};
  b.evidence[node::government_intervention_announced] = DiscreteState{bool_state(intervention)};
  return b;
}

// Building blocks ---------------------------------------------------------------------

double hazard_occurrence_prob(double p_per_demand, double n_demands) {
  return exposure_probability(p_per_demand, n_demands);
}

double injury_prob(double p_occurrence, double p_uncontrolled_injury, double control_present_prob,
                   double control_effectiveness) {
  return p_occurrence * p_uncontrolled_injury * (1.0 - control_present_prob * control_effectiveness);
}

InjuryCounts expected_injury_counts(const CountPrior& n_instances, const CpdExpr& p_major, const CpdExpr& p_minor,
                                    int default_bins) {
  const auto b = count_fragment(n_instances, p_major, p_minor, default_bins);
  const auto compiled = compile(b.model, b.binning);
  const auto post = posterior(compiled, Evidence{},
                              std::vector<std::string>{node::major_injury_instances, node::minor_injury_instances});
  return {post[0].mean(), post[1].mean()};
}

namespace {

VariableDomain value_domain(const std::string& id, const std::vector<double>& values) {
  VariableDomain d;
  d.id = id;
  d.kind = Continuous{0.0, 1.0};
  d.values = values;
  return d;
}

}  // namespace

std::vector<double> classify_risk_level(const Posterior& p_major, const Posterior& p_minor,
                                        const Calibration& calibration) {
  const auto a = value_domain(node::p_major_injury, p_major.values);
  const auto b = value_domain(node::p_minor_injury, p_minor.values);
  const auto child = discrete_domain(node::risk_level, Ranked{states::five});
  const std::vector<const VariableDomain*> parents{&a, &b};
  const std::vector<std::string> ids{a.id, b.id};
  const auto cpd = cpd::tnormal(risk_position(ref(a.id), ref(b.id), calibration), lit(calibration.risk_variance));
  const auto cpt = expression_to_cpt(cpd, parents, ids, child, {ExecPolicy::Serial});
  std::vector<double> out(5, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (p_major.mass[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double w = p_major.mass[i] * p_minor.mass[j];
      if (w == 0.0) continue;
      const auto col = cpt.column(i * b.size() + j);
      for (std::size_t k = 0; k < 5; ++k) out[k] += w * col[k];
    }
  }
  return out;
}

Tolerability tolerability_and_recommendation(const std::vector<double>& risk_level, const std::string& utility,
                                             const Calibration& calibration) {
  if (risk_level.size() != 5) throw Error(ErrorCode::InvalidConfig, "risk level needs five states");
  auto it = std::find(states::five.begin(), states::five.end(), utility);
  if (it == states::five.end()) throw Error(ErrorCode::InvalidConfig, "unknown utility state '" + utility + "'");
  const auto u = static_cast<std::size_t>(it - states::five.begin());

  const auto risk = discrete_domain(node::risk_level, Ranked{states::five});
  const auto util = discrete_domain(node::utility, Ranked{states::five});
  const auto tol = discrete_domain(node::risk_tolerability, Ranked{states::five});
  const std::vector<const VariableDomain*> parents{&risk, &util};
  const std::vector<std::string> ids{risk.id, util.id};
  const auto cpt = expression_to_cpt(tolerability_cpd(calibration), parents, ids, tol, {ExecPolicy::Serial});

  const auto gov = discrete_domain(node::government_intervention, Boolean{});
  const std::vector<const VariableDomain*> gov_parents{&tol};
  const std::vector<std::string> gov_ids{tol.id};
  const auto gov_cpt = expression_to_cpt(intervention_cpd(), gov_parents, gov_ids, gov, {ExecPolicy::Serial});

  Tolerability out;
  out.tolerability.assign(5, 0.0);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto col = cpt.column(r * 5 + u);
    for (std::size_t k = 0; k < 5; ++k) out.tolerability[k] += risk_level[r] * col[k];
  }
  for (std::size_t k = 0; k < 5; ++k) out.p_intervene += out.tolerability[k] * gov_cpt.column(k)[1];
  return out;
}

double perception_change(bool media, bool warnings, bool intervention, const Calibration& calibration) {
  const auto table = std::get<TableCpd>(perception_cpd(calibration).body);
  const std::size_t row = (media ? 4u : 0u) + (warnings ? 2u : 0u) + (intervention ? 1u : 0u);
  return table.rows[row][1];
}

}  // namespace riskbn
