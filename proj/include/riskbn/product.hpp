#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "riskbn/infer.hpp"
#include "riskbn/model.hpp"
#include "riskbn/rapex.hpp"

namespace riskbn {

inline constexpr int kScenarioSchemaVersion = 1;

/// State labels used by the template.
namespace states {
inline const std::vector<std::string> strategy{"poor", "typical_of_normal_use", "beyond_intended_scope"};
inline const std::vector<std::string> five{"very_low", "low", "medium", "high", "very_high"};
inline const std::vector<std::string> years{"under_1", "1_to_5", "5_to_10", "10_to_20", "over_20"};
inline const std::vector<std::string> safety_record{"very_poor", "poor", "average", "good", "very_good"};
inline const std::vector<std::string> design_change{"none", "minor", "major_improvement"};
inline const std::vector<std::string> usage{"as_intended", "minor_deviation", "major_deviation"};
}  // namespace states

/// Template constants with no published value. Every field can be
/// overridden from the scenario file's "calibration" block.
struct Calibration {
  /// Operational / testing hazard rate by testing strategy (poor, typical,
  /// beyond scope).
  std::array<double, 3> strategy_multiplier{20.0, 1.0, 0.5};
  /// Hazard-rate factor by manufacturer quality, very_low .. very_high.
  std::array<double, 5> quality_multiplier{1.5, 1.0, 0.8, 0.4, 0.1};
  /// Weights of years in operation, safety record, satisfaction, design change.
  std::array<double, 4> manufacturer_weights{1.0, 1.0, 1.0, 1.0};
  double quality_variance = 0.01;
  /// Hazard-rate factor by usage (as intended, minor, major deviation).
  std::array<double, 3> usage_multiplier{1.0, 2.0, 5.0};
  /// Wear multiplier (1 + wear_rate)^years_in_use.
  double wear_rate = 0.1;
  /// Risk level reads w * p_major + (1 - w) * p_minor.
  double risk_weight_major = 2.0 / 3.0;
  /// Weighted injury probabilities separating very_low|low|medium|high|very_high.
  std::array<double, 4> risk_band_edges{1.5848931924611134e-3, 2.5118864315095795e-3, 3.9810717055349725e-3,
                                        6.3095734448019329e-3};
  double risk_variance = 0.005;
  double tolerability_variance = 0.01;
  /// Noisy-OR activations for media stories, warnings, announced intervention.
  std::array<double, 3> perception_activation{0.6, 0.5, 0.8};
  double perception_leak = 0.02;
};

/// Count-valued prior: a single value, a uniform integer range, or a
/// normal (truncated to the non-negative integers).
struct CountPrior {
  enum class Shape { Point, Range, Normal } shape = Shape::Point;
  double a = 0.0;  // value, lower bound, or mean
  double b = 0.0;  // upper bound or standard deviation

  static CountPrior point(double v) { return {Shape::Point, v, v}; }
  static CountPrior range(double lo, double hi) { return {Shape::Range, lo, hi}; }
  static CountPrior normal(double mean, double sd) { return {Shape::Normal, mean, sd}; }
  /// Largest value the prior can produce.
  std::int64_t upper() const;
  double mean() const;
};

struct ScenarioConfig {
  int schema_version = kScenarioSchemaVersion;
  std::string name;

  struct Testing {
    CountPrior demands_tested = CountPrior::point(0);
    std::int64_t hazards_observed = 0;
    std::string strategy = "typical_of_normal_use";
  } testing;

  /// Unset fields stay unobserved in the network.
  struct Manufacturer {
    std::optional<std::string> years_in_operation;
    std::optional<std::string> country_safety_record;
    std::optional<std::string> customer_satisfaction;
    std::optional<std::string> design_change;
  } manufacturer;

  struct Usage {
    std::array<double, 3> usage_profile{1.0, 0.0, 0.0};
    CountPrior demands_per_lifetime = CountPrior::point(1);
    std::int64_t years_in_use = 0;
  } usage;

  struct HazardInjury {
    double p_uncontrolled_major = 0.0;
    double p_uncontrolled_minor = 0.0;
    double control_present_prob = 0.0;
    double control_effectiveness = 0.0;
  } hazard_injury;

  struct Population {
    CountPrior n_instances = CountPrior::point(1);
    std::optional<std::int64_t> observed_major_injury_instances;
    std::optional<std::int64_t> observed_minor_injury_instances;
  } population;

  struct Perception {
    bool media_stories = false;
    bool warnings = false;
    bool government_intervention_announced = false;
  } perception;

  std::string utility = "medium";
  Calibration calibration;
  /// Per-node bin overrides from the scenario file.
  std::map<std::string, BinOverride> binning;
};

/// Throws Error(InvalidConfig) naming the offending field.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& c);
ScenarioConfig load_scenario(const std::string& path);
/// Throws Error(InvalidConfig) when an invariant does not hold.
void validate_scenario(const ScenarioConfig& c);

// Template ------------------------------------------------------------------------

/// Node ids of the template.
namespace node {
inline constexpr const char* testing_strategy = "testing_strategy";
inline constexpr const char* demands_tested = "demands_tested";
inline constexpr const char* p_hazard_testing = "p_hazard_testing";
inline constexpr const char* hazards_observed = "hazards_observed";
inline constexpr const char* years_in_operation = "years_in_operation";
inline constexpr const char* country_safety_record = "country_safety_record";
inline constexpr const char* customer_satisfaction = "customer_satisfaction";
inline constexpr const char* design_change = "design_change";
inline constexpr const char* manufacturer_quality = "manufacturer_quality";
inline constexpr const char* p_hazard_operational = "p_hazard_operational";
inline constexpr const char* particular_product_usage = "particular_product_usage";
inline constexpr const char* years_in_use = "years_in_use";
inline constexpr const char* p_hazard_effective = "p_hazard_effective";
inline constexpr const char* number_of_demands = "number_of_demands";
inline constexpr const char* hazard_occurrence = "hazard_occurrence";
inline constexpr const char* control_present = "control_present";
inline constexpr const char* p_major_injury = "p_major_injury";
inline constexpr const char* p_minor_injury = "p_minor_injury";
inline constexpr const char* n_instances = "n_instances";
inline constexpr const char* major_injury_instances = "major_injury_instances";
inline constexpr const char* minor_injury_instances = "minor_injury_instances";
inline constexpr const char* risk_level = "risk_level";
inline constexpr const char* utility = "utility";
inline constexpr const char* risk_tolerability = "risk_tolerability";
inline constexpr const char* government_intervention = "government_intervention";
inline constexpr const char* media_stories = "media_stories";
inline constexpr const char* warnings = "warnings";
inline constexpr const char* government_intervention_announced = "government_intervention_announced";
inline constexpr const char* perception_change = "perception_change";
}  // namespace node

/// A model together with the partitions and evidence it was built for.
struct BuiltModel {
  ModelSpec model;
  BinningConfig binning;
  Evidence evidence;
};

/// Throws Error(InvalidConfig).
ModelSpec build_product_risk_bn(const ScenarioConfig& config);
/// Template plus scenario evidence and partitions for `default_bins`.
BuiltModel build_scenario(const ScenarioConfig& config, int default_bins = 100);

/// Testing fragment: Beta(1,1) prior on the testing hazard rate, binomial
/// test evidence, strategy-dependent operational rate.
BuiltModel testing_fragment(std::int64_t demands, std::int64_t hazards, const std::string& strategy,
                            const Calibration& calibration = {}, int default_bins = 100);
/// Count fragment: instances causing major/minor injuries given priors on
/// the two injury probabilities.
BuiltModel count_fragment(const CountPrior& n_instances, const CpdExpr& p_major, const CpdExpr& p_minor,
                          int default_bins = 100);
/// Perception fragment: noisy-OR over the three causes.
BuiltModel perception_fragment(bool media, bool warnings, bool intervention, const Calibration& calibration = {});

// Building blocks -----------------------------------------------------------------

/// 1 - (1 - p)^n; 0 for n <= 0, 1 for p >= 1.
double hazard_occurrence_prob(double p_per_demand, double n_demands);
double injury_prob(double p_occurrence, double p_uncontrolled_injury, double control_present_prob,
                   double control_effectiveness);

struct InjuryCounts {
  double major = 0.0;
  double minor = 0.0;
};
/// Means of the instance-count nodes, computed on a compiled count fragment.
InjuryCounts expected_injury_counts(const CountPrior& n_instances, const CpdExpr& p_major, const CpdExpr& p_minor,
                                    int default_bins = 100);

/// Expression mapping the weighted injury probability onto [0,1] so that
/// band edge k lands on (k+1)/5.
Expr risk_position(const Expr& p_major, const Expr& p_minor, const Calibration& calibration);
/// Risk-level distribution for independent p_major / p_minor posteriors.
std::vector<double> classify_risk_level(const Posterior& p_major, const Posterior& p_minor,
                                        const Calibration& calibration = {});
struct Tolerability {
  std::vector<double> tolerability;  // very_low .. very_high
  double p_intervene = 0.0;
};
Tolerability tolerability_and_recommendation(const std::vector<double>& risk_level, const std::string& utility,
                                             const Calibration& calibration = {});
/// P(perception changes) for the three causes.
double perception_change(bool media, bool warnings, bool intervention, const Calibration& calibration = {});

// Assessment ------------------------------------------------------------------------

inline constexpr const char* kEngineVersion = "riskbn 1.0.0";

struct Distribution {
  std::vector<std::string> labels;
  std::vector<double> mass;
  std::string mode() const;
  double mass_of(const std::vector<std::string>& states) const;
};

struct AssessmentReport {
  std::string scenario;
  /// hazard_per_demand_testing, hazard_per_demand_operational,
  /// hazard_per_demand_effective, hazard_occurrence, p_major_injury,
  /// p_minor_injury, major_injury_instances, minor_injury_instances.
  std::map<std::string, Moments> moments;
  /// risk_level, risk_tolerability, government_intervention, perception_change.
  std::map<std::string, Distribution> distributions;
  std::string risk_level_mode;
  double p_intervene = 0.0;
  bool intervene = false;

  struct Provenance {
    std::string config_hash;
    std::string engine_version = kEngineVersion;
    std::uint64_t seed = 0;
    int default_bins = 100;
    std::map<std::string, std::size_t> node_bins;
    std::vector<std::string> evidence;
  } provenance;

  /// Optional likelihood-weighting cross-check: node -> (mean, standard error).
  std::map<std::string, std::pair<double, double>> sampled_means;
};

struct AssessOptions {
  int bins = 100;
  std::uint64_t seed = 42;
  /// When > 0, also runs likelihood weighting with this many samples.
  std::int64_t samples = 0;
  /// Extra evidence applied on top of the scenario's own.
  Evidence extra_evidence;
};

/// Report nodes and the moment key each one is reported under.
const std::vector<std::pair<std::string, std::string>>& report_moment_nodes();
const std::vector<std::string>& report_distribution_nodes();

AssessmentReport assess(const ScenarioConfig& config, const AssessOptions& options = {});
/// Same, on an already compiled model with explicit evidence.
AssessmentReport assess_compiled(const ScenarioConfig& config, const CompiledModel& compiled,
                                 const Evidence& evidence, const AssessOptions& options);

nlohmann::json report_to_json(const AssessmentReport& report);

/// RAPEX run on the BN's posterior mean p_major as a one-step scenario.
struct RapexComparison {
  rapex::Assessment rapex;
  std::string bn_risk_level_mode;
  /// Posterior mass of risk level in {very_low, low}.
  double bn_low_mass = 0.0;
  /// Both call the product high risk (RAPEX High/Serious, BN mode high or
  /// very high) or neither does.
  bool agree = false;
};
RapexComparison compare_with_rapex(const AssessmentReport& report, int severity);
nlohmann::json comparison_to_json(const RapexComparison& c);
std::string config_hash(const ScenarioConfig& config);
std::string evidence_to_string(const std::string& node, const Observation& o);

}  // namespace riskbn
