#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace riskbn::rapex {

enum class RiskClass { Low = 0, Medium = 1, High = 2, Serious = 3 };

const char* to_string(RiskClass c);
std::optional<RiskClass> class_from_string(const std::string& s);

inline constexpr std::size_t kBands = 8;

/// Probability bands (lower bounds, highest first) and the class of every
/// band at each severity level 1..4.
struct RiskMatrix {
  std::array<double, kBands> lower{};
  std::array<std::string, kBands> labels{};
  std::array<std::array<RiskClass, kBands>, 4> cells{};
};

/// The encoded matrix shipped with the library.
const RiskMatrix& default_matrix();
/// Reads a matrix file in the format of data/rapex_matrix.json.
RiskMatrix load_matrix(const std::string& path);
RiskMatrix matrix_from_json(const nlohmann::json& j);

struct Step {
  std::string label;
  double probability = 1.0;
};

struct InjuryScenario {
  std::string description;
  std::vector<Step> steps;
  int severity = 1;
};

/// Product of step probabilities. Throws Error(EmptyScenario) or
/// Error(BadProbability).
double scenario_probability(const std::vector<Step>& steps);

/// Band index, 0 = highest. A probability on a band boundary belongs to the
/// higher band (relative tolerance 1e-9). Throws Error(OutOfRange).
std::size_t probability_band(double p, const RiskMatrix& m = default_matrix());
/// Throws Error(OutOfRange) for p outside (0,1] or severity outside 1..4.
RiskClass risk_from_matrix(double p, int severity, const RiskMatrix& m = default_matrix());

struct Variant {
  std::vector<int> directions;  // +1 multiplied by the factor, -1 divided
  int severity = 1;
  double probability = 0.0;
  RiskClass risk = RiskClass::Low;
};

struct StabilityReport {
  double factor = 1.0;
  int severity_shift = 0;
  RiskClass baseline = RiskClass::Low;
  std::vector<Variant> variants;
  std::set<RiskClass> classes;
  bool stable = true;
};

/// Re-evaluates the scenario with every step multiplied or divided by
/// `factor` (clamped to (0,1]) and the severity shifted by -k, 0, +k
/// (clamped to 1..4): 2^steps x 3 variants in a fixed order.
StabilityReport sensitivity_analysis(const InjuryScenario& s, double factor, int severity_shift);

struct Assessment {
  double probability = 0.0;
  std::size_t band = 0;
  std::string band_label;
  RiskClass risk = RiskClass::Low;
  int severity = 1;
  std::optional<StabilityReport> sensitivity;
};

Assessment assess(const InjuryScenario& s);
Assessment assess(const InjuryScenario& s, double factor, int severity_shift);

/// Steps accept numbers or "a/b" strings. Throws Error(Parse),
/// Error(BadProbability), Error(OutOfRange) or Error(EmptyScenario).
InjuryScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Assessment& a);

}  // namespace riskbn::rapex
