#include "riskbn/rapex.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "riskbn/error.hpp"

namespace riskbn::rapex {

using nlohmann::json;

namespace {

constexpr double kBoundaryTol = 1e-9;

RiskMatrix build_default() {
  RiskMatrix m;
  m.lower = {0.5, 0.1, 0.01, 0.001, 1e-4, 1e-5, 1e-6, 0.0};
  m.labels = {"> 50%",      "> 1/10",      "> 1/100",       "> 1/1000",
              "> 1/10 000", "> 1/100 000", "> 1/1 000 000", "< 1/1 000 000"};
  using enum RiskClass;
  m.cells[0] = {High, Medium, Medium, Low, Low, Low, Low, Low};
  m.cells[1] = {Serious, Serious, Serious, High, Medium, Low, Low, Low};
  m.cells[2] = {Serious, Serious, Serious, Serious, High, Medium, Low, Low};
  m.cells[3] = {Serious, Serious, Serious, Serious, Serious, High, Medium, Low};
  return m;
}

void check_probability(double p, const std::string& what) {
  if (!std::isfinite(p) || p <= 0.0 || p > 1.0)
    throw Error(ErrorCode::BadProbability, what + " must lie in (0,1], got " + std::to_string(p));
}

double parse_probability(const json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw Error(ErrorCode::Parse, what + " must be a number or \"a/b\"");
  const auto s = v.get<std::string>();
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return std::stod(s);
    const double num = std::stod(s.substr(0, slash));
    const double den = std::stod(s.substr(slash + 1));
    if (den == 0.0) throw Error(ErrorCode::BadProbability, what + " has a zero denominator");
    return num / den;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::Parse, what + ": cannot read \"" + s + "\"");
  }
}

}  // namespace

const char* to_string(RiskClass c) {
  switch (c) {
    case RiskClass::Low: return "Low";
    case RiskClass::Medium: return "Medium";
    case RiskClass::High: return "High";
    case RiskClass::Serious: return "Serious";
  }
  return "?";
}

std::optional<RiskClass> class_from_string(const std::string& s) {
  for (auto c : {RiskClass::Low, RiskClass::Medium, RiskClass::High, RiskClass::Serious})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

const RiskMatrix& default_matrix() {
  static const RiskMatrix m = build_default();
  return m;
}

RiskMatrix matrix_from_json(const json& j) {
  RiskMatrix m;
  try {
    const auto& bands = j.at("bands");
    if (bands.size() != kBands) throw Error(ErrorCode::Parse, "matrix needs 8 bands");
    for (std::size_t b = 0; b < kBands; ++b) {
      m.lower[b] = bands[b].at("lower").get<double>();
      m.labels[b] = bands[b].at("label").get<std::string>();
    }
    for (int s = 1; s <= 4; ++s) {
      const auto& row = j.at("severity").at(std::to_string(s));
      if (row.size() != kBands) throw Error(ErrorCode::Parse, "matrix row needs 8 cells");
      for (std::size_t b = 0; b < kBands; ++b) {
        const auto c = class_from_string(row[b].get<std::string>());
        if (!c) throw Error(ErrorCode::Parse, "unknown risk class " + row[b].dump());
        m.cells[s - 1][b] = *c;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  return m;
}

RiskMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + path);
  try {
    return matrix_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

double scenario_probability(const std::vector<Step>& steps) {
  if (steps.empty()) throw Error(ErrorCode::EmptyScenario, "injury scenario has no steps");
  double p = 1.0;
  for (const auto& s : steps) {
    check_probability(s.probability, "step '" + s.label + "'");
    p *= s.probability;
  }
  return p;
}

std::size_t probability_band(double p, const RiskMatrix& m) {
  if (!std::isfinite(p) || p <= 0.0 || p > 1.0)
    throw Error(ErrorCode::OutOfRange, "probability " + std::to_string(p) + " is outside (0,1]");
  for (std::size_t b = 0; b + 1 < kBands; ++b)
    if (p >= m.lower[b] * (1.0 - kBoundaryTol)) return b;
  return kBands - 1;
}

RiskClass risk_from_matrix(double p, int severity, const RiskMatrix& m) {
  if (severity < 1 || severity > 4)
    throw Error(ErrorCode::OutOfRange, "severity " + std::to_string(severity) + " is outside 1..4");
  return m.cells[severity - 1][probability_band(p, m)];
}

StabilityReport sensitivity_analysis(const InjuryScenario& s, double factor, int severity_shift) {
  if (!std::isfinite(factor) || factor <= 0.0)
    throw Error(ErrorCode::OutOfRange, "sensitivity factor must be positive");
  severity_shift = std::abs(severity_shift);
  const double base = scenario_probability(s.steps);
  StabilityReport r;
  r.factor = factor;
  r.severity_shift = severity_shift;
  r.baseline = risk_from_matrix(base, s.severity);

  const std::size_t n = s.steps.size();
  if (n >= 20) throw Error(ErrorCode::OutOfRange, "too many steps for a sensitivity sweep");
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<int> dirs(n);
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      dirs[i] = (mask >> (n - 1 - i)) & 1 ? -1 : 1;
      const double q = dirs[i] > 0 ? s.steps[i].probability * factor : s.steps[i].probability / factor;
      p *= std::min(1.0, q);
    }
    for (int shift : {-severity_shift, 0, severity_shift}) {
      Variant v;
      v.directions = dirs;
      v.severity = std::clamp(s.severity + shift, 1, 4);
      v.probability = p;
      v.risk = risk_from_matrix(p, v.severity);
      r.classes.insert(v.risk);
      r.variants.push_back(std::move(v));
    }
  }
  r.stable = r.classes.size() == 1;
  return r;
}

Assessment assess(const InjuryScenario& s) {
  Assessment a;
  a.probability = scenario_probability(s.steps);
  a.severity = s.severity;
  a.risk = risk_from_matrix(a.probability, s.severity);
  a.band = probability_band(a.probability);
  a.band_label = default_matrix().labels[a.band];
  return a;
}

Assessment assess(const InjuryScenario& s, double factor, int severity_shift) {
  auto a = assess(s);
  a.sensitivity = sensitivity_analysis(s, factor, severity_shift);
  return a;
}

InjuryScenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "injury scenario must be an object");
  InjuryScenario s;
  if (j.contains("description")) s.description = j["description"].get<std::string>();
  if (!j.contains("severity") || !j["severity"].is_number_integer())
    throw Error(ErrorCode::OutOfRange, "severity must be an integer 1..4");
  s.severity = j["severity"].get<int>();
  if (s.severity < 1 || s.severity > 4)
    throw Error(ErrorCode::OutOfRange, "severity " + std::to_string(s.severity) + " is outside 1..4");
  if (!j.contains("steps") || !j["steps"].is_array()) throw Error(ErrorCode::EmptyScenario, "steps missing");
  std::size_t i = 0;
  for (const auto& st : j["steps"]) {
    Step step;
    const std::string what = "step " + std::to_string(i++);
    if (st.is_object()) {
      step.label = st.value("label", what);
      if (!st.contains("probability")) throw Error(ErrorCode::Parse, what + " has no probability");
      step.probability = parse_probability(st["probability"], what);
    } else {
      step.label = what;
      step.probability = parse_probability(st, what);
    }
    check_probability(step.probability, what);
    s.steps.push_back(std::move(step));
  }
  if (s.steps.empty()) throw Error(ErrorCode::EmptyScenario, "injury scenario has no steps");
  return s;
}

json to_json(const Assessment& a) {
  json j{{"probability", a.probability},
         {"band", a.band},
         {"band_label", a.band_label},
         {"severity", a.severity},
         {"risk", to_string(a.risk)}};
  if (a.sensitivity) {
    const auto& r = *a.sensitivity;
    json classes = json::array();
    for (auto c : r.classes) classes.push_back(to_string(c));
    json variants = json::array();
    for (const auto& v : r.variants)
      variants.push_back(
          {{"directions", v.directions}, {"severity", v.severity}, {"probability", v.probability}, {"risk", to_string(v.risk)}});
    j["sensitivity"] = {{"factor", r.factor},
                        {"severity_shift", r.severity_shift},
                        {"classes", classes},
                        {"stable", r.stable},
                        {"variants", variants}};
  }
  return j;
}

}  // namespace riskbn::rapex
