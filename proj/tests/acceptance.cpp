// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "riskbn/error.hpp"
#include "riskbn/infer.hpp"
#include "riskbn/product.hpp"
#include "riskbn/rapex.hpp"

using namespace riskbn;
using namespace riskbn::cpd;
using nlohmann::json;

namespace {

/// Collects failed sub-checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void rel(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << " = " << got << " (want " << want << " +-" << tol * 100 << "%)";
    expect(std::abs(got - want) <= tol * std::abs(want), s.str());
  }
  void factor(double got, double want, double f, const std::string& what) {
    std::ostringstream s;
    s << what << " = " << got << " (want " << want << " within x" << f << ")";
    expect(got >= want / f && got <= want * f, s.str());
  }
};

int failed = 0;

void run(const char* id, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = c.failures.empty();
  if (!ok) ++failed;
  std::printf("%s %s (%.1fs) %s\n", id, ok ? "PASS" : "FAIL", secs, c.notes.str().c_str());
  for (const auto& f : c.failures) std::printf("    %s\n", f.c_str());
  std::fflush(stdout);
}

std::string scenario_path(const std::string& name) {
  return std::string(RISKBN_SOURCE_DIR) + "/scenarios/" + name + ".json";
}

const char* const kLow[] = {"very_low", "low"};

double low_mass(const Distribution& d) { return d.mass_of({kLow[0], kLow[1]}); }

double mean_of(const AssessmentReport& r, const std::string& key) { return r.moments.at(key).mean; }

/// Nodes queried by A1-A6 on the full template.
const std::vector<std::string> kTemplateQueried{
    node::p_hazard_testing,        node::p_hazard_operational,   node::hazard_occurrence,
    node::p_major_injury,          node::p_minor_injury,         node::major_injury_instances,
    node::minor_injury_instances,  node::risk_level,             node::risk_tolerability,
    node::government_intervention};

/// VE against likelihood weighting. Discrete nodes compare every state mass,
/// binned nodes compare the mean. A state the sampler never visited has a
/// zero empirical SE, so the SE is floored at the estimator's resolution 1/ESS.
void compare_ve_lw(Check& c, const std::string& label, const CompiledModel& m, const Evidence& ev,
                   const std::vector<std::string>& ids) {
  const auto exact = posterior(m, ev, ids);
  const auto lw = sample_posterior(m, ev, ids, 100000, 42);
  double worst = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double floor = 1.0 / lw[i].ess;
    if (exact[i].moments) {
      const double se = std::max(lw[i].mean_std_error, floor * std::abs(exact[i].mean()));
      const double z = std::abs(lw[i].mean() - exact[i].mean()) / se;
      worst = std::max(worst, z);
      std::ostringstream s;
      s << label << " " << ids[i] << " mean: VE " << exact[i].mean() << " LW " << lw[i].mean() << " (" << z << " SE)";
      c.expect(z <= 3.0, s.str());
    } else {
      for (std::size_t k = 0; k < exact[i].mass.size(); ++k) {
        const double se = std::max(lw[i].std_error[k], floor);
        const double z = std::abs(lw[i].mass[k] - exact[i].mass[k]) / se;
        worst = std::max(worst, z);
        std::ostringstream s;
        s << label << " " << ids[i] << "[" << exact[i].labels[k] << "]: VE " << exact[i].mass[k] << " LW "
          << lw[i].mass[k] << " (" << z << " SE)";
        c.expect(z <= 3.0, s.str());
      }
    }
  }
  c.notes << label << " worst " << worst << " SE; ";
}

struct Compiled {
  ScenarioConfig config;
  BuiltModel built;
  std::unique_ptr<CompiledModel> model;
};

Compiled compile_scenario(const std::string& name, int bins) {
  Compiled c;
  c.config = load_scenario(scenario_path(name));
  c.built = build_scenario(c.config, bins);
  c.model = std::make_unique<CompiledModel>(compile(c.built.model, c.built.binning));
  return c;
}

}  // namespace

int main() {
  const std::vector<std::string> scenarios{"kettle_s1", "kettle_s2", "teddy_s1", "teddy_s2"};
  std::map<std::string, AssessmentReport> reports;
  for (const auto& s : scenarios) reports[s] = assess(load_scenario(scenario_path(s)), {});

  run("A1", [](Check& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = testing_fragment(2000, 1, "typical_of_normal_use");
    const auto m = compile(f.model, f.binning);
    const double mean = posterior(m, f.evidence, node::p_hazard_operational).mean();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.rel(mean, 2.0 / 2002.0, 0.10, "operational mean");
    c.rel(mean, 1e-3, 0.10, "operational mean vs 1e-3");
    c.expect(secs < 1.0, "runtime " + std::to_string(secs) + " s");
    c.notes << "mean " << mean << ", " << secs << " s";
  });

  run("A2", [](Check& c) {
    const auto f = testing_fragment(2000, 1, "poor");
    const auto m = compile(f.model, f.binning);
    const double mean = posterior(m, f.evidence, node::p_hazard_operational).mean();
    c.rel(mean, 0.02, 0.20, "operational mean");
    c.notes << "mean " << mean;
  });

  run("A3", [](Check& c) {
    const auto counts =
        expected_injury_counts(CountPrior::point(519000), beta(lit(18), lit(982)), beta(lit(36), lit(964)));
    c.rel(counts.major, 9335, 0.02, "major count");
    c.rel(counts.minor, 18668, 0.02, "minor count");
    c.notes << "counts " << counts.major << " / " << counts.minor;
  });

  run("A4", [&](Check& c) {
    const auto& r = reports.at("kettle_s1");
    c.rel(mean_of(r, "hazard_occurrence"), 0.10, 0.15, "hazard occurrence");
    c.rel(mean_of(r, "p_major_injury"), 0.005, 0.20, "p_major");
    c.rel(mean_of(r, "p_minor_injury"), 0.01, 0.20, "p_minor");
    c.rel(mean_of(r, "major_injury_instances"), 375, 0.20, "major count");
    c.rel(mean_of(r, "minor_injury_instances"), 750, 0.20, "minor count");
    c.expect(r.risk_level_mode == "very_high", "risk level mode " + r.risk_level_mode);
    c.expect(r.intervene, "recommendation is not intervene");
    c.notes << "occurrence " << mean_of(r, "hazard_occurrence") << ", p_major " << mean_of(r, "p_major_injury")
            << ", counts " << mean_of(r, "major_injury_instances") << " / " << mean_of(r, "minor_injury_instances")
            << ", mode " << r.risk_level_mode << ", P(intervene) " << r.p_intervene;
  });

  run("A5", [&](Check& c) {
    const auto& r = reports.at("kettle_s2");
    c.factor(mean_of(r, "p_major_injury"), 4e-5, 3, "p_major");
    c.factor(mean_of(r, "hazard_per_demand_testing"), 9e-5, 3, "hazard per demand");
    c.rel(mean_of(r, "minor_injury_instances"), 6, 0.50, "minor count");
    c.expect(r.risk_level_mode == "very_low", "risk level mode " + r.risk_level_mode);
    c.expect(!r.intervene, "recommendation is intervene");
    c.notes << "p_major " << mean_of(r, "p_major_injury") << ", hazard per demand "
            << mean_of(r, "hazard_per_demand_testing") << ", minor count " << mean_of(r, "minor_injury_instances")
            << ", mode " << r.risk_level_mode << ", P(intervene) " << r.p_intervene;
  });

  run("A6", [&](Check& c) {
    const auto& s1 = reports.at("teddy_s1");
    const auto& s2 = reports.at("teddy_s2");
    c.expect(s1.risk_level_mode == "very_high", "S1 risk level mode " + s1.risk_level_mode);
    c.factor(mean_of(s1, "major_injury_instances"), 1387, 2, "S1 major count");
    c.factor(mean_of(s1, "minor_injury_instances"), 2773, 2, "S1 minor count");
    const double tol_low = low_mass(s1.distributions.at(node::risk_tolerability));
    c.expect(tol_low > 0.5, "S1 tolerability low mass " + std::to_string(tol_low));
    c.expect(s1.intervene, "S1 recommendation is not intervene");
    const double risk_low = low_mass(s2.distributions.at(node::risk_level));
    c.expect(risk_low > 0.5, "S2 risk level low mass " + std::to_string(risk_low));
    c.factor(mean_of(s2, "major_injury_instances"), 35, 3, "S2 major count");
    c.factor(mean_of(s2, "minor_injury_instances"), 68, 3, "S2 minor count");
    c.expect(!s2.intervene, "S2 recommendation is intervene");
    const double ratio = mean_of(s1, "p_major_injury") / mean_of(s2, "p_major_injury");
    c.expect(ratio > 10, "p_major ratio " + std::to_string(ratio));
    c.notes << "S1 counts " << mean_of(s1, "major_injury_instances") << " / " << mean_of(s1, "minor_injury_instances")
            << ", S2 counts " << mean_of(s2, "major_injury_instances") << " / "
            << mean_of(s2, "minor_injury_instances") << ", p_major ratio " << ratio;
  });

  run("A7", [](Check& c) {
    const auto axe = rapex::scenario_from_json(
        json::parse(std::ifstream(std::string(RISKBN_SOURCE_DIR) + "/scenarios/axe_rapex.json")));
    const double p = rapex::scenario_probability(axe.steps);
    c.expect(p == 1e-4, "axe product " + std::to_string(p));
    const auto& m = rapex::default_matrix();
    c.expect(rapex::risk_from_matrix(0.07, 3, m) == rapex::RiskClass::Serious, "(0.07, 3) not Serious");
    c.expect(rapex::risk_from_matrix(0.001, 3, m) == rapex::RiskClass::Serious, "(0.001, 3) not Serious");
    // monotone in probability along each row and in severity down each column
    for (int sev = 1; sev <= 4; ++sev)
      for (int b = 0; b + 1 < rapex::kBands; ++b)
        c.expect(m.cells[sev - 1][b] >= m.cells[sev - 1][b + 1],
                 "row " + std::to_string(sev) + " rises at band " + std::to_string(b + 1));
    for (int b = 0; b < rapex::kBands; ++b)
      for (int sev = 1; sev < 4; ++sev)
        c.expect(m.cells[sev][b] >= m.cells[sev - 1][b], "column " + std::to_string(b) + " falls");
    const auto a = rapex::sensitivity_analysis(axe, 10.0, 1);
    const auto b = rapex::sensitivity_analysis(axe, 10.0, 1);
    const std::size_t expected = (std::size_t{1} << axe.steps.size()) * 3;
    c.expect(a.variants.size() == expected, "variant count " + std::to_string(a.variants.size()));
    c.expect(rapex::to_json(rapex::assess(axe, 10.0, 1)) == rapex::to_json(rapex::assess(axe, 10.0, 1)),
             "sensitivity output differs between runs");
    c.expect(a.variants.size() == b.variants.size(), "variant count differs between runs");
    for (std::size_t i = 0; i < std::min(a.variants.size(), b.variants.size()); ++i)
      c.expect(a.variants[i].directions == b.variants[i].directions && a.variants[i].risk == b.variants[i].risk,
               "variant " + std::to_string(i) + " differs between runs");
    c.notes << "product " << p << ", " << a.variants.size() << " variants";
  });

  run("A8", [](Check& c) {
    const std::string cmd = std::string(RISKBN_CLI) + " assess " + scenario_path("teddy_s2") + " --compare-rapex";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    c.expect(pipe != nullptr, "cannot run " + cmd);
    if (!pipe) return;
    std::string out;
    char buf[4096];
    while (auto n = std::fread(buf, 1, sizeof buf, pipe.get())) out.append(buf, n);
    const auto j = json::parse(out);
    const auto& cmp = j.at("rapex_comparison");
    const std::string risk = cmp.at("rapex").at("risk");
    const double low = cmp.at("bn_low_mass");
    c.expect(risk == "Serious", "RAPEX verdict " + risk);
    c.expect(low > 0.5, "BN low mass " + std::to_string(low));
    c.expect(!cmp.at("agree").get<bool>(), "verdicts reported as agreeing");
    c.notes << "RAPEX " << risk << ", BN low/very_low mass " << low;
  });

  run("A9", [&](Check& c) {
    // VE vs likelihood weighting on every node A1-A6 query
    {
      const auto f = testing_fragment(2000, 1, "typical_of_normal_use");
      compare_ve_lw(c, "testing/typical", compile(f.model, f.binning), f.evidence, {node::p_hazard_operational});
      const auto g = testing_fragment(2000, 1, "poor");
      compare_ve_lw(c, "testing/poor", compile(g.model, g.binning), g.evidence, {node::p_hazard_operational});
      const auto h = count_fragment(CountPrior::point(519000), beta(lit(18), lit(982)), beta(lit(36), lit(964)));
      compare_ve_lw(c, "counts", compile(h.model, h.binning), h.evidence,
                    {node::major_injury_instances, node::minor_injury_instances});
    }
    for (const auto& s : scenarios) {
      const auto sc = compile_scenario(s, 100);
      try {
        compare_ve_lw(c, s, *sc.model, sc.built.evidence, kTemplateQueried);
      } catch (const Error& e) {
        c.expect(false, s + ": " + e.what());
      }
    }

    // bin doubling
    double worst = 0.0;
    std::string worst_at;
    for (const auto& s : scenarios) {
      const auto fine = assess(load_scenario(scenario_path(s)), {.bins = 200});
      for (const auto& [key, m] : reports.at(s).moments) {
        const double change = std::abs(fine.moments.at(key).mean - m.mean) / std::abs(m.mean);
        if (change > worst) worst = change, worst_at = s + " " + key;
        c.expect(change < 0.02, s + " " + key + " moves " + std::to_string(change * 100) + "%");
      }
    }
    c.notes << "bin doubling worst " << worst * 100 << "% (" << worst_at << "); ";

    // Beta-Binomial conjugacy: posterior mean (1 + s) / (2 + n)
    for (std::int64_t n : {10, 100, 2000}) {
      ModelSpec spec;
      spec.add_node({"p", Continuous{0, 1}, beta(lit(1), lit(1))});
      spec.add_node({"k", Count{n}, binomial(lit(static_cast<double>(n)), ref("p"))});
      spec.add_edge("p", "k");
      const auto m = compile(spec);
      for (int s : {0, 1, 5}) {
        const double exact = (1.0 + s) / (2.0 + static_cast<double>(n));
        c.rel(posterior(m, {{"k", Point{static_cast<double>(s)}}}, "p").mean(), exact, 0.02,
              "conjugate n=" + std::to_string(n) + " s=" + std::to_string(s));
      }
    }
  });

  return failed == 0 ? 0 : 1;
}
