/// riskbn: batch assessments, scenario validation, RAPEX and the HTTP service.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "riskbn/canonical_json.hpp"
#include "riskbn/error.hpp"
#include "riskbn/product.hpp"
#include "riskbn/rapex.hpp"
#include "riskbn/service.hpp"

using namespace riskbn;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kInference = 3;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ImpossibleEvidence:
    case ErrorCode::DegenerateWeights:
    case ErrorCode::UnnormalizedPosterior:
    case ErrorCode::UnsupportedCombination:
    case ErrorCode::DivisionByZero: return kInference;
    default: return kInvalid;
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error(ErrorCode::InvalidConfig, "cannot write " + out);
  f << text;
}

std::string table(const AssessmentReport& r, const std::optional<RapexComparison>& cmp) {
  std::ostringstream o;
  char line[256];
  o << "scenario " << r.scenario << "\n\n";
  std::snprintf(line, sizeof line, "%-32s %12s %12s %12s %12s\n", "quantity", "mean", "p5", "p50", "p95");
  o << line;
  for (const auto& [id, key] : report_moment_nodes()) {
    const auto& m = r.moments.at(key);
    std::snprintf(line, sizeof line, "%-32s %12.4g %12.4g %12.4g %12.4g\n", key.c_str(), m.mean, m.p5, m.p50, m.p95);
    o << line;
  }
  o << "\n";
  for (const auto& id : report_distribution_nodes()) {
    const auto& d = r.distributions.at(id);
    o << id << " (mode " << d.mode() << ")\n";
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      std::snprintf(line, sizeof line, "  %-16s %.4f\n", d.labels[i].c_str(), d.mass[i]);
      o << line;
    }
  }
  std::snprintf(line, sizeof line, "\nrecommendation %s (P(intervene) = %.3f)\n",
                r.intervene ? "intervene" : "no intervention", r.p_intervene);
  o << line;
  if (cmp) {
    std::snprintf(line, sizeof line, "RAPEX at severity %d: probability %.4g (%s) -> %s; BN risk level %s, low mass %.3f; %s\n",
                  cmp->rapex.severity, cmp->rapex.probability, cmp->rapex.band_label.c_str(),
                  rapex::to_string(cmp->rapex.risk), cmp->bn_risk_level_mode.c_str(), cmp->bn_low_mass,
                  cmp->agree ? "agree" : "diverge");
    o << line;
  }
  o << "config hash " << r.provenance.config_hash << ", " << r.provenance.engine_version << ", bins "
    << r.provenance.default_bins << "\n";
  return o.str();
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian-network product risk assessment"};
  app.require_subcommand(1);

  std::string scenario_path, out, format = "json";
  int bins = 100, severity = 3;
  std::uint64_t seed = 42;
  std::int64_t samples = 0;
  bool compare_rapex = false;

  auto* assess_cmd = app.add_subcommand("assess", "Run an assessment and print the report");
  assess_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  assess_cmd->add_option("--bins", bins, "Default bins per continuous node")->check(CLI::Range(2, 100000));
  assess_cmd->add_option("--seed", seed, "Seed recorded in the report and used for sampling");
  assess_cmd->add_option("--samples", samples, "Also run likelihood weighting with this many samples");
  assess_cmd->add_option("--format", format, "json or table")->check(CLI::IsMember({"json", "table"}));
  assess_cmd->add_flag("--compare-rapex", compare_rapex, "Add a RAPEX verdict on the posterior p_major");
  assess_cmd->add_option("--severity", severity, "RAPEX severity level for --compare-rapex")->check(CLI::Range(1, 4));
  assess_cmd->add_option("--out", out, "Write the report here instead of stdout");

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file and the model it builds");
  validate_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  std::string injury_path;
  double factor = 2.0;
  int shift = 1;
  bool sensitivity = false;
  auto* rapex_cmd = app.add_subcommand("rapex", "RAPEX assessment of an injury scenario");
  rapex_cmd->add_option("scenario", injury_path, "Injury scenario JSON file")->required();
  rapex_cmd->add_flag("--sensitivity", sensitivity, "Run the sensitivity analysis");
  rapex_cmd->add_option("--factor", factor, "Sensitivity factor on each step probability");
  rapex_cmd->add_option("--shift", shift, "Severity shift for the sensitivity analysis");
  rapex_cmd->add_option("--out", out, "Write the result here instead of stdout");

  std::string addr;
  long ttl = -1;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the /v1 HTTP API");
  serve_cmd->add_option("--addr", addr, "host:port (env RISKBN_ADDR, default 127.0.0.1:8080)");
  serve_cmd->add_option("--ttl", ttl, "Idle session lifetime in seconds (env RISKBN_SESSION_TTL, default 3600)");
  serve_cmd->add_option("--bins", bins, "Default bins for new sessions")->check(CLI::Range(2, 100000));
  serve_cmd->add_option("--seed", seed, "Seed for new sessions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*assess_cmd) {
      const auto config = load_scenario(scenario_path);
      AssessOptions options;
      options.bins = bins;
      options.seed = seed;
      options.samples = samples;
      const auto report = assess(config, options);
      std::optional<RapexComparison> cmp;
      if (compare_rapex) cmp = compare_with_rapex(report, severity);
      if (format == "table") {
        emit(table(report, cmp), out);
      } else {
        auto j = report_to_json(report);
        if (cmp) j["rapex_comparison"] = comparison_to_json(*cmp);
        emit(canonical_dump(j), out);
      }
      return kOk;
    }
    if (*validate_cmd) {
      const auto config = load_scenario(scenario_path);
      const auto built = build_scenario(config, bins);
      const auto report = validate(built.model);
      if (!report.ok()) {
        std::cerr << report.to_string();
        return kInvalid;
      }
      std::cout << "ok: " << (config.name.empty() ? scenario_path : config.name) << ", " << built.model.size()
                << " nodes, " << built.evidence.size() << " observed\n";
      return kOk;
    }
    if (*rapex_cmd) {
      std::ifstream in(injury_path);
      if (!in) throw Error(ErrorCode::InvalidConfig, injury_path + ": file not found");
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, e.what());
      }
      const auto s = rapex::scenario_from_json(j);
      const auto a = sensitivity ? rapex::assess(s, factor, shift) : rapex::assess(s);
      emit(canonical_dump(rapex::to_json(a)), out);
      return kOk;
    }
    if (*serve_cmd) {
      service::ServiceConfig config;
      const auto where = addr.empty() ? env_or("RISKBN_ADDR", "127.0.0.1:8080") : addr;
      const auto colon = where.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "address must be host:port");
      config.host = where.substr(0, colon);
      config.port = std::stoi(where.substr(colon + 1));
      config.session_ttl = std::chrono::seconds(ttl >= 0 ? ttl : std::stol(env_or("RISKBN_SESSION_TTL", "3600")));
      config.default_bins = bins;
      config.seed = seed;
      service::Service svc(config);
      service::HttpServer http(svc);
      std::cerr << "listening on " << config.host << ":" << config.port << "\n";
      return http.listen(config.host, config.port) ? kOk : kInvalid;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory; try fewer bins\n";
    return kInference;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}
