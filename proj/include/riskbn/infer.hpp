#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "riskbn/bins.hpp"
#include "riskbn/cpt.hpp"
#include "riskbn/model.hpp"

namespace riskbn {

struct BinOverride {
  int bins = 0;
  std::optional<BinScheme> scheme;
};

/// How continuous and count nodes are partitioned. Continuous nodes on [0,1]
/// get log-spaced bins, other continuous nodes equal-width bins, count nodes
/// singleton-then-geometric integer bins (at most 2 * default_bins).
struct BinningConfig {
  int default_bins = 100;
  double log_floor = 1e-6;
  std::map<std::string, BinOverride> overrides;
  /// Fixed partitions, used as given (e.g. range bins around a uniform prior).
  std::map<std::string, IntervalSet> explicit_bins;
  CptOptions cpt;
};

/// Fully discrete network: one CPT per node over the node and its parents.
/// Immutable after compile; safe to query from many threads.
class CompiledModel {
 public:
  std::size_t size() const noexcept { return domains_.size(); }
  /// Throws Error(UnknownNode).
  std::size_t index(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const VariableDomain& domain(std::size_t v) const { return domains_[v]; }
  const VariableDomain& domain(const std::string& id) const { return domains_[index(id)]; }
  const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }
  const std::vector<std::size_t>& children(std::size_t v) const { return children_[v]; }
  const Cpt& cpt(std::size_t v) const { return cpts_[v]; }
  /// Topological order (indices).
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  const ModelSpec& spec() const noexcept { return spec_; }
  const BinningConfig& binning() const noexcept { return binning_; }

 private:
  friend CompiledModel compile(const ModelSpec&, const BinningConfig&);
  ModelSpec spec_;
  BinningConfig binning_;
  std::vector<VariableDomain> domains_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<Cpt> cpts_;
  std::vector<std::size_t> order_;
  std::map<std::string, std::size_t> index_;
};

/// Throws Error(ValidationFailed) with the validation report as message.
CompiledModel compile(const ModelSpec& model, const BinningConfig& binning = {});

/// Bins chosen for a continuous or count node under `binning`.
IntervalSet default_bins_for(const std::string& id, const NodeKind& kind, const BinningConfig& binning);

// Evidence ----------------------------------------------------------------------

struct DiscreteState {
  std::string state;
};
/// Clamps to the bin containing the value.
struct Point {
  double value;
};
/// Indicator over every bin overlapping [lo, hi].
struct Interval {
  double lo, hi;
};
using Observation = std::variant<DiscreteState, Point, Interval>;
using Evidence = std::map<std::string, Observation>;

/// Per-state mask for one finding. Throws Error(UnknownNode) or
/// Error(InvalidEvidence).
std::vector<bool> evidence_mask(const CompiledModel& m, const std::string& node, const Observation& finding);
void check_evidence(const CompiledModel& m, const Evidence& evidence);

// Queries ------------------------------------------------------------------------

struct Posterior {
  std::string node;
  std::vector<std::string> labels;  // discrete nodes
  std::vector<double> values;       // numeric value of each state / bin
  std::vector<double> mass;
  std::optional<Moments> moments;   // continuous and count nodes
  /// Sampling oracle only: per-state standard error, standard error of the
  /// mean, effective sample size.
  std::vector<double> std_error;
  double mean_std_error = 0.0;
  double ess = 0.0;

  double mean() const;
  std::size_t mode() const;
  double mass_of(const std::vector<std::string>& states) const;
};

struct VeOptions {
  ExecPolicy policy = ExecPolicy::Parallel;  // across queries only
  /// Test hook: fixed elimination order (node ids); must name every
  /// variable that gets eliminated.
  std::optional<std::vector<std::string>> order;
};

/// Exact marginals by variable elimination (min-fill, lexicographic ties).
/// Throws Error(ImpossibleEvidence) when P(evidence) < 1e-300.
std::vector<Posterior> posterior(const CompiledModel& m, const Evidence& evidence,
                                 const std::vector<std::string>& query, const VeOptions& options = {});
Posterior posterior(const CompiledModel& m, const Evidence& evidence, const std::string& node,
                    const VeOptions& options = {});

/// log P(evidence).
double log_evidence_probability(const CompiledModel& m, const Evidence& evidence);

/// Likelihood-weighting estimates with standard errors. Deterministic for a
/// given seed. Throws Error(DegenerateWeights) when the effective sample
/// size falls below 10.
std::vector<Posterior> sample_posterior(const CompiledModel& m, const Evidence& evidence,
                                        const std::vector<std::string>& query, std::int64_t n_samples,
                                        std::uint64_t seed);

/// Nodes whose marginal can change when evidence on `source` changes, given
/// the other observed nodes (d-connection, Bayes ball). Sorted ids.
std::vector<std::string> dependent_nodes(const ModelSpec& model, const std::string& source,
                                         const std::vector<std::string>& observed);

}  // namespace riskbn
