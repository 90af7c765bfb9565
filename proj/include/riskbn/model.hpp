#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskbn/expr.hpp"

namespace riskbn {

// Node kinds -----------------------------------------------------------------

struct Labelled {
  std::vector<std::string> states;
};
struct Boolean {};
/// Ordered states mapped onto equal sub-intervals of [0,1].
struct Ranked {
  std::vector<std::string> states;
};
struct Continuous {
  double lo = 0.0;
  double hi = 1.0;
};
/// Integer-valued node on [0, n_max].
struct Count {
  std::int64_t n_max = 1;
};

using NodeKind = std::variant<Labelled, Boolean, Ranked, Continuous, Count>;

bool is_discrete(const NodeKind& kind);
/// State labels of a discrete kind; empty for continuous/count.
std::vector<std::string> state_names(const NodeKind& kind);
const char* kind_name(const NodeKind& kind);

/// Midpoint of ranked state k of K on [0,1].
constexpr double ranked_midpoint(std::size_t k, std::size_t K) {
  return (static_cast<double>(k) + 0.5) / static_cast<double>(K);
}

// CPD expressions --------------------------------------------------------------

struct CpdExpr;

/// Rows ordered over parent state combinations with the last parent varying
/// fastest; each row is a distribution over the child's states.
struct TableCpd {
  std::vector<std::string> parents;
  std::vector<std::vector<double>> rows;
};
struct BetaCpd {
  Expr alpha, beta;
};
struct BinomialCpd {
  Expr n, p;
};
struct UniformCpd {
  Expr a, b;
};
/// Normal truncated to [lo, hi]. For a Ranked child [lo, hi] is normally [0,1].
struct TNormalCpd {
  Expr mean, variance;
  double lo = 0.0;
  double hi = 1.0;
};
struct DeterministicCpd {
  Expr value;
};
struct PartitionedCpd {
  std::string parent;
  std::vector<CpdExpr> cases;  // one per parent state
};
struct MixtureCpd {
  std::vector<double> weights;
  std::vector<CpdExpr> components;
};

struct CpdExpr {
  std::variant<TableCpd, BetaCpd, BinomialCpd, UniformCpd, TNormalCpd, DeterministicCpd,
               PartitionedCpd, MixtureCpd>
      body;

  /// Every parent id the expression reads, including partition selectors.
  std::set<std::string> referenced_parents() const;
};

const char* cpd_name(const CpdExpr& cpd);

// Model -------------------------------------------------------------------------

struct NodeSpec {
  std::string id;
  NodeKind kind;
  CpdExpr cpd;
};

/// Declarative DAG plus per-node CPD expressions. A plain value: copy it to
/// branch, mutate the copy.
class ModelSpec {
 public:
  /// Throws Error(DuplicateId).
  ModelSpec& add_node(NodeSpec spec);
  /// Throws Error(UnknownNode) or Error(CycleDetected); the model is left
  /// unchanged on error.
  ModelSpec& add_edge(const std::string& parent, const std::string& child);
  /// Replaces the CPD of an existing node.
  ModelSpec& set_cpd(const std::string& id, CpdExpr cpd);

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const NodeSpec& node(const std::string& id) const;
  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
  const std::vector<std::pair<std::string, std::string>>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Parents in edge insertion order.
  std::vector<std::string> parents(const std::string& id) const;
  std::vector<std::string> children(const std::string& id) const;
  /// Kahn order with lexicographic tie-breaking.
  std::vector<std::string> topological_order() const;

 private:
  bool reaches(const std::string& from, const std::string& to) const;

  std::vector<NodeSpec> nodes_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, std::string>> edges_;
};

struct Finding {
  std::string node;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const noexcept { return findings.empty(); }
  std::string to_string() const;
};

ValidationReport validate(const ModelSpec& model);

// Convenience constructors used by model builders and tests.
namespace cpd {
CpdExpr table(std::vector<std::string> parents, std::vector<std::vector<double>> rows);
CpdExpr prior(std::vector<double> probabilities);
CpdExpr beta(Expr alpha, Expr beta);
CpdExpr binomial(Expr n, Expr p);
CpdExpr uniform(Expr a, Expr b);
CpdExpr tnormal(Expr mean, Expr variance, double lo = 0.0, double hi = 1.0);
CpdExpr deterministic(Expr value);
CpdExpr partitioned(std::string parent, std::vector<CpdExpr> cases);
CpdExpr mixture(std::vector<double> weights, std::vector<CpdExpr> components);
}  // namespace cpd

}  // namespace riskbn
