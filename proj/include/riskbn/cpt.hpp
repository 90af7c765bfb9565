#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskbn/bins.hpp"
#include "riskbn/model.hpp"

namespace riskbn {

/// Finite state space of one compiled node.
struct VariableDomain {
  std::string id;
  NodeKind kind;
  std::vector<std::string> labels;   // discrete kinds
  std::optional<IntervalSet> bins;   // continuous and count kinds
  std::vector<double> values;        // numeric value of each state / bin

  std::size_t size() const noexcept { return values.size(); }
  bool binned() const noexcept { return bins.has_value(); }
  bool ranked() const noexcept { return std::holds_alternative<Ranked>(kind); }
};

VariableDomain discrete_domain(const std::string& id, const NodeKind& kind);
VariableDomain binned_domain(const std::string& id, const NodeKind& kind, IntervalSet bins);

/// Conditional table for one child. Columns are indexed by parent state
/// combination (last parent fastest); each column holds child_card entries.
struct Cpt {
  std::vector<std::size_t> parent_cards;
  std::size_t child_card = 0;
  std::vector<double> values;

  std::size_t columns() const noexcept { return child_card ? values.size() / child_card : 0; }
  std::span<const double> column(std::size_t c) const {
    return {values.data() + c * child_card, child_card};
  }
};

enum class ExecPolicy { Serial, Parallel };

struct CptOptions {
  ExecPolicy policy = ExecPolicy::Parallel;
  /// Evaluation budget per column for deterministic CPDs with binned parents:
  /// each binned parent contributes floor(budget^(1/d)) points spread across
  /// its bin (geometrically for log-spaced bins).
  int deterministic_budget = 256;
};

/// Discretizes `expr` for a child with the given parents. Closed-form CDF
/// mass per child bin for Beta/Uniform/TNormal, exact pmf mass for Binomial,
/// point mass per evaluation for Deterministic. Throws
/// Error(UnsupportedCombination) for expressions the child kind cannot
/// carry.
Cpt expression_to_cpt(const CpdExpr& expr, std::span<const VariableDomain* const> parents,
                      std::span<const std::string> parent_ids, const VariableDomain& child,
                      const CptOptions& options = {});

/// Noisy-OR table over Boolean causes (state order false,true for causes and
/// child): P(true | x) = 1 - (1 - leak) * prod_i (1 - activation_i)^{x_i}.
CpdExpr noisy_or(std::vector<std::string> causes, std::vector<double> activations, double leak);

}  // namespace riskbn
