#include "riskbn/model.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "riskbn/error.hpp"

namespace riskbn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::BadSupport: return "BadSupport";
    case ErrorCode::BadCount: return "BadCount";
    case ErrorCode::UnsupportedCombination: return "UnsupportedCombination";
    case ErrorCode::UnnormalizedPosterior: return "UnnormalizedPosterior";
    case ErrorCode::ImpossibleEvidence: return "ImpossibleEvidence";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::InvalidEvidence: return "InvalidEvidence";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::EmptyScenario: return "EmptyScenario";
    case ErrorCode::BadProbability: return "BadProbability";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Parse: return "Parse";
  }
  return "Error";
}

bool is_discrete(const NodeKind& kind) {
  return std::holds_alternative<Labelled>(kind) || std::holds_alternative<Boolean>(kind) ||
         std::holds_alternative<Ranked>(kind);
}

std::vector<std::string> state_names(const NodeKind& kind) {
  if (const auto* l = std::get_if<Labelled>(&kind)) return l->states;
  if (const auto* r = std::get_if<Ranked>(&kind)) return r->states;
  if (std::holds_alternative<Boolean>(kind)) return {"false", "true"};
  return {};
}

const char* kind_name(const NodeKind& kind) {
  static constexpr const char* names[] = {"labelled", "boolean", "ranked", "continuous", "count"};
  return names[kind.index()];
}

const char* cpd_name(const CpdExpr& cpd) {
  static constexpr const char* names[] = {"table",         "beta",        "binomial",
                                          "uniform",       "tnormal",     "deterministic",
                                          "partitioned",   "mixture"};
  return names[cpd.body.index()];
}

namespace {

void collect(const CpdExpr& c, std::set<std::string>& out) {
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, TableCpd>) {
          out.insert(b.parents.begin(), b.parents.end());
        } else if constexpr (std::is_same_v<T, BetaCpd>) {
          b.alpha.collect_parents(out);
          b.beta.collect_parents(out);
        } else if constexpr (std::is_same_v<T, BinomialCpd>) {
          b.n.collect_parents(out);
          b.p.collect_parents(out);
        } else if constexpr (std::is_same_v<T, UniformCpd>) {
          b.a.collect_parents(out);
          b.b.collect_parents(out);
        } else if constexpr (std::is_same_v<T, TNormalCpd>) {
          b.mean.collect_parents(out);
          b.variance.collect_parents(out);
        } else if constexpr (std::is_same_v<T, DeterministicCpd>) {
          b.value.collect_parents(out);
        } else if constexpr (std::is_same_v<T, PartitionedCpd>) {
          out.insert(b.parent);
          for (const auto& c2 : b.cases) collect(c2, out);
        } else if constexpr (std::is_same_v<T, MixtureCpd>) {
          for (const auto& c2 : b.components) collect(c2, out);
        }
      },
      c.body);
}

}  // namespace

std::set<std::string> CpdExpr::referenced_parents() const {
  std::set<std::string> out;
  collect(*this, out);
  return out;
}

// ModelSpec -----------------------------------------------------------------------

ModelSpec& ModelSpec::add_node(NodeSpec spec) {
  if (contains(spec.id)) throw Error(ErrorCode::DuplicateId, "node '" + spec.id + "' already exists");
  index_.emplace(spec.id, nodes_.size());
  nodes_.push_back(std::move(spec));
  return *this;
}

ModelSpec& ModelSpec::add_edge(const std::string& parent, const std::string& child) {
  if (!contains(parent)) throw Error(ErrorCode::UnknownNode, "edge endpoint '" + parent + "' does not exist");
  if (!contains(child)) throw Error(ErrorCode::UnknownNode, "edge endpoint '" + child + "' does not exist");
  if (parent == child || reaches(child, parent)) {
    throw Error(ErrorCode::CycleDetected, "edge " + parent + " -> " + child + " closes a cycle");
  }
  auto e = std::make_pair(parent, child);
  if (std::find(edges_.begin(), edges_.end(), e) == edges_.end()) edges_.push_back(std::move(e));
  return *this;
}

ModelSpec& ModelSpec::set_cpd(const std::string& id, CpdExpr cpd) {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "no node '" + id + "'");
  nodes_[it->second].cpd = std::move(cpd);
  return *this;
}

const NodeSpec& ModelSpec::node(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "no node '" + id + "'");
  return nodes_[it->second];
}

std::vector<std::string> ModelSpec::parents(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [p, c] : edges_)
    if (c == id) out.push_back(p);
  return out;
}

std::vector<std::string> ModelSpec::children(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [p, c] : edges_)
    if (p == id) out.push_back(c);
  return out;
}

bool ModelSpec::reaches(const std::string& from, const std::string& to) const {
  std::vector<std::string> stack{from};
  std::set<std::string> seen;
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    if (cur == to) return true;
    if (!seen.insert(cur).second) continue;
    for (const auto& [p, c] : edges_)
      if (p == cur) stack.push_back(c);
  }
  return false;
}

std::vector<std::string> ModelSpec::topological_order() const {
  std::map<std::string, int> indegree;
  for (const auto& n : nodes_) indegree[n.id] = 0;
  for (const auto& e : edges_) ++indegree[e.second];
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& [p, c] : edges_) {
      if (p == id && --indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != nodes_.size()) throw Error(ErrorCode::CycleDetected, "graph is not acyclic");
  return order;
}

// Validation ----------------------------------------------------------------------

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& f : findings) os << f.node << ": " << f.message << '\n';
  return os.str();
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

class Validator {
 public:
  Validator(const ModelSpec& m, ValidationReport& r) : model_(m), report_(r) {}

  void run() {
    for (const auto& n : model_.nodes()) {
      check_kind(n);
      check_parents(n);
      check_cpd(n, n.cpd);
    }
    try {
      (void)model_.topological_order();
    } catch (const Error&) {
      add("<graph>", "edge set contains a cycle");
    }
  }

 private:
  void add(const std::string& node, std::string msg) { report_.findings.push_back({node, std::move(msg)}); }

  void check_kind(const NodeSpec& n) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Labelled> || std::is_same_v<T, Ranked>) {
            if (k.states.size() < 2) add(n.id, "needs at least 2 states");
            std::set<std::string> uniq(k.states.begin(), k.states.end());
            if (uniq.size() != k.states.size()) add(n.id, "duplicate state names");
          } else if constexpr (std::is_same_v<T, Continuous>) {
            if (!(k.lo < k.hi)) add(n.id, "support [" + fmt(k.lo) + ", " + fmt(k.hi) + "] is empty");
          } else if constexpr (std::is_same_v<T, Count>) {
            if (k.n_max < 1) add(n.id, "count support needs n_max >= 1");
          }
        },
        n.kind);
  }

  void check_parents(const NodeSpec& n) {
    auto graph = model_.parents(n.id);
    std::set<std::string> declared(graph.begin(), graph.end());
    auto referenced = n.cpd.referenced_parents();
    for (const auto& r : referenced) {
      if (!declared.count(r)) add(n.id, "missing parent '" + r + "' (referenced by CPD but not a graph parent)");
    }
    for (const auto& d : declared) {
      if (!referenced.count(d)) add(n.id, "unreferenced parent '" + d + "' (graph parent not used by CPD)");
    }
  }

  std::size_t cardinality(const std::string& id) const {
    return state_names(model_.node(id).kind).size();
  }

  bool discrete_parent(const NodeSpec& n, const std::string& p) {
    if (!model_.contains(p)) return false;
    if (!is_discrete(model_.node(p).kind)) {
      add(n.id, "parent '" + p + "' must be discrete here");
      return false;
    }
    return true;
  }

  void check_positive(const NodeSpec& n, const Expr& e, const char* what) {
    if (auto v = e.constant_value(); v && !(*v > 0.0)) add(n.id, std::string(what) + " must be positive");
  }

  void check_cpd(const NodeSpec& n, const CpdExpr& c) {
    const bool child_discrete = is_discrete(n.kind);
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, TableCpd>) {
            check_table(n, b);
          } else if constexpr (std::is_same_v<T, BetaCpd>) {
            check_positive(n, b.alpha, "beta alpha");
            check_positive(n, b.beta, "beta beta");
            if (!std::holds_alternative<Continuous>(n.kind)) add(n.id, "beta CPD needs a continuous node");
          } else if constexpr (std::is_same_v<T, BinomialCpd>) {
            if (!std::holds_alternative<Count>(n.kind)) add(n.id, "binomial CPD needs a count node");
            if (auto p = b.p.constant_value(); p && (*p < 0.0 || *p > 1.0)) add(n.id, "binomial p outside [0,1]");
          } else if constexpr (std::is_same_v<T, UniformCpd>) {
            if (child_discrete) add(n.id, "uniform CPD needs a continuous or count node");
            auto a = b.a.constant_value();
            auto bb = b.b.constant_value();
            if (a && bb && !(*a <= *bb)) add(n.id, "uniform bounds reversed");
          } else if constexpr (std::is_same_v<T, TNormalCpd>) {
            if (!(b.lo < b.hi)) add(n.id, "tnormal truncation interval is empty");
            check_positive(n, b.variance, "tnormal variance");
            if (b.mean.has_static_division_by_zero() || b.variance.has_static_division_by_zero())
              add(n.id, "division by zero in expression");
          } else if constexpr (std::is_same_v<T, DeterministicCpd>) {
            if (b.value.has_static_division_by_zero()) add(n.id, "division by zero in expression");
          } else if constexpr (std::is_same_v<T, PartitionedCpd>) {
            if (discrete_parent(n, b.parent)) {
              if (b.cases.size() != cardinality(b.parent)) {
                add(n.id, "partition on '" + b.parent + "' has " + std::to_string(b.cases.size()) +
                              " cases for " + std::to_string(cardinality(b.parent)) + " states");
              }
            }
            for (const auto& sub : b.cases) check_cpd(n, sub);
          } else if constexpr (std::is_same_v<T, MixtureCpd>) {
            if (b.weights.size() != b.components.size() || b.components.empty()) {
              add(n.id, "mixture weights and components differ in length");
            }
            double total = 0.0;
            for (double w : b.weights) {
              if (w < 0.0) add(n.id, "negative mixture weight");
              total += w;
            }
            if (std::abs(total - 1.0) > 1e-9) add(n.id, "mixture weights sum to " + fmt(total) + " ≠ 1");
            for (const auto& sub : b.components) check_cpd(n, sub);
          }
        },
        c.body);
  }

  void check_table(const NodeSpec& n, const TableCpd& t) {
    if (!is_discrete(n.kind)) {
      add(n.id, "table CPD needs a discrete node");
      return;
    }
    std::size_t combos = 1;
    for (const auto& p : t.parents) {
      if (!discrete_parent(n, p)) return;
      combos *= cardinality(p);
    }
    const auto child_card = state_names(n.kind).size();
    if (t.rows.size() != combos) {
      add(n.id, "table has " + std::to_string(t.rows.size()) + " rows, expected " + std::to_string(combos));
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      if (row.size() != child_card) {
        add(n.id, "row " + std::to_string(r) + " has " + std::to_string(row.size()) + " entries, expected " +
                      std::to_string(child_card));
        continue;
      }
      double mass = 0.0;
      for (double v : row) {
        if (v < 0.0) add(n.id, "row " + std::to_string(r) + " has a negative entry");
        mass += v;
      }
      if (std::abs(mass - 1.0) > 1e-9) add(n.id, "row mass " + fmt(mass) + " ≠ 1");
    }
  }

  const ModelSpec& model_;
  ValidationReport& report_;
};

}  // namespace

ValidationReport validate(const ModelSpec& model) {
  ValidationReport report;
  Validator(model, report).run();
  return report;
}

// Builders ------------------------------------------------------------------------

namespace cpd {
CpdExpr table(std::vector<std::string> parents, std::vector<std::vector<double>> rows) {
  return CpdExpr{TableCpd{std::move(parents), std::move(rows)}};
}
CpdExpr prior(std::vector<double> probabilities) { return table({}, {std::move(probabilities)}); }
CpdExpr beta(Expr alpha, Expr b) { return CpdExpr{BetaCpd{std::move(alpha), std::move(b)}}; }
CpdExpr binomial(Expr n, Expr p) { return CpdExpr{BinomialCpd{std::move(n), std::move(p)}}; }
CpdExpr uniform(Expr a, Expr b) { return CpdExpr{UniformCpd{std::move(a), std::move(b)}}; }
CpdExpr tnormal(Expr mean, Expr variance, double lo, double hi) {
  return CpdExpr{TNormalCpd{std::move(mean), std::move(variance), lo, hi}};
}
CpdExpr deterministic(Expr value) { return CpdExpr{DeterministicCpd{std::move(value)}}; }
CpdExpr partitioned(std::string parent, std::vector<CpdExpr> cases) {
  return CpdExpr{PartitionedCpd{std::move(parent), std::move(cases)}};
}
CpdExpr mixture(std::vector<double> weights, std::vector<CpdExpr> components) {
  return CpdExpr{MixtureCpd{std::move(weights), std::move(components)}};
}
}  // namespace cpd

}  // namespace riskbn
