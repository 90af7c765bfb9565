#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "riskbn/error.hpp"
#include "riskbn/infer.hpp"

namespace riskbn {

std::size_t CompiledModel::index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "unknown node '" + id + "'");
  return it->second;
}

IntervalSet default_bins_for(const std::string& id, const NodeKind& kind, const BinningConfig& binning) {
  if (auto it = binning.explicit_bins.find(id); it != binning.explicit_bins.end()) return it->second;
  int bins = binning.default_bins;
  std::optional<BinScheme> scheme;
  if (auto it = binning.overrides.find(id); it != binning.overrides.end()) {
    if (it->second.bins > 0) bins = it->second.bins;
    scheme = it->second.scheme;
  }
  if (const auto* c = std::get_if<Continuous>(&kind)) {
    const BinScheme s = scheme.value_or(c->lo == 0.0 && c->hi == 1.0 ? BinScheme::LogSpaced : BinScheme::EqualWidth);
    return make_bins(id, c->lo, c->hi, bins, s, binning.log_floor);
  }
  if (const auto* n = std::get_if<Count>(&kind)) {
    if (scheme && *scheme != BinScheme::Integer)
      throw Error(ErrorCode::BadSupport, id + ": count nodes take integer bins only");
    return make_count_bins(id, n->n_max, 2 * bins);
  }
  throw Error(ErrorCode::BadSupport, id + ": discrete nodes are not binned");
}

CompiledModel compile(const ModelSpec& model, const BinningConfig& binning) {
  const auto report = validate(model);
  if (!report.ok()) throw Error(ErrorCode::ValidationFailed, report.to_string());

  CompiledModel m;
  m.spec_ = model;
  m.binning_ = binning;
  const auto n = model.size();
  m.domains_.resize(n);
  m.parents_.resize(n);
  m.children_.resize(n);
  m.cpts_.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.index_[model.nodes()[i].id] = i;

  for (const auto& id : model.topological_order()) m.order_.push_back(m.index_.at(id));

  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = model.nodes()[i];
    m.domains_[i] = is_discrete(spec.kind) ? discrete_domain(spec.id, spec.kind)
                                           : binned_domain(spec.id, spec.kind, default_bins_for(spec.id, spec.kind, binning));
    for (const auto& p : model.parents(spec.id)) {
      m.parents_[i].push_back(m.index_.at(p));
      m.children_[m.index_.at(p)].push_back(i);
    }
  }

  for (auto v : m.order_) {
    const auto& spec = model.nodes()[v];
    std::vector<const VariableDomain*> parents;
    std::vector<std::string> ids;
    for (auto p : m.parents_[v]) {
      parents.push_back(&m.domains_[p]);
      ids.push_back(m.domains_[p].id);
    }
    m.cpts_[v] = expression_to_cpt(spec.cpd, parents, ids, m.domains_[v], binning.cpt);
  }
  return m;
}

// Evidence ----------------------------------------------------------------------

std::vector<bool> evidence_mask(const CompiledModel& m, const std::string& node, const Observation& finding) {
  const auto& d = m.domain(node);
  std::vector<bool> keep(d.size(), false);
  auto invalid = [&](const std::string& msg) { throw Error(ErrorCode::InvalidEvidence, node + ": " + msg); };

  if (const auto* s = std::get_if<DiscreteState>(&finding)) {
    if (d.binned()) invalid("expects a numeric value, not a state");
    auto it = std::find(d.labels.begin(), d.labels.end(), s->state);
    if (it == d.labels.end()) invalid("no state named '" + s->state + "'");
    keep[static_cast<std::size_t>(it - d.labels.begin())] = true;
    return keep;
  }
  if (const auto* p = std::get_if<Point>(&finding)) {
    if (!std::isfinite(p->value)) invalid("value must be finite");
    if (!d.binned()) {
      if (std::holds_alternative<Boolean>(d.kind) && (p->value == 0.0 || p->value == 1.0)) {
        keep[static_cast<std::size_t>(p->value)] = true;
        return keep;
      }
      invalid("expects one of its states");
    }
    const auto& b = *d.bins;
    if (p->value < b.support_lo() || p->value > b.support_hi()) invalid("value outside the node support");
    if (b.integer() && p->value != std::floor(p->value)) invalid("count evidence must be an integer");
    keep[b.locate(p->value)] = true;
    return keep;
  }
  const auto& iv = std::get<Interval>(finding);
  if (!d.binned()) invalid("interval evidence needs a continuous or count node");
  if (!(iv.lo <= iv.hi)) invalid("interval must satisfy lo <= hi");
  const auto& b = *d.bins;
  bool any = false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    bool overlap;
    if (b.integer()) {
      overlap = std::ceil(iv.lo) <= static_cast<double>(b.last_integer(i)) && std::floor(iv.hi) >= b.lower(i);
    } else {
      const bool last = i + 1 == b.size();
      overlap = b.lower(i) <= iv.hi && (last ? b.upper(i) >= iv.lo : b.upper(i) > iv.lo);
    }
    keep[i] = overlap;
    any = any || overlap;
  }
  if (!any) invalid("interval does not overlap the node support");
  return keep;
}

void check_evidence(const CompiledModel& m, const Evidence& evidence) {
  for (const auto& [node, finding] : evidence) evidence_mask(m, node, finding);
}

// Posterior helpers ----------------------------------------------------------------

double Posterior::mean() const {
  if (moments) return moments->mean;
  double s = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) s += mass[i] * values[i];
  return s;
}

std::size_t Posterior::mode() const {
  return static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
}

double Posterior::mass_of(const std::vector<std::string>& states) const {
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (std::find(states.begin(), states.end(), labels[i]) != states.end()) s += mass[i];
  return s;
}

// d-separation ---------------------------------------------------------------------

std::vector<std::string> dependent_nodes(const ModelSpec& model, const std::string& source,
                                         const std::vector<std::string>& observed) {
  if (!model.contains(source)) throw Error(ErrorCode::UnknownNode, "unknown node '" + source + "'");
  std::set<std::string> z(observed.begin(), observed.end());
  z.erase(source);

  // ancestors of the observed set, observed nodes included
  std::set<std::string> anc;
  std::deque<std::string> work(z.begin(), z.end());
  while (!work.empty()) {
    auto x = work.front();
    work.pop_front();
    if (!anc.insert(x).second) continue;
    for (const auto& p : model.parents(x)) work.push_back(p);
  }

  enum Dir { Up, Down };
  std::set<std::pair<std::string, Dir>> visited;
  std::set<std::string> reachable;
  std::deque<std::pair<std::string, Dir>> queue{{source, Up}};
  while (!queue.empty()) {
    auto [y, d] = queue.front();
    queue.pop_front();
    if (!visited.insert({y, d}).second) continue;
    const bool obs = z.count(y) != 0;
    if (!obs) reachable.insert(y);
    if (d == Up && !obs) {
      for (const auto& p : model.parents(y)) queue.push_back({p, Up});
      for (const auto& c : model.children(y)) queue.push_back({c, Down});
    } else if (d == Down) {
      if (!obs)
        for (const auto& c : model.children(y)) queue.push_back({c, Down});
      if (anc.count(y))
        for (const auto& p : model.parents(y)) queue.push_back({p, Up});
    }
  }
  return {reachable.begin(), reachable.end()};
}

}  // namespace riskbn
