#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>

#include "factor.hpp"
#include "riskbn/error.hpp"
#include "riskbn/infer.hpp"

namespace riskbn {

namespace {

using detail::Factor;

constexpr double kLogThreshold = 1e-280;
const double kLogImpossible = std::log(1e-300);

struct PreparedEvidence {
  std::vector<std::optional<std::vector<bool>>> masks;  // by node index
  std::vector<std::optional<std::size_t>> fixed;        // single admissible state
};

PreparedEvidence prepare(const CompiledModel& m, const Evidence& evidence) {
  PreparedEvidence p;
  p.masks.resize(m.size());
  p.fixed.resize(m.size());
  for (const auto& [node, finding] : evidence) {
    const auto v = m.index(node);
    auto mask = evidence_mask(m, node, finding);
    if (std::count(mask.begin(), mask.end(), true) == 1) {
      p.fixed[v] = static_cast<std::size_t>(std::find(mask.begin(), mask.end(), true) - mask.begin());
    }
    p.masks[v] = std::move(mask);
  }
  return p;
}

std::vector<bool> relevant_nodes(const CompiledModel& m, const PreparedEvidence& ev, std::size_t query) {
  std::vector<bool> keep(m.size(), false);
  std::vector<std::size_t> stack{query};
  for (std::size_t v = 0; v < m.size(); ++v)
    if (ev.masks[v]) stack.push_back(v);
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    if (keep[v]) continue;
    keep[v] = true;
    for (auto p : m.parents(v)) stack.push_back(p);
  }
  return keep;
}

Factor node_factor(const CompiledModel& m, std::size_t v) {
  std::vector<std::size_t> vars(m.parents(v));
  vars.push_back(v);
  std::vector<std::size_t> cards;
  for (auto x : vars) cards.push_back(m.domain(x).size());
  return detail::make_factor(vars, cards, m.cpt(v).values);
}

std::vector<std::size_t> min_fill_order(const CompiledModel& m, const std::vector<Factor>& factors,
                                        std::size_t query) {
  std::map<std::size_t, std::set<std::size_t>> adj;
  for (const auto& f : factors) {
    for (auto a : f.vars) {
      adj[a];
      for (auto b : f.vars)
        if (a != b) adj[a].insert(b);
    }
  }
  adj.erase(query);
  for (auto& [v, n] : adj) n.erase(query);

  std::vector<std::size_t> order;
  while (!adj.empty()) {
    std::size_t best = 0;
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    bool found = false;
    for (const auto& [v, nbrs] : adj) {
      std::size_t fill = 0;
      for (auto a = nbrs.begin(); a != nbrs.end(); ++a)
        for (auto b = std::next(a); b != nbrs.end(); ++b)
          if (!adj.at(*a).count(*b)) ++fill;
      if (!found || fill < best_fill || (fill == best_fill && m.domain(v).id < m.domain(best).id)) {
        best = v;
        best_fill = fill;
        found = true;
      }
    }
    const auto nbrs = adj.at(best);
    for (auto a : nbrs) {
      for (auto b : nbrs)
        if (a != b) adj.at(a).insert(b);
      adj.at(a).erase(best);
    }
    adj.erase(best);
    order.push_back(best);
  }
  return order;
}

struct Marginal {
  std::vector<double> mass;
  double log_z = 0.0;
};

Marginal eliminate(const CompiledModel& m, const PreparedEvidence& ev, std::size_t query,
                   const VeOptions& options) {
  const auto keep = relevant_nodes(m, ev, query);

  std::vector<Factor> factors;
  for (std::size_t v = 0; v < m.size(); ++v) {
    if (!keep[v]) continue;
    Factor f = node_factor(m, v);
    if (ev.masks[v] && !(ev.fixed[v] && v != query)) detail::apply_mask(f, v, *ev.masks[v], false);
    for (std::size_t x : std::vector<std::size_t>(f.vars)) {
      if (x != query && ev.fixed[x]) f = detail::restrict_to(f, x, *ev.fixed[x]);
    }
    factors.push_back(std::move(f));
  }

  bool log_mode = false;
  for (const auto& f : factors)
    for (double x : f.values)
      if (x > 0.0 && x < kLogThreshold) log_mode = true;
  if (log_mode)
    for (auto& f : factors) detail::to_log(f);

  std::vector<std::size_t> order;
  if (options.order) {
    std::set<std::size_t> present;
    for (const auto& f : factors) present.insert(f.vars.begin(), f.vars.end());
    present.erase(query);
    for (const auto& id : *options.order) {
      const auto v = m.index(id);
      if (present.erase(v)) order.push_back(v);
    }
    if (!present.empty())
      throw Error(ErrorCode::InvalidConfig, "elimination order misses '" + m.domain(*present.begin()).id + "'");
  } else {
    order = min_fill_order(m, factors, query);
  }

  for (auto v : order) {
    std::vector<Factor> touched, rest;
    for (auto& f : factors) (f.has(v) ? touched : rest).push_back(std::move(f));
    if (touched.empty()) {
      factors = std::move(rest);
      continue;
    }
    std::vector<const Factor*> ptrs;
    for (const auto& f : touched) ptrs.push_back(&f);
    Factor reduced = detail::multiply_sum_out(ptrs, v, log_mode);
    if (!log_mode) detail::rescale(reduced);
    rest.push_back(std::move(reduced));
    factors = std::move(rest);
  }

  Factor result;
  result.values = {log_mode ? 0.0 : 1.0};
  for (const auto& f : factors) {
    result = detail::multiply(result, f, log_mode);
    if (!log_mode) detail::rescale(result);
  }

  const std::size_t card = m.domain(query).size();
  if (result.vars.size() != 1 || result.values.size() != card) {
    throw Error(ErrorCode::UnnormalizedPosterior, m.domain(query).id + ": elimination left a malformed factor");
  }
  Marginal out;
  out.mass.resize(card);
  if (log_mode) {
    const double mx = *std::max_element(result.values.begin(), result.values.end());
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw Error(ErrorCode::ImpossibleEvidence, "evidence has zero probability");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < card; ++i) s += out.mass[i] = std::exp(result.values[i] - mx);
    for (double& x : out.mass) x /= s;
    out.log_z = mx + std::log(s);
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < card; ++i) s += out.mass[i] = result.values[i];
    if (!(s > 0.0)) throw Error(ErrorCode::ImpossibleEvidence, "evidence has zero probability");
    for (double& x : out.mass) x /= s;
    out.log_z = std::log(s) + result.log_scale;
  }
  if (out.log_z < kLogImpossible) {
    throw Error(ErrorCode::ImpossibleEvidence, "evidence probability below 1e-300");
  }
  return out;
}

Posterior make_posterior(const CompiledModel& m, std::size_t v, std::vector<double> mass) {
  const auto& d = m.domain(v);
  Posterior p;
  p.node = d.id;
  p.labels = d.labels;
  p.values = d.values;
  p.mass = std::move(mass);
  if (d.binned()) p.moments = summarize(*d.bins, p.mass);
  return p;
}

}  // namespace

std::vector<Posterior> posterior(const CompiledModel& m, const Evidence& evidence,
                                 const std::vector<std::string>& query, const VeOptions& options) {
  const auto ev = prepare(m, evidence);
  std::vector<std::size_t> targets;
  for (const auto& id : query) targets.push_back(m.index(id));

  std::vector<Posterior> out(targets.size());
  auto run = [&](std::size_t i) {
    out[i] = make_posterior(m, targets[i], eliminate(m, ev, targets[i], options).mass);
  };
  if (options.policy == ExecPolicy::Serial || targets.size() < 2) {
    for (std::size_t i = 0; i < targets.size(); ++i) run(i);
    return out;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<std::int64_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      run(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Posterior posterior(const CompiledModel& m, const Evidence& evidence, const std::string& node,
                    const VeOptions& options) {
  VeOptions serial = options;
  serial.policy = ExecPolicy::Serial;
  return posterior(m, evidence, std::vector<std::string>{node}, serial).front();
}

double log_evidence_probability(const CompiledModel& m, const Evidence& evidence) {
  if (evidence.empty()) return 0.0;
  const auto ev = prepare(m, evidence);
  return eliminate(m, ev, m.index(evidence.begin()->first), {}).log_z;
}

}  // namespace riskbn
