#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "riskbn/error.hpp"
#include "riskbn/infer.hpp"

namespace riskbn {

namespace {

constexpr double kMinEss = 10.0;

std::size_t draw(std::span<const double> column, const std::vector<bool>* mask, double total, double u) {
  double target = u * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (column[i] <= 0.0) continue;
    last = i;
    if (target < column[i]) return i;
    target -= column[i];
  }
  return last;  // rounding left a sliver past the final entry
}

}  // namespace

std::vector<Posterior> sample_posterior(const CompiledModel& m, const Evidence& evidence,
                                        const std::vector<std::string>& query, std::int64_t n_samples,
                                        std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::InvalidConfig, "n_samples must be at least 1");

  std::vector<std::optional<std::vector<bool>>> masks(m.size());
  std::vector<bool> single(m.size(), false);
  for (const auto& [node, finding] : evidence) {
    const auto v = m.index(node);
    masks[v] = evidence_mask(m, node, finding);
    single[v] = std::count(masks[v]->begin(), masks[v]->end(), true) == 1;
  }
  std::vector<std::size_t> targets;
  for (const auto& id : query) targets.push_back(m.index(id));

  // ancestors of query and evidence nodes, in topological order
  std::vector<bool> keep(m.size(), false);
  std::vector<std::size_t> stack(targets);
  for (std::size_t v = 0; v < m.size(); ++v)
    if (masks[v]) stack.push_back(v);
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    if (keep[v]) continue;
    keep[v] = true;
    for (auto p : m.parents(v)) stack.push_back(p);
  }
  std::vector<std::size_t> order;
  for (auto v : m.order())
    if (keep[v]) order.push_back(v);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<std::size_t>(n_samples);
  std::vector<double> log_w(n, 0.0);
  std::vector<std::vector<std::size_t>> drawn(targets.size(), std::vector<std::size_t>(n));
  std::vector<std::size_t> state(m.size(), 0);

  for (std::size_t s = 0; s < n; ++s) {
    double lw = 0.0;
    for (auto v : order) {
      const auto& parents = m.parents(v);
      std::size_t col = 0;
      for (auto p : parents) col = col * m.domain(p).size() + state[p];
      const auto column = m.cpt(v).column(col);
      if (single[v]) {
        state[v] = static_cast<std::size_t>(std::find(masks[v]->begin(), masks[v]->end(), true) - masks[v]->begin());
        lw += std::log(column[state[v]]);
      } else if (masks[v]) {
        double in = 0.0;
        for (std::size_t i = 0; i < column.size(); ++i)
          if ((*masks[v])[i]) in += column[i];
        lw += std::log(in);
        state[v] = in > 0.0 ? draw(column, &*masks[v], in, unit(rng)) : 0;
      } else {
        double total = 0.0;
        for (double x : column) total += x;
        state[v] = draw(column, nullptr, total, unit(rng));
      }
      if (lw == -std::numeric_limits<double>::infinity()) break;
    }
    log_w[s] = lw;
    for (std::size_t q = 0; q < targets.size(); ++q) drawn[q][s] = state[targets[q]];
  }

  const double mx = *std::max_element(log_w.begin(), log_w.end());
  if (mx == -std::numeric_limits<double>::infinity())
    throw Error(ErrorCode::DegenerateWeights, "every sample has zero weight");
  std::vector<double> w(n);
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    w[s] = std::exp(log_w[s] - mx);
    sw += w[s];
    sw2 += w[s] * w[s];
  }
  const double ess = sw * sw / sw2;
  if (ess < kMinEss) {
    throw Error(ErrorCode::DegenerateWeights,
                "effective sample size " + std::to_string(ess) + " is below " + std::to_string(kMinEss));
  }

  std::vector<Posterior> out;
  for (std::size_t q = 0; q < targets.size(); ++q) {
    const auto& d = m.domain(targets[q]);
    const std::size_t K = d.size();
    std::vector<double> mass(K, 0.0), sq(K, 0.0);
    double sv2 = 0.0, sv22 = 0.0;  // sum w^2 v, sum w^2 v^2
    for (std::size_t s = 0; s < n; ++s) {
      const auto k = drawn[q][s];
      mass[k] += w[s];
      sq[k] += w[s] * w[s];
      const double v = d.values[k];
      sv2 += w[s] * w[s] * v;
      sv22 += w[s] * w[s] * v * v;
    }
    Posterior p;
    p.node = d.id;
    p.labels = d.labels;
    p.values = d.values;
    p.ess = ess;
    p.std_error.resize(K);
    double mean = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      mass[k] /= sw;
      const double num = sq[k] * (1.0 - 2.0 * mass[k]) + mass[k] * mass[k] * sw2;
      p.std_error[k] = std::sqrt(std::max(0.0, num)) / sw;
      mean += mass[k] * d.values[k];
    }
    p.mean_std_error = std::sqrt(std::max(0.0, sv22 - 2.0 * mean * sv2 + mean * mean * sw2)) / sw;
    // renormalize against rounding before summarizing
    double total = 0.0;
    for (double x : mass) total += x;
    for (double& x : mass) x /= total;
    p.mass = std::move(mass);
    if (d.binned()) p.moments = summarize(*d.bins, p.mass);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace riskbn
