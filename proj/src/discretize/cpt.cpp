#include "riskbn/cpt.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "riskbn/error.hpp"

namespace riskbn {

VariableDomain discrete_domain(const std::string& id, const NodeKind& kind) {
  VariableDomain d;
  d.id = id;
  d.kind = kind;
  d.labels = state_names(kind);
  const auto K = d.labels.size();
  d.values.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    d.values[k] = std::holds_alternative<Ranked>(kind) ? ranked_midpoint(k, K) : static_cast<double>(k);
  }
  return d;
}

VariableDomain binned_domain(const std::string& id, const NodeKind& kind, IntervalSet bins) {
  VariableDomain d;
  d.id = id;
  d.kind = kind;
  d.values = bins.representatives();
  d.bins = std::move(bins);
  return d;
}

namespace {

// Bound form of a CpdExpr with parents resolved to slots of the node's
// parent list.
struct Bound;

struct BTable {
  std::vector<std::size_t> slots;
  std::vector<std::size_t> strides;
  const std::vector<std::vector<double>>* rows = nullptr;
};
struct BBeta {
  BoundExpr alpha, beta;
};
struct BBinomial {
  BoundExpr n, p;
};
struct BUniform {
  BoundExpr a, b;
};
struct BTNormal {
  BoundExpr mean, variance;
  double lo, hi;
};
struct BDeterministic {
  BoundExpr value;
};
struct BPartitioned {
  std::size_t slot;
  std::vector<Bound> cases;
};
struct BMixture {
  std::vector<double> weights;
  std::vector<Bound> components;
};
struct Bound {
  std::variant<BTable, BBeta, BBinomial, BUniform, BTNormal, BDeterministic, BPartitioned, BMixture> body;
};

std::size_t slot_of(std::span<const std::string> ids, const std::string& id) {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw Error(ErrorCode::UnknownNode, "CPD references '" + id + "' which is not a parent");
  return static_cast<std::size_t>(it - ids.begin());
}

Bound bind(const CpdExpr& c, std::span<const std::string> ids, std::span<const VariableDomain* const> parents) {
  return std::visit(
      [&](const auto& b) -> Bound {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, TableCpd>) {
          BTable t;
          t.rows = &b.rows;
          for (const auto& p : b.parents) t.slots.push_back(slot_of(ids, p));
          t.strides.assign(t.slots.size(), 1);
          for (std::size_t i = t.slots.size(); i-- > 1;) {
            t.strides[i - 1] = t.strides[i] * parents[t.slots[i]]->size();
          }
          return Bound{t};
        } else if constexpr (std::is_same_v<T, BetaCpd>) {
          return Bound{BBeta{BoundExpr(b.alpha, ids), BoundExpr(b.beta, ids)}};
        } else if constexpr (std::is_same_v<T, BinomialCpd>) {
          return Bound{BBinomial{BoundExpr(b.n, ids), BoundExpr(b.p, ids)}};
        } else if constexpr (std::is_same_v<T, UniformCpd>) {
          return Bound{BUniform{BoundExpr(b.a, ids), BoundExpr(b.b, ids)}};
        } else if constexpr (std::is_same_v<T, TNormalCpd>) {
          return Bound{BTNormal{BoundExpr(b.mean, ids), BoundExpr(b.variance, ids), b.lo, b.hi}};
        } else if constexpr (std::is_same_v<T, DeterministicCpd>) {
          return Bound{BDeterministic{BoundExpr(b.value, ids)}};
        } else if constexpr (std::is_same_v<T, PartitionedCpd>) {
          BPartitioned p;
          p.slot = slot_of(ids, b.parent);
          if (b.cases.size() != parents[p.slot]->size())
            throw Error(ErrorCode::UnsupportedCombination, "partition case count does not match parent states");
          for (const auto& s : b.cases) p.cases.push_back(bind(s, ids, parents));
          return Bound{std::move(p)};
        } else {
          BMixture m;
          m.weights = b.weights;
          for (const auto& s : b.components) m.components.push_back(bind(s, ids, parents));
          return Bound{std::move(m)};
        }
      },
      c.body);
}

struct Column {
  std::span<const std::size_t> states;
  std::span<const double> values;
  std::span<const VariableDomain* const> parents;
  const CptOptions* options;
};

[[noreturn]] void unsupported(const VariableDomain& child, const std::string& msg) {
  throw Error(ErrorCode::UnsupportedCombination, child.id + ": " + msg);
}

// Child state extents on the real line (ranked states occupy [k/K, (k+1)/K]).
std::pair<double, double> child_extent(const VariableDomain& child, std::size_t i) {
  if (child.binned()) return child.bins->extent(i);
  const double K = static_cast<double>(child.size());
  return {i / K, (i + 1) / K};
}

void normalize_or_throw(const VariableDomain& child, std::span<double> out) {
  double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) unsupported(child, "distribution has no mass on the child support");
  for (double& v : out) v /= total;
}

void put_point(const VariableDomain& child, double v, double weight, std::span<double> out) {
  if (std::isnan(v)) unsupported(child, "deterministic value is NaN");
  std::size_t idx;
  if (child.binned()) {
    idx = child.bins->locate(v);
  } else if (child.ranked()) {
    const double K = static_cast<double>(child.size());
    idx = static_cast<std::size_t>(std::clamp(std::floor(v * K), 0.0, K - 1));
  } else {
    idx = static_cast<std::size_t>(std::clamp(std::round(v), 0.0, static_cast<double>(child.size() - 1)));
  }
  out[idx] += weight;
}

void beta_column(const BBeta& b, const Column& col, const VariableDomain& child, std::span<double> out) {
  if (!child.binned() || child.bins->integer()) unsupported(child, "beta needs a continuous child");
  const double a = b.alpha.eval(col.values);
  const double bb = b.beta.eval(col.values);
  if (!(a > 0.0) || !(bb > 0.0)) unsupported(child, "beta parameters must be positive");
  const double mean = a / (a + bb);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = std::clamp(child.bins->lower(i), 0.0, 1.0);
    const double hi = std::clamp(child.bins->upper(i), 0.0, 1.0);
    if (hi <= lo) {
      out[i] = 0.0;
    } else if (lo >= mean) {
      out[i] = boost::math::ibetac(a, bb, lo) - boost::math::ibetac(a, bb, hi);
    } else {
      out[i] = boost::math::ibeta(a, bb, hi) - boost::math::ibeta(a, bb, lo);
    }
    out[i] = std::max(out[i], 0.0);
  }
  normalize_or_throw(child, out);
}

void uniform_column(const BUniform& u, const Column& col, const VariableDomain& child, std::span<double> out) {
  if (!child.binned()) unsupported(child, "uniform needs a continuous or count child");
  double a = u.a.eval(col.values);
  double b = u.b.eval(col.values);
  if (b < a) std::swap(a, b);
  if (child.bins->integer()) {
    const double ia = std::ceil(a);
    const double ib = std::floor(b);
    if (ib < ia) unsupported(child, "uniform range contains no integers");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double lo = std::max(ia, child.bins->lower(i));
      const double hi = std::min(ib, child.bins->upper(i) - 1.0);
      out[i] = hi >= lo ? hi - lo + 1.0 : 0.0;
    }
  } else if (a == b) {
    std::fill(out.begin(), out.end(), 0.0);
    put_point(child, a, 1.0, out);
    return;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double lo = std::max(a, child.bins->lower(i));
      const double hi = std::min(b, child.bins->upper(i));
      out[i] = hi > lo ? hi - lo : 0.0;
    }
  }
  normalize_or_throw(child, out);
}

// Mass of N(mean, sd) on [lo, hi], taking the tail that keeps precision.
double normal_mass(double mean, double sd, double lo, double hi) {
  const double zl = (lo - mean) / sd;
  const double zh = (hi - mean) / sd;
  constexpr double r2 = 0.70710678118654752440;
  if (zl >= 0.0) return 0.5 * (std::erfc(zl * r2) - std::erfc(zh * r2));
  if (zh <= 0.0) return 0.5 * (std::erfc(-zh * r2) - std::erfc(-zl * r2));
  return 1.0 - 0.5 * std::erfc(-zl * r2) - 0.5 * std::erfc(zh * r2);
}

void tnormal_column(const BTNormal& t, const Column& col, const VariableDomain& child, std::span<double> out) {
  if (!child.binned() && !child.ranked()) unsupported(child, "tnormal needs a ranked, continuous or count child");
  const double mean = t.mean.eval(col.values);
  const double var = t.variance.eval(col.values);
  std::fill(out.begin(), out.end(), 0.0);
  if (std::isnan(mean)) unsupported(child, "tnormal mean is NaN");
  if (!(var > 0.0)) {
    put_point(child, std::clamp(mean, t.lo, t.hi), 1.0, out);
    return;
  }
  const double sd = std::sqrt(var);
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto [lo, hi] = child_extent(child, i);
    lo = std::max(lo, t.lo);
    hi = std::min(hi, t.hi);
    out[i] = hi > lo ? normal_mass(mean, sd, lo, hi) : 0.0;
    total += out[i];
  }
  if (!(total > 0.0)) {
    // Mean so far outside the support that every state underflows.
    std::fill(out.begin(), out.end(), 0.0);
    put_point(child, std::clamp(mean, t.lo, t.hi), 1.0, out);
    return;
  }
  for (double& v : out) v /= total;
}

void binomial_column(const BBinomial& b, const Column& col, const VariableDomain& child, std::span<double> out) {
  if (!child.binned() || !child.bins->integer()) unsupported(child, "binomial needs a count child");
  const double n_raw = b.n.eval(col.values);
  const double p = std::clamp(b.p.eval(col.values), 0.0, 1.0);
  if (!(n_raw >= 0.0)) unsupported(child, "binomial n must be non-negative");
  const double n = std::round(n_raw);
  if (n > child.bins->support_hi()) {
    unsupported(child, "binomial n = " + std::to_string(static_cast<long long>(n)) + " exceeds the child support");
  }
  std::fill(out.begin(), out.end(), 0.0);
  if (p == 0.0 || n == 0.0) {
    out[child.bins->locate(0.0)] = 1.0;
    return;
  }
  if (p == 1.0) {
    out[child.bins->locate(n)] = 1.0;
    return;
  }
  boost::math::binomial_distribution<double> dist(n, p);
  const double mean = n * p;
  auto cdf = [&](double k) { return k < 0.0 ? 0.0 : (k >= n ? 1.0 : boost::math::cdf(dist, k)); };
  auto sf = [&](double k) {
    return k < 0.0 ? 1.0 : (k >= n ? 0.0 : boost::math::cdf(boost::math::complement(dist, k)));
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = child.bins->lower(i);
    if (a > n) break;
    const double last = std::min(static_cast<double>(child.bins->last_integer(i)), n);
    double m;
    if (a == last) {
      m = boost::math::pdf(dist, a);
    } else if (last <= mean) {
      m = cdf(last) - cdf(a - 1.0);
    } else if (a > mean) {
      m = sf(a - 1.0) - sf(last);
    } else {
      m = 1.0 - cdf(a - 1.0) - sf(last);
    }
    out[i] = std::max(m, 0.0);
  }
  normalize_or_throw(child, out);
}

// Points spread across bin i of a binned parent.
void subsample(const VariableDomain& parent, std::size_t i, int count, std::vector<double>& pts) {
  pts.clear();
  const auto& bins = *parent.bins;
  if (count <= 1) {
    pts.push_back(bins.representative(i));
    return;
  }
  if (bins.integer()) {
    const double a = bins.lower(i);
    const double width = bins.upper(i) - a;
    if (width <= count) {
      for (double k = 0; k < width; ++k) pts.push_back(a + k);
      return;
    }
    for (int j = 0; j < count; ++j) pts.push_back(a + std::floor((j + 0.5) * width / count));
    return;
  }
  const double lo = bins.lower(i);
  const double hi = bins.upper(i);
  const bool geometric = bins.scheme() == BinScheme::LogSpaced && lo > 0.0;
  for (int j = 0; j < count; ++j) {
    const double t = (j + 0.5) / count;
    pts.push_back(geometric ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
  }
}

void deterministic_column(const BDeterministic& d, const Column& col, const VariableDomain& child,
                          std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<std::size_t> binned;
  for (auto s : d.value.slots())
    if (col.parents[s]->binned()) binned.push_back(s);
  if (binned.empty()) {
    put_point(child, d.value.eval(col.values), 1.0, out);
    return;
  }
  const double dim = static_cast<double>(binned.size());
  const int per = std::max(1, static_cast<int>(std::floor(std::pow(col.options->deterministic_budget, 1.0 / dim) + 1e-9)));
  std::vector<std::vector<double>> grids(binned.size());
  for (std::size_t k = 0; k < binned.size(); ++k) {
    subsample(*col.parents[binned[k]], col.states[binned[k]], per, grids[k]);
  }
  std::vector<double> vals(col.values.begin(), col.values.end());
  std::vector<std::size_t> idx(binned.size(), 0);
  std::size_t total = 1;
  for (const auto& g : grids) total *= g.size();
  const double w = 1.0 / static_cast<double>(total);
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t k = 0; k < binned.size(); ++k) vals[binned[k]] = grids[k][idx[k]];
    put_point(child, d.value.eval(vals), w, out);
    for (std::size_t k = binned.size(); k-- > 0;) {
      if (++idx[k] < grids[k].size()) break;
      idx[k] = 0;
    }
  }
}

void fill_column(const Bound& b, const Column& col, const VariableDomain& child, std::span<double> out) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, BTable>) {
          std::size_t row = 0;
          for (std::size_t k = 0; k < x.slots.size(); ++k) row += col.states[x.slots[k]] * x.strides[k];
          const auto& r = (*x.rows).at(row);
          if (r.size() != out.size()) unsupported(child, "table row length does not match child states");
          std::copy(r.begin(), r.end(), out.begin());
        } else if constexpr (std::is_same_v<T, BBeta>) {
          beta_column(x, col, child, out);
        } else if constexpr (std::is_same_v<T, BBinomial>) {
          binomial_column(x, col, child, out);
        } else if constexpr (std::is_same_v<T, BUniform>) {
          uniform_column(x, col, child, out);
        } else if constexpr (std::is_same_v<T, BTNormal>) {
          tnormal_column(x, col, child, out);
        } else if constexpr (std::is_same_v<T, BDeterministic>) {
          deterministic_column(x, col, child, out);
        } else if constexpr (std::is_same_v<T, BPartitioned>) {
          fill_column(x.cases[col.states[x.slot]], col, child, out);
        } else {
          std::fill(out.begin(), out.end(), 0.0);
          std::vector<double> scratch(out.size());
          for (std::size_t k = 0; k < x.components.size(); ++k) {
            fill_column(x.components[k], col, child, scratch);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += x.weights[k] * scratch[i];
          }
        }
      },
      b.body);
}

void compute_column(const Bound& bound, std::size_t c, std::span<const VariableDomain* const> parents,
                    const VariableDomain& child, const CptOptions& options, Cpt& cpt) {
  std::vector<std::size_t> states(parents.size());
  std::vector<double> values(parents.size());
  std::size_t rest = c;
  for (std::size_t k = parents.size(); k-- > 0;) {
    states[k] = rest % parents[k]->size();
    rest /= parents[k]->size();
    values[k] = parents[k]->values[states[k]];
  }
  Column col{states, values, parents, &options};
  fill_column(bound, col, child, {cpt.values.data() + c * cpt.child_card, cpt.child_card});
}

}  // namespace

Cpt expression_to_cpt(const CpdExpr& expr, std::span<const VariableDomain* const> parents,
                      std::span<const std::string> parent_ids, const VariableDomain& child,
                      const CptOptions& options) {
  if (parents.size() != parent_ids.size())
    throw Error(ErrorCode::UnsupportedCombination, child.id + ": parent ids and domains differ in length");
  const Bound bound = bind(expr, parent_ids, parents);

  Cpt cpt;
  cpt.child_card = child.size();
  std::size_t columns = 1;
  for (const auto* p : parents) {
    cpt.parent_cards.push_back(p->size());
    columns *= p->size();
  }
  cpt.values.assign(columns * cpt.child_card, 0.0);

  if (options.policy == ExecPolicy::Serial) {
    for (std::size_t c = 0; c < columns; ++c) compute_column(bound, c, parents, child, options, cpt);
    return cpt;
  }

  // Columns are independent; the first exception raised in the team is
  // rethrown once the loop finishes.
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto n = static_cast<std::int64_t>(columns);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t c = 0; c < n; ++c) {
    try {
      compute_column(bound, static_cast<std::size_t>(c), parents, child, options, cpt);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return cpt;
}

CpdExpr noisy_or(std::vector<std::string> causes, std::vector<double> activations, double leak) {
  if (causes.size() != activations.size())
    throw Error(ErrorCode::InvalidConfig, "noisy-or needs one activation per cause");
  const std::size_t combos = std::size_t{1} << causes.size();
  std::vector<std::vector<double>> rows;
  rows.reserve(combos);
  for (std::size_t r = 0; r < combos; ++r) {
    double off = 1.0 - leak;
    for (std::size_t k = 0; k < causes.size(); ++k) {
      const bool present = (r >> (causes.size() - 1 - k)) & 1u;
      if (present) off *= 1.0 - activations[k];
    }
    rows.push_back({off, 1.0 - off});
  }
  return cpd::table(std::move(causes), std::move(rows));
}

}  // namespace riskbn
