#include "factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace riskbn::detail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& cards) {
  std::vector<std::size_t> s(cards.size(), 1);
  for (std::size_t i = cards.size(); i-- > 1;) s[i - 1] = s[i] * cards[i];
  return s;
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace

bool Factor::has(std::size_t v) const { return std::binary_search(vars.begin(), vars.end(), v); }

std::size_t Factor::position(std::size_t v) const {
  return static_cast<std::size_t>(std::lower_bound(vars.begin(), vars.end(), v) - vars.begin());
}

Factor make_factor(std::span<const std::size_t> vars, std::span<const std::size_t> cards,
                   std::span<const double> values) {
  std::vector<std::size_t> perm(vars.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](auto a, auto b) { return vars[a] < vars[b]; });

  Factor f;
  for (auto p : perm) {
    f.vars.push_back(vars[p]);
    f.cards.push_back(cards[p]);
  }
  f.values.resize(values.size());
  std::vector<std::size_t> in_cards(cards.begin(), cards.end());
  const auto in_strides = strides_of(in_cards);
  // walk the sorted layout, tracking the offset into the input layout
  std::vector<std::size_t> counter(perm.size(), 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.values[i] = values[src];
    for (std::size_t k = perm.size(); k-- > 0;) {
      const auto in = perm[k];
      if (++counter[k] < f.cards[k]) {
        src += in_strides[in];
        break;
      }
      src -= in_strides[in] * (f.cards[k] - 1);
      counter[k] = 0;
    }
  }
  return f;
}

Factor multiply(const Factor& a, const Factor& b, bool log_mode) {
  Factor out;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(out.vars));
  const std::size_t n = out.vars.size();
  out.cards.resize(n);
  std::vector<std::size_t> sa(n, 0), sb(n, 0);
  const auto a_strides = strides_of(a.cards);
  const auto b_strides = strides_of(b.cards);
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) {
    const auto v = out.vars[k];
    if (a.has(v)) {
      const auto p = a.position(v);
      out.cards[k] = a.cards[p];
      sa[k] = a_strides[p];
    }
    if (b.has(v)) {
      const auto p = b.position(v);
      out.cards[k] = b.cards[p];
      sb[k] = b_strides[p];
    }
    total *= out.cards[k];
  }
  out.values.resize(total);
  out.log_scale = a.log_scale + b.log_scale;

  std::vector<std::size_t> counter(n, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    out.values[i] = log_mode ? a.values[ia] + b.values[ib] : a.values[ia] * b.values[ib];
    for (std::size_t k = n; k-- > 0;) {
      if (++counter[k] < out.cards[k]) {
        ia += sa[k];
        ib += sb[k];
        break;
      }
      ia -= sa[k] * (out.cards[k] - 1);
      ib -= sb[k] * (out.cards[k] - 1);
      counter[k] = 0;
    }
  }
  return out;
}

Factor sum_out(const Factor& f, std::size_t var, bool log_mode) {
  const auto p = f.position(var);
  const std::size_t card = f.cards[p];
  std::size_t inner = 1;
  for (std::size_t k = p + 1; k < f.cards.size(); ++k) inner *= f.cards[k];
  const std::size_t outer = f.values.size() / (card * inner);

  Factor out;
  out.vars = f.vars;
  out.cards = f.cards;
  out.vars.erase(out.vars.begin() + static_cast<std::ptrdiff_t>(p));
  out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(p));
  out.log_scale = f.log_scale;
  out.values.assign(outer * inner, log_mode ? kNegInf : 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < card; ++c) {
      const double* src = f.values.data() + (o * card + c) * inner;
      double* dst = out.values.data() + o * inner;
      if (log_mode) {
        for (std::size_t i = 0; i < inner; ++i) dst[i] = log_add(dst[i], src[i]);
      } else {
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  }
  return out;
}

Factor multiply_sum_out(const std::vector<const Factor*>& fs, std::size_t var, bool log_mode) {
  Factor out;
  std::size_t card = 0;
  for (const auto* f : fs) {
    for (std::size_t k = 0; k < f->vars.size(); ++k) {
      if (f->vars[k] == var) {
        card = f->cards[k];
        continue;
      }
      const auto at = std::lower_bound(out.vars.begin(), out.vars.end(), f->vars[k]);
      if (at != out.vars.end() && *at == f->vars[k]) continue;
      out.cards.insert(out.cards.begin() + (at - out.vars.begin()), f->cards[k]);
      out.vars.insert(at, f->vars[k]);
    }
    out.log_scale += f->log_scale;
  }
  const std::size_t n = out.vars.size(), m = fs.size();
  // stride of every output variable, and of `var`, inside each factor
  std::vector<std::vector<std::size_t>> stride(m, std::vector<std::size_t>(n, 0));
  std::vector<std::size_t> var_stride(m, 0);
  for (std::size_t j = 0; j < m; ++j) {
    const auto s = strides_of(fs[j]->cards);
    for (std::size_t k = 0; k < fs[j]->vars.size(); ++k) {
      const auto v = fs[j]->vars[k];
      if (v == var) {
        var_stride[j] = s[k];
      } else {
        stride[j][static_cast<std::size_t>(std::lower_bound(out.vars.begin(), out.vars.end(), v) - out.vars.begin())] = s[k];
      }
    }
  }
  std::size_t total = 1;
  for (auto c : out.cards) total *= c;
  out.values.resize(total);

  std::vector<std::size_t> counter(n, 0), off(m, 0);
  std::vector<double> terms(card);
  for (std::size_t i = 0; i < total; ++i) {
    if (log_mode) {
      double mx = kNegInf;
      for (std::size_t c = 0; c < card; ++c) {
        double t = 0.0;
        for (std::size_t j = 0; j < m && t != kNegInf; ++j) t += fs[j]->values[off[j] + c * var_stride[j]];
        terms[c] = t;
        mx = std::max(mx, t);
      }
      double acc = 0.0;
      if (mx != kNegInf)
        for (double t : terms) acc += std::exp(t - mx);
      out.values[i] = mx == kNegInf ? kNegInf : mx + std::log(acc);
    } else {
      double acc = 0.0;
      for (std::size_t c = 0; c < card; ++c) {
        double t = fs[0]->values[off[0] + c * var_stride[0]];
        for (std::size_t j = 1; j < m && t != 0.0; ++j) t *= fs[j]->values[off[j] + c * var_stride[j]];
        acc += t;
      }
      out.values[i] = acc;
    }
    for (std::size_t k = n; k-- > 0;) {
      if (++counter[k] < out.cards[k]) {
        for (std::size_t j = 0; j < m; ++j) off[j] += stride[j][k];
        break;
      }
      for (std::size_t j = 0; j < m; ++j) off[j] -= stride[j][k] * (out.cards[k] - 1);
      counter[k] = 0;
    }
  }
  return out;
}

Factor restrict_to(const Factor& f, std::size_t var, std::size_t state) {
  const auto p = f.position(var);
  const std::size_t card = f.cards[p];
  std::size_t inner = 1;
  for (std::size_t k = p + 1; k < f.cards.size(); ++k) inner *= f.cards[k];
  const std::size_t outer = f.values.size() / (card * inner);

  Factor out;
  out.vars = f.vars;
  out.cards = f.cards;
  out.vars.erase(out.vars.begin() + static_cast<std::ptrdiff_t>(p));
  out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(p));
  out.log_scale = f.log_scale;
  out.values.resize(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(f.values.data() + (o * card + state) * inner, inner, out.values.data() + o * inner);
  }
  return out;
}

void apply_mask(Factor& f, std::size_t var, const std::vector<bool>& keep, bool log_mode) {
  const auto p = f.position(var);
  const std::size_t card = f.cards[p];
  std::size_t inner = 1;
  for (std::size_t k = p + 1; k < f.cards.size(); ++k) inner *= f.cards[k];
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!keep[(i / inner) % card]) f.values[i] = log_mode ? kNegInf : 0.0;
  }
}

void to_log(Factor& f) {
  for (double& v : f.values) v = v > 0.0 ? std::log(v) : kNegInf;
  for (double& v : f.values) v += f.log_scale;
  f.log_scale = 0.0;
}

void rescale(Factor& f) {
  const double mx = f.values.empty() ? 0.0 : *std::max_element(f.values.begin(), f.values.end());
  if (!(mx > 0.0) || !std::isfinite(mx)) return;
  for (double& v : f.values) v /= mx;
  f.log_scale += std::log(mx);
}

}  // namespace riskbn::detail
