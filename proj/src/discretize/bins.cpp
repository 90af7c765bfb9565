#include "riskbn/bins.hpp"

#include <algorithm>
#include <cmath>

#include "riskbn/error.hpp"

namespace riskbn {

const char* scheme_name(BinScheme s) {
  switch (s) {
    case BinScheme::EqualWidth: return "equal-width";
    case BinScheme::LogSpaced: return "log-spaced";
    case BinScheme::Explicit: return "explicit";
    case BinScheme::Integer: return "integer";
  }
  return "?";
}

std::optional<BinScheme> scheme_from_name(const std::string& name) {
  for (auto s : {BinScheme::EqualWidth, BinScheme::LogSpaced, BinScheme::Explicit, BinScheme::Integer})
    if (name == scheme_name(s)) return s;
  return std::nullopt;
}

IntervalSet::IntervalSet(std::string node, std::vector<double> edges, BinScheme scheme)
    : node_(std::move(node)), edges_(std::move(edges)), scheme_(scheme) {
  if (edges_.size() < 3) throw Error(ErrorCode::BadCount, node_ + ": need at least 2 intervals");
  for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
    if (!(edges_[i] < edges_[i + 1]) || !std::isfinite(edges_[i + 1]))
      throw Error(ErrorCode::BadSupport, node_ + ": interval edges must be finite and strictly increasing");
  }
  if (integer()) {
    for (double e : edges_)
      if (e != std::floor(e)) throw Error(ErrorCode::BadSupport, node_ + ": integer bins need integer edges");
  }
}

double IntervalSet::representative(std::size_t i) const {
  const double lo = edges_[i];
  const double hi = edges_[i + 1];
  switch (scheme_) {
    case BinScheme::Integer: return 0.5 * (lo + hi - 1.0);
    case BinScheme::LogSpaced: return lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    default: return 0.5 * (lo + hi);
  }
}

std::vector<double> IntervalSet::representatives() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = representative(i);
  return out;
}

std::pair<double, double> IntervalSet::extent(std::size_t i) const {
  if (integer()) return {edges_[i] - 0.5, edges_[i + 1] - 0.5};
  return {edges_[i], edges_[i + 1]};
}

std::size_t IntervalSet::locate(double v) const {
  if (integer()) v = std::floor(v + 0.5);
  if (!(v >= edges_.front())) return 0;  // also catches NaN
  auto it = std::upper_bound(edges_.begin(), edges_.end(), v);
  auto idx = static_cast<std::size_t>(it - edges_.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, size() - 1);
}

IntervalSet make_bins(const std::string& node, double lo, double hi, int count, BinScheme scheme,
                      double log_floor) {
  if (count < 2) throw Error(ErrorCode::BadCount, node + ": bin count must be at least 2");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::BadSupport, node + ": support must be a finite non-empty interval");
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(count) + 1);
  if (scheme == BinScheme::LogSpaced) {
    if (lo < 0.0) throw Error(ErrorCode::BadSupport, node + ": log-spaced bins need lo >= 0");
    double start = lo;
    int geometric = count;
    if (lo == 0.0) {
      if (!(log_floor > 0.0 && log_floor < hi))
        throw Error(ErrorCode::BadSupport, node + ": log floor must lie inside the support");
      edges.push_back(0.0);
      start = log_floor;
      geometric = count - 1;
    }
    const double ratio = std::pow(hi / start, 1.0 / geometric);
    edges.push_back(start);
    for (int k = 1; k < geometric; ++k) edges.push_back(start * std::pow(ratio, k));
    edges.push_back(hi);
  } else if (scheme == BinScheme::EqualWidth || scheme == BinScheme::Explicit) {
    const double w = (hi - lo) / count;
    for (int k = 0; k < count; ++k) edges.push_back(lo + w * k);
    edges.push_back(hi);
    scheme = BinScheme::EqualWidth;
  } else {
    throw Error(ErrorCode::BadSupport, node + ": integer bins need make_count_bins");
  }
  return IntervalSet(node, std::move(edges), scheme);
}

IntervalSet make_count_bins(const std::string& node, std::int64_t n_max, int max_bins, int singletons) {
  if (n_max < 1) throw Error(ErrorCode::BadSupport, node + ": count support needs n_max >= 1");
  if (max_bins < 2) throw Error(ErrorCode::BadCount, node + ": bin count must be at least 2");
  const double end = static_cast<double>(n_max) + 1.0;
  std::vector<double> edges;
  if (n_max + 1 <= max_bins) {
    for (std::int64_t k = 0; k <= n_max + 1; ++k) edges.push_back(static_cast<double>(k));
    return IntervalSet(node, std::move(edges), BinScheme::Integer);
  }
  singletons = std::clamp(singletons, 1, max_bins - 1);
  for (int k = 0; k <= singletons; ++k) edges.push_back(k);
  const int remaining = max_bins - singletons;
  const double start = singletons;
  const double ratio = std::pow(end / start, 1.0 / remaining);
  for (int k = 1; k < remaining; ++k) {
    double e = std::round(start * std::pow(ratio, k));
    if (e > edges.back() && e < end) edges.push_back(e);
  }
  edges.push_back(end);
  return IntervalSet(node, std::move(edges), BinScheme::Integer);
}

IntervalSet make_range_bins(const std::string& node, std::int64_t n_max, std::int64_t lo, std::int64_t hi,
                            int pieces) {
  if (lo < 0 || hi < lo || hi > n_max) throw Error(ErrorCode::BadSupport, node + ": range outside [0, n_max]");
  if (pieces < 1) throw Error(ErrorCode::BadCount, node + ": need at least one piece");
  std::vector<double> edges;
  if (lo > 0) edges.push_back(0.0);
  const std::int64_t width = hi - lo + 1;
  const std::int64_t k = std::min<std::int64_t>(pieces, width);
  for (std::int64_t i = 0; i < k; ++i) {
    edges.push_back(static_cast<double>(lo + (width * i) / k));
  }
  edges.push_back(static_cast<double>(hi + 1));
  if (hi < n_max) edges.push_back(static_cast<double>(n_max + 1));
  if (edges.size() < 3) {
    // [0, n_max] is a single piece; split off the top integer so the set
    // still has two intervals.
    edges = {0.0, static_cast<double>(n_max), static_cast<double>(n_max + 1)};
  }
  return IntervalSet(node, std::move(edges), BinScheme::Integer);
}

Moments summarize(const IntervalSet& bins, std::span<const double> mass) {
  if (mass.size() != bins.size())
    throw Error(ErrorCode::UnnormalizedPosterior, bins.node() + ": mass vector does not match bins");
  double total = 0.0;
  for (double m : mass) {
    if (m < 0.0) throw Error(ErrorCode::UnnormalizedPosterior, bins.node() + ": negative mass");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw Error(ErrorCode::UnnormalizedPosterior, bins.node() + ": mass sums to " + std::to_string(total));

  Moments out;
  double second = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const double r = bins.representative(i);
    out.mean += mass[i] * r;
    second += mass[i] * r * r;
  }
  out.variance = std::max(0.0, second - out.mean * out.mean);

  auto percentile = [&](double q) {
    double cum = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      if (mass[i] > 0.0 && cum + mass[i] >= q * total) {
        const double frac = std::clamp((q * total - cum) / mass[i], 0.0, 1.0);
        if (bins.integer()) {
          // counts report whole numbers, spreading the bin's mass evenly
          const double lo = bins.lower(i), width = bins.upper(i) - lo;
          return lo + std::min(width - 1.0, std::floor(frac * width));
        }
        auto [lo, hi] = bins.extent(i);
        return lo + frac * (hi - lo);
      }
      cum += mass[i];
    }
    return bins.integer() ? bins.upper(mass.size() - 1) - 1.0 : bins.extent(mass.size() - 1).second;
  };
  out.p5 = percentile(0.05);
  out.p50 = percentile(0.50);
  out.p95 = percentile(0.95);
  return out;
}

}  // namespace riskbn
