#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace riskbn {

enum class BinScheme { EqualWidth, LogSpaced, Explicit, Integer };

const char* scheme_name(BinScheme s);
std::optional<BinScheme> scheme_from_name(const std::string& name);

/// Partition of a node's support. Real-valued sets are [e_i, e_{i+1}) with
/// the final interval closed. Integer sets cover the integers
/// e_i .. e_{i+1}-1, so the last edge is n_max + 1.
class IntervalSet {
 public:
  IntervalSet() = default;
  /// Throws Error(BadSupport) / Error(BadCount) on an invalid partition.
  IntervalSet(std::string node, std::vector<double> edges, BinScheme scheme);

  const std::string& node() const noexcept { return node_; }
  BinScheme scheme() const noexcept { return scheme_; }
  bool integer() const noexcept { return scheme_ == BinScheme::Integer; }
  std::size_t size() const noexcept { return edges_.size() - 1; }
  const std::vector<double>& edges() const noexcept { return edges_; }

  double lower(std::size_t i) const { return edges_[i]; }
  /// Exclusive upper edge for real sets; last integer + 1 for integer sets.
  double upper(std::size_t i) const { return edges_[i + 1]; }
  /// Integer sets: last integer contained in bin i.
  std::int64_t last_integer(std::size_t i) const { return static_cast<std::int64_t>(edges_[i + 1]) - 1; }

  /// Value standing in for the whole bin: arithmetic midpoint, geometric
  /// midpoint for log-spaced bins away from zero, integer-range midpoint for
  /// integer bins.
  double representative(std::size_t i) const;
  std::vector<double> representatives() const;

  /// Continuous extent used for percentile interpolation and sub-sampling;
  /// integer bins [a, b] extend to [a - 0.5, b + 0.5].
  std::pair<double, double> extent(std::size_t i) const;

  /// Bin containing v (values outside the support clamp to the end bins).
  std::size_t locate(double v) const;

  double support_lo() const { return edges_.front(); }
  double support_hi() const { return integer() ? edges_.back() - 1 : edges_.back(); }

 private:
  std::string node_;
  std::vector<double> edges_;
  BinScheme scheme_ = BinScheme::Explicit;
};

/// Real-valued partition of [lo, hi]. Log-spaced sets with lo == 0 get a
/// leading [0, log_floor) bin followed by count-1 geometric bins.
IntervalSet make_bins(const std::string& node, double lo, double hi, int count, BinScheme scheme,
                      double log_floor = 1e-6);

/// Integer partition of [0, n_max]: singleton bins while they fit, then
/// geometrically widening ranges, at most max_bins in total.
IntervalSet make_count_bins(const std::string& node, std::int64_t n_max, int max_bins = 200,
                            int singletons = 20);

/// Integer partition of [0, n_max] that isolates [lo, hi] and splits it into
/// up to `pieces` equal ranges. Used for counts with uniform or point priors.
IntervalSet make_range_bins(const std::string& node, std::int64_t n_max, std::int64_t lo,
                            std::int64_t hi, int pieces);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double p5 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

/// Throws Error(UnnormalizedPosterior) unless mass sums to 1 within 1e-6.
Moments summarize(const IntervalSet& bins, std::span<const double> mass);

}  // namespace riskbn
