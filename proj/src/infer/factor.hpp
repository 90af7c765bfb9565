#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace riskbn::detail {

/// Table over a sorted list of variable indices, last variable fastest.
/// In log mode `values` hold natural logs (-inf for zero).
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> cards;
  std::vector<double> values;
  /// Linear mode: true values are values * exp(log_scale).
  double log_scale = 0.0;

  std::size_t size() const noexcept { return values.size(); }
  bool has(std::size_t v) const;
  std::size_t position(std::size_t v) const;
};

/// Builds a factor from values laid out over `vars` in the given (unsorted)
/// order, last fastest.
Factor make_factor(std::span<const std::size_t> vars, std::span<const std::size_t> cards,
                   std::span<const double> values);

Factor multiply(const Factor& a, const Factor& b, bool log_mode);
Factor sum_out(const Factor& f, std::size_t var, bool log_mode);
/// Sum over `var` of the product of `fs`, without materializing the product.
/// Every factor in `fs` must mention `var`.
Factor multiply_sum_out(const std::vector<const Factor*>& fs, std::size_t var, bool log_mode);
/// Fixes `var` to `state`, dropping it from the scope.
Factor restrict_to(const Factor& f, std::size_t var, std::size_t state);
/// Zeroes entries whose `var` state is masked out.
void apply_mask(Factor& f, std::size_t var, const std::vector<bool>& keep, bool log_mode);

void to_log(Factor& f);
/// Linear mode: divides by the max entry and folds it into log_scale.
void rescale(Factor& f);

}  // namespace riskbn::detail
