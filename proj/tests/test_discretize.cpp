#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "riskbn/bins.hpp"
#include "riskbn/cpt.hpp"
#include "riskbn/error.hpp"

using namespace riskbn;
using namespace riskbn::cpd;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Parse;
}

/// Single-column CPT of a parentless child.
std::vector<double> prior_column(const CpdExpr& e, const VariableDomain& child) {
  const auto cpt = expression_to_cpt(e, {}, {}, child);
  auto c = cpt.column(0);
  return {c.begin(), c.end()};
}

double mean_of(const IntervalSet& bins, const std::vector<double>& mass) { return summarize(bins, mass).mean; }

/// Beta density integrated by composite Simpson on a log-transformed grid.
double beta_mass(double a, double b, double lo, double hi) {
  const double lnB = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto pdf = [&](double x) { return x <= 0.0 || x >= 1.0 ? 0.0 : std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - lnB); };
  const int n = 2000;
  const double h = (hi - lo) / n;
  double s = pdf(lo) + pdf(hi);
  for (int i = 1; i < n; ++i) s += pdf(lo + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3.0;
}

double binom_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                  (n - k) * std::log1p(-p));
}

void expect_columns_normalized(const Cpt& cpt) {
  for (std::size_t c = 0; c < cpt.columns(); ++c) {
    double s = 0.0;
    for (double x : cpt.column(c)) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-9) << "column " << c;
  }
}

}  // namespace

TEST(Bins, EqualWidthQuarters) {
  const auto b = make_bins("x", 0, 1, 4, BinScheme::EqualWidth);
  EXPECT_EQ(b.edges(), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_EQ(b.locate(1.0), 3u);
  EXPECT_EQ(b.locate(0.25), 1u);
}

TEST(Bins, LogSpacedHasFloorBinAndConstantRatio) {
  const auto b = make_bins("p", 0, 1, 50, BinScheme::LogSpaced, 1e-6);
  ASSERT_EQ(b.size(), 50u);
  EXPECT_EQ(b.lower(0), 0.0);
  EXPECT_DOUBLE_EQ(b.upper(0), 1e-6);
  const double r = b.upper(1) / b.upper(0);
  for (std::size_t i = 1; i + 1 < b.size(); ++i) EXPECT_NEAR(b.upper(i + 1) / b.upper(i), r, 1e-9 * r);
  EXPECT_DOUBLE_EQ(b.upper(b.size() - 1), 1.0);
}

TEST(Bins, BadCountAndSupport) {
  EXPECT_EQ(code_of([] { make_bins("x", 0, 1, 1, BinScheme::EqualWidth); }), ErrorCode::BadCount);
  EXPECT_EQ(code_of([] { make_bins("x", 1, 0, 4, BinScheme::EqualWidth); }), ErrorCode::BadSupport);
  EXPECT_EQ(code_of([] { make_bins("x", -1, 1, 4, BinScheme::LogSpaced); }), ErrorCode::BadSupport);
}

TEST(Bins, CountBinsPartitionSupport) {
  const auto b = make_count_bins("n", 519000, 200, 20);
  EXPECT_LE(b.size(), 200u);
  EXPECT_EQ(b.lower(0), 0.0);
  EXPECT_EQ(b.support_hi(), 519000.0);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(b.last_integer(i), static_cast<std::int64_t>(i));
  for (std::size_t i = 0; i + 1 < b.size(); ++i) EXPECT_EQ(b.upper(i), b.lower(i + 1));
}

TEST(Bins, RangeBinsIsolateTheRange) {
  const auto b = make_range_bins("n", 200000, 50000, 100000, 10);
  bool starts = false, ends = false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    starts |= b.lower(i) == 50000;
    ends |= b.last_integer(i) == 100000;
  }
  EXPECT_TRUE(starts && ends);
}

TEST(Summarize, MassInOneBin) {
  const IntervalSet s("x", {0, 0.4, 0.6, 1.0}, BinScheme::Explicit);
  const auto m = summarize(s, std::vector<double>{0, 1, 0});
  EXPECT_DOUBLE_EQ(m.mean, 0.5);
  EXPECT_LE(m.variance, 0.2 * 0.2 / 12 + 1e-15);
}

TEST(Summarize, UniformMassIsSymmetric) {
  const auto b = make_bins("x", 0, 1, 50, BinScheme::EqualWidth);
  const auto m = summarize(b, std::vector<double>(50, 1.0 / 50));
  EXPECT_NEAR(m.mean, 0.5, 1e-3);
  EXPECT_LE(m.p5, m.p50);
  EXPECT_LE(m.p50, m.p95);
  EXPECT_NEAR(m.p50, 0.5, 1e-12);
}

TEST(Summarize, Unnormalized) {
  const auto b = make_bins("x", 0, 1, 2, BinScheme::EqualWidth);
  EXPECT_EQ(code_of([&] { summarize(b, std::vector<double>{0.5, 0.4}); }), ErrorCode::UnnormalizedPosterior);
}

TEST(Summarize, CountPercentilesAreWholeNumbers) {
  const auto b = make_count_bins("n", 10, 200, 20);
  std::vector<double> mass(b.size(), 0.0);
  mass[0] = 0.9;
  mass[3] = 0.1;
  const auto m = summarize(b, mass);
  EXPECT_EQ(m.p5, 0.0);
  EXPECT_EQ(m.p95, 3.0);
}

TEST(Cpt, UniformOnQuarters) {
  const auto child = binned_domain("x", Continuous{0, 1}, make_bins("x", 0, 1, 4, BinScheme::EqualWidth));
  const auto col = prior_column(uniform(lit(0), lit(1)), child);
  for (double x : col) EXPECT_NEAR(x, 0.25, 1e-12);
}

TEST(Cpt, BetaMassMatchesNumericIntegration) {
  const auto bins = make_bins("p", 0, 1, 100, BinScheme::LogSpaced);
  const auto child = binned_domain("p", Continuous{0, 1}, bins);
  const auto col = prior_column(beta(lit(2), lit(2001)), child);
  for (std::size_t i = 0; i < bins.size(); ++i)
    EXPECT_NEAR(col[i], beta_mass(2, 2001, bins.lower(i), bins.upper(i)), 1e-7) << "bin " << i;
  // discretized mean within 2% of 2/2003
  EXPECT_NEAR(mean_of(bins, col), 2.0 / 2003.0, 0.02 * 2.0 / 2003.0);
}

TEST(Cpt, BinomialPmfSymmetric) {
  const auto child = binned_domain("k", Count{10}, make_count_bins("k", 10));
  const auto col = prior_column(binomial(lit(10), lit(0.5)), child);
  ASSERT_EQ(col.size(), 11u);
  for (int k = 0; k <= 10; ++k) {
    EXPECT_NEAR(col[k], binom_pmf(10, k, 0.5), 1e-12);
    EXPECT_NEAR(col[k], col[10 - k], 1e-15);
  }
  EXPECT_EQ(std::max_element(col.begin(), col.end()) - col.begin(), 5);
}

TEST(Cpt, BinomialRangeMassByCdfDifferences) {
  const auto bins = make_count_bins("k", 5000, 60, 20);
  const auto child = binned_domain("k", Count{5000}, bins);
  const auto col = prior_column(binomial(lit(5000), lit(0.01)), child);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    double expect = 0.0;
    for (auto k = static_cast<int>(bins.lower(i)); k <= bins.last_integer(i); ++k) expect += binom_pmf(5000, k, 0.01);
    EXPECT_NEAR(col[i], expect, 1e-10) << "bin " << i;
  }
  EXPECT_NEAR(mean_of(bins, col), 50.0, 1.0);
}

TEST(Cpt, BinomialExceedingChildSupport) {
  const auto child = binned_domain("k", Count{10}, make_count_bins("k", 10));
  EXPECT_EQ(code_of([&] { prior_column(binomial(lit(20), lit(0.5)), child); }), ErrorCode::UnsupportedCombination);
}

TEST(Cpt, TNormalMatchesErfDifferences) {
  const auto bins = make_bins("x", 0, 1, 20, BinScheme::EqualWidth);
  const auto child = binned_domain("x", Continuous{0, 1}, bins);
  const double mu = 0.3, var = 0.02, sd = std::sqrt(var);
  const auto col = prior_column(tnormal(lit(mu), lit(var)), child);
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0))); };
  const double z = cdf(1) - cdf(0);
  for (std::size_t i = 0; i < bins.size(); ++i)
    EXPECT_NEAR(col[i], (cdf(bins.upper(i)) - cdf(bins.lower(i))) / z, 1e-12);
}

TEST(Cpt, RankedChildFromTNormal) {
  const auto child = discrete_domain("r", Ranked{{"lo", "mid", "hi"}});
  const auto col = prior_column(tnormal(lit(0.5), lit(0.001)), child);
  EXPECT_GT(col[1], 0.99);
  EXPECT_NEAR(col[0], col[2], 1e-12);
}

TEST(Cpt, DeterministicPlacesMassInContainingBin) {
  const auto pbins = make_bins("x", 0, 1, 4, BinScheme::EqualWidth);
  const auto parent = binned_domain("x", Continuous{0, 1}, pbins);
  const auto child = binned_domain("y", Continuous{0, 2}, make_bins("y", 0, 2, 8, BinScheme::EqualWidth));
  const VariableDomain* parents[] = {&parent};
  const std::string ids[] = {"x"};
  const auto cpt = expression_to_cpt(deterministic(ref("x") * lit(2)), parents, ids, child);
  expect_columns_normalized(cpt);
  // parent bin [0.25,0.5) doubles to [0.5,1): child bins 2 and 3 equally
  const auto c = cpt.column(1);
  EXPECT_NEAR(c[2], 0.5, 1e-12);
  EXPECT_NEAR(c[3], 0.5, 1e-12);
}

TEST(Cpt, NoisyOrTruthTable) {
  const auto cpd = noisy_or({"a", "b"}, {0.6, 0.5}, 0.02);
  const auto dom = discrete_domain("a", Boolean{});
  const auto domb = discrete_domain("b", Boolean{});
  const auto child = discrete_domain("c", Boolean{});
  const VariableDomain* parents[] = {&dom, &domb};
  const std::string ids[] = {"a", "b"};
  const auto cpt = expression_to_cpt(cpd, parents, ids, child);
  auto p_true = [&](int a, int b) { return cpt.column(a * 2 + b)[1]; };
  EXPECT_NEAR(p_true(0, 0), 0.02, 1e-12);
  EXPECT_NEAR(p_true(1, 0), 1 - 0.98 * 0.4, 1e-12);
  EXPECT_NEAR(p_true(0, 1), 1 - 0.98 * 0.5, 1e-12);
  EXPECT_NEAR(p_true(1, 1), 1 - 0.98 * 0.4 * 0.5, 1e-12);
}

TEST(Cpt, SerialAndParallelAgree) {
  const auto pb = make_bins("p", 0, 1, 60, BinScheme::LogSpaced);
  const auto p = binned_domain("p", Continuous{0, 1}, pb);
  const auto n = binned_domain("n", Count{3000}, make_count_bins("n", 3000, 80));
  const auto child = binned_domain("k", Count{3000}, make_count_bins("k", 3000, 80));
  const VariableDomain* parents[] = {&n, &p};
  const std::string ids[] = {"n", "p"};
  CptOptions serial{ExecPolicy::Serial}, parallel{ExecPolicy::Parallel};
  const auto a = expression_to_cpt(binomial(ref("n"), ref("p")), parents, ids, child, serial);
  const auto b = expression_to_cpt(binomial(ref("n"), ref("p")), parents, ids, child, parallel);
  EXPECT_EQ(a.values, b.values);
  expect_columns_normalized(a);
}

// Every column of random Beta / TNormal CPTs is a probability vector.
TEST(CptProperty, ColumnsAreDistributions) {
  const auto ab = make_bins("a", 0.5, 20, 12, BinScheme::EqualWidth);
  const auto a = binned_domain("a", Continuous{0.5, 20}, ab);
  const auto child = binned_domain("p", Continuous{0, 1}, make_bins("p", 0, 1, 40, BinScheme::LogSpaced));
  const VariableDomain* parents[] = {&a};
  const std::string ids[] = {"a"};
  expect_columns_normalized(expression_to_cpt(beta(ref("a"), lit(3)), parents, ids, child));
  expect_columns_normalized(expression_to_cpt(tnormal(ref("a") / lit(20), lit(0.01)), parents, ids, child));
  expect_columns_normalized(expression_to_cpt(uniform(lit(0), ref("a") / lit(20)), parents, ids, child));
}

// Doubling the child bins moves the implied Beta mean by amounts that
// shrink toward zero.
TEST(CptProperty, RefinementConvergence) {
  const double exact = 2.0 / 2003.0;
  std::vector<double> err;
  for (int bins : {25, 50, 100, 200}) {
    const auto b = make_bins("p", 0, 1, bins, BinScheme::LogSpaced);
    const auto col = prior_column(beta(lit(2), lit(2001)), binned_domain("p", Continuous{0, 1}, b));
    err.push_back(std::abs(mean_of(b, col) - exact));
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], err[i - 1]);
}

TEST(CptProperty, ClosedFormMeansAt100Bins) {
  const auto ub = make_bins("u", 0, 10, 100, BinScheme::EqualWidth);
  EXPECT_NEAR(mean_of(ub, prior_column(uniform(lit(2), lit(7)), binned_domain("u", Continuous{0, 10}, ub))), 4.5,
              0.02 * 4.5);
  const auto kb = make_count_bins("k", 400, 100, 20);
  EXPECT_NEAR(mean_of(kb, prior_column(binomial(lit(400), lit(0.3)), binned_domain("k", Count{400}, kb))), 120,
              0.02 * 120);
  const auto pb = make_bins("p", 0, 1, 100, BinScheme::LogSpaced);
  EXPECT_NEAR(mean_of(pb, prior_column(beta(lit(3), lit(40)), binned_domain("p", Continuous{0, 1}, pb))), 3.0 / 43,
              0.02 * 3.0 / 43);
}
