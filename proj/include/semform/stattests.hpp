#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semform {

enum class TestMethod { Welch, Student, WilcoxonExact, WilcoxonNormal, Pearson };

std::string_view to_string(TestMethod m);

struct StatTestResult {
    double statistic = 0.0;
    /// Degrees of freedom; absent for Wilcoxon.
    std::optional<double> df;
    double p_value = 1.0;
    TestMethod method = TestMethod::Welch;
    /// Effective sample size (Wilcoxon: non-zero differences).
    std::size_t n = 0;
};

// Special functions. All throw DomainError outside their domain.

/// Error function, power series for |x| < 2.5 and a continued fraction for
/// erfc beyond.
double erf(double x);
double erfc(double x);
/// Standard normal CDF.
double normal_cdf(double z);
/// Regularized incomplete beta I_x(a, b), modified Lentz continued fraction.
double incomplete_beta(double a, double b, double x);
/// Student-t CDF with `df` > 0 degrees of freedom.
double t_cdf(double t, double df);
/// Two-sided tail probability P(|T| >= |t|).
double t_two_sided_p(double t, double df);

double mean(std::span<const double> xs);
/// Sample variance (n-1 denominator).
double sample_variance(std::span<const double> xs);

/// Welch's unequal-variance t-test, two-sided.
StatTestResult welch_t(std::span<const double> a, std::span<const double> b);
/// Student's pooled-variance t-test, two-sided.
StatTestResult student_t(std::span<const double> a, std::span<const double> b);

enum class WilcoxonMode { Auto, Exact, Normal };

/// Ranks of absolute differences with average ranks for ties, plus the
/// signed differences kept after dropping zeros.
struct SignedRanks {
    std::vector<double> differences;
    std::vector<double> ranks;
    bool has_ties = false;
};

SignedRanks signed_ranks(std::span<const double> a, std::span<const double> b);

/// Two-sided exact p for W+ over all 2^n sign patterns of integer ranks.
/// OpenMP-parallel over the pattern space.
double wilcoxon_exact_p(std::span<const double> ranks, double w_plus);

/// Normal approximation with tie and continuity correction.
double wilcoxon_normal_p(std::span<const double> ranks, double w_plus);

/// Paired signed-rank test, zero differences dropped. Auto uses the exact
/// enumeration when n <= 20 and |d| has no ties.
StatTestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMode mode = WilcoxonMode::Auto);

inline constexpr std::size_t kWilcoxonExactMaxN = 20;

/// Pearson correlation with the two-sided t-based p-value (df = n - 2).
StatTestResult pearson(std::span<const double> x, std::span<const double> y);

}  // namespace semform
