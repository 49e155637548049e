#include "semform/stattests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "semform/error.hpp"

namespace semform {

std::string_view to_string(TestMethod m) {
    switch (m) {
        case TestMethod::Welch: return "welch";
        case TestMethod::Student: return "student";
        case TestMethod::WilcoxonExact: return "wilcoxon_exact";
        case TestMethod::WilcoxonNormal: return "wilcoxon_normal";
        case TestMethod::Pearson: return "pearson";
    }
    return "unknown";
}

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;
constexpr double kTiny = 1e-300;

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

// 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (2n+1)!!  -- every term
// positive, so no cancellation.
double erf_series(double x) {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x2) * sum;
}

// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x > 0.
double erfc_continued_fraction(double x) {
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < kMaxIter; ++n) {
        const double a = n / 2.0;
        d = x + a * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = x + a / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(-x * x) / (std::sqrt(std::numbers::pi) * f);
}

constexpr double kErfSplit = 2.5;

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw DomainError(fmt::format("incomplete_beta: no convergence for a={}, b={}, x={}", a, b, x));
}

}  // namespace

double erf(double x) {
    if (std::isnan(x)) throw DomainError("erf: NaN argument");
    if (x < 0) return -erf(-x);
    if (x < kErfSplit) return erf_series(x);
    return 1.0 - erfc_continued_fraction(x);
}

double erfc(double x) {
    if (std::isnan(x)) throw DomainError("erfc: NaN argument");
    if (x < 0) return 2.0 - erfc(-x);
    if (x < kErfSplit) return 1.0 - erf_series(x);
    return erfc_continued_fraction(x);
}

double normal_cdf(double z) { return 0.5 * erfc(-z / std::numbers::sqrt2); }

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0) || !std::isfinite(a) || !std::isfinite(b))
        throw DomainError(fmt::format("incomplete_beta: shape parameters must be positive (a={}, b={})", a, b));
    if (!(x >= 0.0 && x <= 1.0))
        throw DomainError(fmt::format("incomplete_beta: x={} outside [0, 1]", x));
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return clamp_probability(front * beta_continued_fraction(a, b, x) / a);
    return clamp_probability(1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b);
}

double t_two_sided_p(double t, double df) {
    if (!(df > 0) || std::isnan(df)) throw DomainError(fmt::format("t distribution: df={} must be > 0", df));
    if (std::isnan(t)) throw DomainError("t distribution: NaN statistic");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

double t_cdf(double t, double df) {
    if (!(df > 0) || std::isnan(df)) throw DomainError(fmt::format("t_cdf: df={} must be > 0", df));
    if (std::isnan(t)) throw DomainError("t_cdf: NaN statistic");
    if (t == 0.0) return 0.5;
    const double tail = 0.5 * t_two_sided_p(t, df);
    return t > 0 ? 1.0 - tail : tail;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean of empty sample");
    // Keeps constant samples exact so their variance is exactly zero.
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return xs.front();
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw DomainError("sample variance needs at least two values");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

StatTestResult welch_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw DomainError(fmt::format("welch_t: each sample needs >= 2 values (got {} and {})", a.size(), b.size()));
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a) / na;
    const double vb = sample_variance(b) / nb;
    if (va == 0.0 && vb == 0.0) throw DomainError("welch_t: both samples have zero variance");
    const double se2 = va + vb;
    const double t = (mean(a) - mean(b)) / std::sqrt(se2);
    const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    return {t, df, t_two_sided_p(t, df), TestMethod::Welch, a.size() + b.size()};
}

StatTestResult student_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DomainError("student_t: each sample needs >= 2 values");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / df;
    if (pooled == 0.0) throw DomainError("student_t: zero pooled variance");
    const double t = (mean(a) - mean(b)) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    return {t, df, t_two_sided_p(t, df), TestMethod::Student, a.size() + b.size()};
}

SignedRanks signed_ranks(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DomainError(fmt::format("paired samples differ in length ({} vs {})", a.size(), b.size()));
    SignedRanks out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) out.differences.push_back(d);
    }
    const std::size_t n = out.differences.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return std::abs(out.differences[i]) < std::abs(out.differences[j]);
    });
    out.ranks.assign(n, 0.0);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        const double v = std::abs(out.differences[order[i]]);
        while (j < n && std::abs(out.differences[order[j]]) == v) ++j;
        if (j - i > 1) out.has_ties = true;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) out.ranks[order[k]] = avg;
        i = j;
    }
    return out;
}

double wilcoxon_exact_p(std::span<const double> ranks, double w_plus) {
    const std::size_t n = ranks.size();
    if (n == 0) throw DomainError("wilcoxon_exact_p: no ranks");
    if (n > 62) throw DomainError("wilcoxon_exact_p: too many ranks for enumeration");
    // Doubled ranks are integers even with average (half) ranks.
    std::vector<std::int64_t> twice(n);
    for (std::size_t i = 0; i < n; ++i) twice[i] = std::llround(2.0 * ranks[i]);
    const std::int64_t target = std::llround(2.0 * w_plus);
    const std::int64_t patterns = std::int64_t{1} << n;
    std::int64_t le = 0;
    std::int64_t ge = 0;
#pragma omp parallel for reduction(+ : le, ge) schedule(static)
    for (std::int64_t mask = 0; mask < patterns; ++mask) {
        std::int64_t s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::int64_t{1} << i)) s += twice[i];
        le += (s <= target);
        ge += (s >= target);
    }
    const double total = static_cast<double>(patterns);
    return clamp_probability(2.0 * static_cast<double>(std::min(le, ge)) / total);
}

double wilcoxon_normal_p(std::span<const double> ranks, double w_plus) {
    const double n = static_cast<double>(ranks.size());
    if (ranks.empty()) throw DomainError("wilcoxon_normal_p: no ranks");
    const double expected = n * (n + 1.0) / 4.0;
    double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    std::vector<double> sorted(ranks.begin(), ranks.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        variance -= (t * t * t - t) / 48.0;
        i = j;
    }
    if (!(variance > 0)) throw DomainError("wilcoxon_normal_p: zero variance");
    const double z = std::max(0.0, std::abs(w_plus - expected) - 0.5) / std::sqrt(variance);
    return clamp_probability(erfc(z / std::numbers::sqrt2));
}

StatTestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMode mode) {
    const SignedRanks sr = signed_ranks(a, b);
    const std::size_t n = sr.ranks.size();
    if (n == 0) throw DomainError("wilcoxon_signed_rank: all paired differences are zero");
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (sr.differences[i] > 0) w_plus += sr.ranks[i];

    bool exact = false;
    switch (mode) {
        case WilcoxonMode::Auto: exact = n <= kWilcoxonExactMaxN && !sr.has_ties; break;
        case WilcoxonMode::Exact: exact = true; break;
        case WilcoxonMode::Normal: exact = false; break;
    }
    if (exact) return {w_plus, std::nullopt, wilcoxon_exact_p(sr.ranks, w_plus), TestMethod::WilcoxonExact, n};
    return {w_plus, std::nullopt, wilcoxon_normal_p(sr.ranks, w_plus), TestMethod::WilcoxonNormal, n};
}

StatTestResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DomainError(fmt::format("pearson: lengths differ ({} vs {})", x.size(), y.size()));
    if (x.size() < 3) throw DomainError("pearson: need at least 3 pairs");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant input");
    const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(x.size()) - 2.0;
    double p = 0.0;
    if (std::abs(r) < 1.0) {
        const double t = r * std::sqrt(df / (1.0 - r * r));
        p = t_two_sided_p(t, df);
    }
    return {r, df, p, TestMethod::Pearson, x.size()};
}

}  // namespace semform
