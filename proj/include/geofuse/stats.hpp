#pragma once

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "geofuse/errors.hpp"

namespace geofuse {

// Hypothesis tests and summary statistics shared across the toolkit:
// one-sided Wilcoxon signed-rank, one-sided t-tests, Spearman correlation,
// Benjamini-Hochberg adjustment, SEM. All functions are pure and thread-safe.

enum class Alternative { greater, less };
enum class ZeroPolicy { drop, pratt };

enum class TestMethod {
    wilcoxon_exact,
    wilcoxon_normal,
    t_paired,
    t_independent,
    spearman_t,
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;  // in (0, 1]
    TestMethod method = TestMethod::wilcoxon_exact;
    std::size_t n_effective = 0;
};

inline std::string method_name(TestMethod m) {
    switch (m) {
        case TestMethod::wilcoxon_exact: return "wilcoxon_exact";
        case TestMethod::wilcoxon_normal: return "wilcoxon_normal";
        case TestMethod::t_paired: return "t_paired";
        case TestMethod::t_independent: return "t_independent";
        case TestMethod::spearman_t: return "spearman_t";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Basic summaries
// ---------------------------------------------------------------------------

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw input_error("mean: empty input");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (divisor n-1).
inline double sample_stdev(const std::vector<double>& v) {
    if (v.size() < 2) throw input_error("sample_stdev: need at least 2 values");
    const double m = mean(v);
    double ss = 0.0;
    for (const double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Standard error of the mean: sample stdev / sqrt(n).
inline double sem(const std::vector<double>& v) {
    if (v.size() < 2) throw input_error("sem: need at least 2 values");
    return sample_stdev(v) / std::sqrt(static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// Distribution helpers
// ---------------------------------------------------------------------------

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double student_t_cdf(double t, double df) {
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const boost::math::students_t dist(df);
    return boost::math::cdf(dist, t);
}

inline double clamp_p(double p) {
    if (p > 1.0) return 1.0;
    if (p < 1e-300) return 1e-300;  // p-values live in (0, 1]
    return p;
}

// Average ranks (1-based) of |values| ascending, with ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test (one-sided)
// ---------------------------------------------------------------------------

// Tests a vs b on paired differences a-b. Zero differences are dropped by
// default (classical convention) or kept for ranking under ZeroPolicy::pratt.
// Exact null distribution via dynamic programming over achievable rank sums
// when n_effective <= 25 and all ranks are untied integers; otherwise a normal
// approximation with continuity and tie corrections.
inline TestResult wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b,
                                     Alternative alternative,
                                     ZeroPolicy zeros = ZeroPolicy::drop) {
    if (a.size() != b.size()) throw input_error("wilcoxon: length mismatch");
    std::vector<double> diffs;
    std::size_t n_zero = 0;
    diffs.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) {
            ++n_zero;
            if (zeros == ZeroPolicy::pratt) diffs.push_back(0.0);
        } else {
            diffs.push_back(d);
        }
    }
    if (diffs.empty() || diffs.size() == n_zero * (zeros == ZeroPolicy::pratt ? 1 : 0))
        throw input_error("wilcoxon: all differences are zero");
    const std::size_t n_nonzero = diffs.size() - (zeros == ZeroPolicy::pratt ? n_zero : 0);
    if (n_nonzero == 0) throw input_error("wilcoxon: all differences are zero");
    if (n_nonzero < 5)
        throw input_error("wilcoxon: need at least 5 non-zero differences, got " +
                          std::to_string(n_nonzero));

    std::vector<double> abs_diffs(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) abs_diffs[i] = std::fabs(diffs[i]);
    const std::vector<double> ranks = detail::average_ranks(abs_diffs);

    // W+ = sum of ranks of positive differences (zeros contribute to ranking
    // only under pratt; they never contribute to the statistic).
    double w_plus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i)
        if (diffs[i] > 0.0) w_plus += ranks[i];

    bool has_ties = n_zero > 0 && zeros == ZeroPolicy::pratt;
    for (const double r : ranks)
        if (r != std::floor(r)) has_ties = true;
    {
        std::vector<double> sorted = abs_diffs;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
            if (sorted[i] == sorted[i + 1]) has_ties = true;
    }

    TestResult res;
    res.statistic = w_plus;
    res.n_effective = n_nonzero;

    const std::size_t n = diffs.size();
    if (!has_ties && n <= 25) {
        // Exact: count sign assignments by rank-sum total. counts[s] holds the
        // number of subsets of {1..n} with sum s; each of the 2^n equally
        // likely sign patterns selects one subset as its positive part.
        const std::size_t w_max = n * (n + 1) / 2;
        std::vector<double> counts(w_max + 1, 0.0);
        counts[0] = 1.0;
        for (std::size_t r = 1; r <= n; ++r)
            for (std::size_t s = w_max; s + 1 >= r + 1; --s)
                if (counts[s - r] > 0.0) counts[s] += counts[s - r];
        const double total = std::pow(2.0, static_cast<double>(n));
        const auto w_int = static_cast<std::size_t>(std::llround(w_plus));
        double tail = 0.0;
        if (alternative == Alternative::greater) {
            for (std::size_t s = w_int; s <= w_max; ++s) tail += counts[s];
        } else {
            for (std::size_t s = 0; s <= w_int; ++s) tail += counts[s];
        }
        res.p_value = detail::clamp_p(tail / total);
        res.method = TestMethod::wilcoxon_exact;
        return res;
    }

    // Normal approximation. Under pratt, zero ranks are removed from both the
    // mean and the variance of the null distribution.
    const auto nn = static_cast<double>(n);
    double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    if (zeros == ZeroPolicy::pratt && n_zero > 0) {
        const auto z = static_cast<double>(n_zero);
        mu -= z * (z + 1.0) / 4.0;
        var -= z * (z + 1.0) * (2.0 * z + 1.0) / 24.0;
    }
    // Tie correction: subtract sum(t^3 - t)/48 over tie groups of |diffs|.
    {
        std::vector<double> sorted = abs_diffs;
        if (zeros == ZeroPolicy::pratt)
            sorted.erase(std::remove(sorted.begin(), sorted.end(), 0.0), sorted.end());
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const auto t = static_cast<double>(j - i + 1);
            if (t > 1.0) var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
    }
    if (var <= 0.0) throw numeric_error("wilcoxon: null variance collapsed to zero");
    const double sd = std::sqrt(var);
    double p;
    if (alternative == Alternative::greater)
        p = 1.0 - detail::normal_cdf((w_plus - 0.5 - mu) / sd);
    else
        p = detail::normal_cdf((w_plus + 0.5 - mu) / sd);
    res.p_value = detail::clamp_p(p);
    res.method = TestMethod::wilcoxon_normal;
    return res;
}

// ---------------------------------------------------------------------------
// One-sided t-tests
// ---------------------------------------------------------------------------

// Paired (on differences, df = n-1) or independent (pooled variance,
// df = n1+n2-2). alternative=greater tests mean(a) > mean(b).
inline TestResult t_test_one_sided(const std::vector<double>& a, const std::vector<double>& b,
                                   bool paired, Alternative alternative) {
    TestResult res;
    double t, df;
    if (paired) {
        if (a.size() != b.size()) throw input_error("t-test: paired samples differ in length");
        if (a.size() < 2) throw input_error("t-test: need at least 2 pairs");
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        const double sd = sample_stdev(d);
        if (sd == 0.0) throw input_error("t-test: zero variance of paired differences");
        const auto n = static_cast<double>(d.size());
        t = mean(d) / (sd / std::sqrt(n));
        df = n - 1.0;
        res.method = TestMethod::t_paired;
        res.n_effective = d.size();
    } else {
        if (a.size() < 2 || b.size() < 2) throw input_error("t-test: need at least 2 per sample");
        const auto n1 = static_cast<double>(a.size());
        const auto n2 = static_cast<double>(b.size());
        const double s1 = sample_stdev(a);
        const double s2 = sample_stdev(b);
        if (s1 == 0.0 && s2 == 0.0) throw input_error("t-test: both samples have zero variance");
        const double sp2 = ((n1 - 1.0) * s1 * s1 + (n2 - 1.0) * s2 * s2) / (n1 + n2 - 2.0);
        t = (mean(a) - mean(b)) / std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
        df = n1 + n2 - 2.0;
        res.method = TestMethod::t_independent;
        res.n_effective = a.size() + b.size();
    }
    res.statistic = t;
    const double cdf = detail::student_t_cdf(t, df);
    res.p_value =
        detail::clamp_p(alternative == Alternative::greater ? 1.0 - cdf : cdf);
    return res;
}

// ---------------------------------------------------------------------------
// Spearman rank correlation
// ---------------------------------------------------------------------------

enum class SpearmanAlternative { two_sided, greater, less };

// Pearson correlation of average ranks; p via the t-approximation with n-2
// degrees of freedom. An exact permutation p-value (feasible for n <= 10)
// replaces the approximation when `exact` is set.
inline TestResult spearman(const std::vector<double>& a, const std::vector<double>& b,
                           SpearmanAlternative alternative = SpearmanAlternative::two_sided,
                           bool exact = false) {
    if (a.size() != b.size()) throw input_error("spearman: length mismatch");
    const std::size_t n = a.size();
    if (n < 4) throw input_error("spearman: need at least 4 pairs");

    const auto pearson_of_ranks = [n](const std::vector<double>& ra,
                                      const std::vector<double>& rb) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ma += ra[i];
            mb += rb[i];
        }
        ma /= static_cast<double>(n);
        mb /= static_cast<double>(n);
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sab += (ra[i] - ma) * (rb[i] - mb);
            saa += (ra[i] - ma) * (ra[i] - ma);
            sbb += (rb[i] - mb) * (rb[i] - mb);
        }
        if (saa == 0.0 || sbb == 0.0) throw input_error("spearman: constant input vector");
        return sab / std::sqrt(saa * sbb);
    };

    const std::vector<double> ra = detail::average_ranks(a);
    const std::vector<double> rb = detail::average_ranks(b);
    const double rho = pearson_of_ranks(ra, rb);

    TestResult res;
    res.statistic = rho;
    res.method = TestMethod::spearman_t;
    res.n_effective = n;

    if (exact && n <= 10) {
        // Enumerate all n! pairings of the b-ranks against fixed a-ranks.
        std::vector<double> perm = rb;
        std::sort(perm.begin(), perm.end());
        std::size_t count_ge = 0, count_le = 0, count_abs = 0, total = 0;
        const double tol = 1e-12;
        do {
            const double r = pearson_of_ranks(ra, perm);
            ++total;
            if (r >= rho - tol) ++count_ge;
            if (r <= rho + tol) ++count_le;
            if (std::fabs(r) >= std::fabs(rho) - tol) ++count_abs;
        } while (std::next_permutation(perm.begin(), perm.end()));
        double p;
        switch (alternative) {
            case SpearmanAlternative::greater: p = static_cast<double>(count_ge); break;
            case SpearmanAlternative::less: p = static_cast<double>(count_le); break;
            default: p = static_cast<double>(count_abs); break;
        }
        res.p_value = detail::clamp_p(p / static_cast<double>(total));
        return res;
    }

    const auto nn = static_cast<double>(n);
    const double denom = 1.0 - rho * rho;
    const double t = denom <= 0.0 ? (rho > 0 ? HUGE_VAL : -HUGE_VAL)
                                  : rho * std::sqrt((nn - 2.0) / denom);
    const double cdf = detail::student_t_cdf(t, nn - 2.0);
    double p;
    switch (alternative) {
        case SpearmanAlternative::greater: p = 1.0 - cdf; break;
        case SpearmanAlternative::less: p = cdf; break;
        default: p = 2.0 * std::min(cdf, 1.0 - cdf); break;
    }
    res.p_value = detail::clamp_p(p);
    return res;
}

// ---------------------------------------------------------------------------
// Benjamini-Hochberg step-up adjustment
// ---------------------------------------------------------------------------

struct BhResult {
    std::vector<double> adjusted;  // same order as input
    std::vector<bool> reject;      // adjusted <= fdr
};

inline BhResult benjamini_hochberg(const std::vector<double>& p_values, double fdr = 0.05) {
    if (p_values.empty()) throw input_error("benjamini_hochberg: empty p-value list");
    for (const double p : p_values)
        if (!(p > 0.0) || p > 1.0)
            throw input_error("benjamini_hochberg: p-values must lie in (0, 1]");
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return p_values[x] < p_values[y];
    });
    BhResult out;
    out.adjusted.resize(m);
    out.reject.resize(m);
    // adjusted p_(i) = min_{j >= i} (m * p_(j) / j), capped at 1.
    double running = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        const double candidate =
            static_cast<double>(m) * p_values[order[i]] / static_cast<double>(i + 1);
        running = std::min(running, candidate);
        out.adjusted[order[i]] = std::min(running, 1.0);
    }
    for (std::size_t i = 0; i < m; ++i) out.reject[i] = out.adjusted[i] <= fdr;
    return out;
}

// ---------------------------------------------------------------------------
// Significance stars on adjusted p-values
// ---------------------------------------------------------------------------

// Threshold mapping: * p < 0.05, ** p < 0.01, *** p < 0.001.
inline std::string stars(double p_adjusted) {
    if (p_adjusted < 0.001) return "***";
    if (p_adjusted < 0.01) return "**";
    if (p_adjusted < 0.05) return "*";
    return "";
}

}  // namespace geofuse
