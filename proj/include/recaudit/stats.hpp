#pragma once
// Small statistics toolbox: moments, Student-t tail areas, paired and
// two-sample tests, rank statistics. Everything is deterministic and
// allocation-light; nothing here depends on the rest of the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace recaudit::stats {

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("mean: empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Unbiased sample variance (n-1 denominator).
inline double variance(const std::vector<double>& x) {
    if (x.size() < 2) throw std::invalid_argument("variance: need n >= 2");
    double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double stddev(const std::vector<double>& x) { return std::sqrt(variance(x)); }

// ---------------------------------------------------------------------------
// Regularized incomplete beta I_x(a, b), via Lentz's continued fraction.
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

inline double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Two-tailed tail area of Student's t with df degrees of freedom:
// P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
inline double student_t_two_tailed(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_two_tailed: df must be positive");
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

struct TestResult {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

// Paired two-tailed t-test on differences a[i] - b[i].
inline TestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: size mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_ttest: need n >= 2");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double md = mean(d);
    const double vd = variance(d);
    TestResult r;
    r.df = static_cast<double>(d.size() - 1);
    if (vd == 0.0) {
        if (md == 0.0) { r.statistic = 0.0; r.p_value = 1.0; }
        else {
            r.statistic = md > 0 ? std::numeric_limits<double>::infinity()
                                 : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.statistic = md / std::sqrt(vd / static_cast<double>(d.size()));
    r.p_value = student_t_two_tailed(r.statistic, r.df);
    return r;
}

// Two-sided Mann-Whitney U with normal approximation and tie correction.
inline TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t na = a.size(), nb = b.size();
    if (na < 2 || nb < 2) throw std::invalid_argument("mann_whitney_u: need n >= 2 per sample");
    struct Obs { double v; int grp; };
    std::vector<Obs> all;
    all.reserve(na + nb);
    for (double v : a) all.push_back({v, 0});
    for (double v : b) all.push_back({v, 1});
    std::sort(all.begin(), all.end(), [](const Obs& x, const Obs& y) { return x.v < y.v; });

    // Midranks plus tie-group bookkeeping for the variance correction.
    const std::size_t n = all.size();
    std::vector<double> rank(n);
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && all[j + 1].v == all[i].v) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[k] = mid;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double rank_sum_a = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (all[k].grp == 0) rank_sum_a += rank[k];

    const double u = rank_sum_a - 0.5 * static_cast<double>(na) * (na + 1.0);
    const double mu = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
    const double nn = static_cast<double>(n);
    double var = (static_cast<double>(na) * nb / 12.0) * (nn + 1.0 - tie_term / (nn * (nn - 1.0)));
    TestResult r;
    r.statistic = u;
    if (var <= 0.0) { r.p_value = 1.0; return r; }
    const double z = (u - mu) / std::sqrt(var);
    r.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(z)));
    r.p_value = std::min(1.0, r.p_value);
    return r;
}

// Average ranks (ties get midranks), 1-based.
inline std::vector<double> ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
        i = j + 1;
    }
    return r;
}

// Spearman rank correlation (Pearson on midranks).
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal samples with n >= 2");
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace recaudit::stats
