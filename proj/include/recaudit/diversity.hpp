#pragma once
// Content-level diversity and group-comparison measures: entropies over
// category/issue distributions, cosine similarity of issue vectors,
// Jaccard overlap of video-id sets, within/between-group pairwise
// similarity summaries, and Welch t-test group comparisons.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "recaudit/datamodel.hpp"
#include "recaudit/stats.hpp"

namespace recaudit {

// Entries this small are treated as exact zeros (0 log 0 = 0 convention).
inline constexpr double kEntropyFloor = 1e-15;

// Shannon entropy in bits. Input is normalized internally; it must be
// nonnegative with a positive sum.
inline double shannon_entropy(const std::vector<double>& distribution) {
    double total = 0.0;
    for (double p : distribution) {
        if (p < 0.0) throw std::invalid_argument("shannon_entropy: negative entry");
        total += p;
    }
    if (total <= 0.0) throw std::invalid_argument("shannon_entropy: all-zero distribution");
    double h = 0.0;
    for (double p : distribution) {
        const double q = p / total;
        if (q > kEntropyFloor) h -= q * std::log2(q);
    }
    return h;
}

inline double structural_entropy(const std::array<double, 3>& three_class) {
    return shannon_entropy({three_class[0], three_class[1], three_class[2]});
}

inline double cosine_similarity_raw(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0)
        throw std::invalid_argument("cosine_similarity: undefined for zero vector");
    return dot / (std::sqrt(nx) * std::sqrt(ny));
}

inline double cosine_similarity(const IssueVector& x, const IssueVector& y) {
    return cosine_similarity_raw(std::vector<double>(x.weights.begin(), x.weights.end()),
                                 std::vector<double>(y.weights.begin(), y.weights.end()));
}

struct JaccardResult {
    double value = 0.0;
    bool both_empty = false;  // 0 returned by convention; flag it
};

inline JaccardResult jaccard_checked(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return {0.0, true};
    std::size_t intersection = 0;
    for (const auto& v : a) intersection += b.count(v);
    const std::size_t unite = a.size() + b.size() - intersection;
    return {static_cast<double>(intersection) / static_cast<double>(unite), false};
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    return jaccard_checked(a, b).value;
}

// ---------------------------------------------------------------------------
// Group comparisons
// ---------------------------------------------------------------------------

// One two-sample comparison row; group A is male, group B is female in all
// tables this library emits.
struct GroupComparison {
    std::string metric_name;
    double mean_a = 0.0, sd_a = 0.0;
    double mean_b = 0.0, sd_b = 0.0;
    std::size_t n_a = 0, n_b = 0;
    double t_stat = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    bool two_tailed = true;
};

// Welch's unequal-variance t-test, two-tailed.
inline GroupComparison welch_ttest(const std::vector<double>& sample_a,
                                   const std::vector<double>& sample_b) {
    if (sample_a.size() < 2 || sample_b.size() < 2)
        throw std::invalid_argument("welch_ttest: need n >= 2 per sample");
    GroupComparison g;
    g.n_a = sample_a.size();
    g.n_b = sample_b.size();
    g.mean_a = stats::mean(sample_a);
    g.mean_b = stats::mean(sample_b);
    const double va = stats::variance(sample_a);
    const double vb = stats::variance(sample_b);
    g.sd_a = std::sqrt(va);
    g.sd_b = std::sqrt(vb);
    const double na = static_cast<double>(g.n_a), nb = static_cast<double>(g.n_b);
    const double se2 = va / na + vb / nb;
    if (se2 == 0.0) {
        // Both samples constant: equal means is a null result, distinct
        // means are infinitely separated.
        if (g.mean_a == g.mean_b) { g.t_stat = 0.0; g.p_value = 1.0; g.df = na + nb - 2.0; }
        else {
            g.t_stat = g.mean_a > g.mean_b ? std::numeric_limits<double>::infinity()
                                           : -std::numeric_limits<double>::infinity();
            g.p_value = 0.0;
            g.df = na + nb - 2.0;
        }
        return g;
    }
    g.t_stat = (g.mean_a - g.mean_b) / std::sqrt(se2);
    const double qa = va / na, qb = vb / nb;
    g.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    g.p_value = stats::student_t_two_tailed(g.t_stat, g.df);
    return g;
}

// ---------------------------------------------------------------------------
// Pairwise similarity summaries
// ---------------------------------------------------------------------------

enum class PairMode { WithinA, WithinB, Between };

struct PairSimilarity {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_excluded = 0;  // zero-evidence accounts dropped
};

// Mean pairwise cosine similarity over unordered account pairs. Accounts
// with zero vectors are excluded and counted. Summation order is fixed by
// sorted account ids.
inline PairSimilarity pairwise_group_similarity(const std::map<std::string, std::vector<double>>& vectors,
                                                const std::map<std::string, Group>& groups,
                                                PairMode mode) {
    std::vector<const std::vector<double>*> a_side, b_side;
    std::size_t excluded = 0;
    for (const auto& [id, vec] : vectors) {
        auto git = groups.find(id);
        if (git == groups.end()) throw std::invalid_argument("pairwise_group_similarity: account without group: " + id);
        bool zero = true;
        for (double v : vec)
            if (v != 0.0) { zero = false; break; }
        if (zero) { ++excluded; continue; }
        if (git->second == Group::Male) a_side.push_back(&vec);
        else b_side.push_back(&vec);
    }

    std::vector<double> sims;
    auto within = [&](const std::vector<const std::vector<double>*>& side) {
        for (std::size_t i = 0; i < side.size(); ++i)
            for (std::size_t j = i + 1; j < side.size(); ++j)
                sims.push_back(cosine_similarity_raw(*side[i], *side[j]));
    };
    switch (mode) {
        case PairMode::WithinA: within(a_side); break;
        case PairMode::WithinB: within(b_side); break;
        case PairMode::Between:
            for (const auto* x : a_side)
                for (const auto* y : b_side) sims.push_back(cosine_similarity_raw(*x, *y));
            break;
    }
    if (sims.empty()) throw std::invalid_argument("pairwise_group_similarity: no qualifying pair");

    PairSimilarity out;
    out.n_pairs = sims.size();
    out.n_excluded = excluded;
    out.mean = stats::mean(sims);
    out.sd = sims.size() >= 2 ? stats::stddev(sims) : 0.0;
    return out;
}

inline std::map<std::string, std::vector<double>> to_raw_vectors(
    const std::map<std::string, IssueVector>& vectors) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [id, v] : vectors)
        out.emplace(id, std::vector<double>(v.weights.begin(), v.weights.end()));
    return out;
}

inline PairSimilarity pairwise_group_similarity(const std::map<std::string, IssueVector>& vectors,
                                                const std::map<std::string, Group>& groups,
                                                PairMode mode) {
    return pairwise_group_similarity(to_raw_vectors(vectors), groups, mode);
}

// Per-stage within/between similarity series (trajectory view). Vectors
// are political issue vectors by default; category mode builds vectors
// over the union of observed categories instead.
struct StageSimilarityRow {
    int stage = 0;  // 1-based
    PairSimilarity within_male, within_female, between;
};

inline std::vector<StageSimilarityRow> similarity_by_stage(const std::vector<ExposureRecord>& records,
                                                           const std::map<std::string, Group>& groups,
                                                           int n_stages, int t_max,
                                                           EventKind kind_filter = EventKind::Exposure,
                                                           bool use_category_vectors = false) {
    if (n_stages < 1) throw std::invalid_argument("similarity_by_stage: n_stages must be >= 1");
    std::vector<StageSimilarityRow> out;
    const int base = t_max / n_stages, extra = t_max % n_stages;
    int lo = 1;
    for (int s = 0; s < n_stages; ++s) {
        const int len = base + (s < extra ? 1 : 0);
        const int hi = lo + len - 1;
        auto stage_records = slice_window(records, AnalysisWindow::range(lo, hi), t_max);
        auto per_account = records_by_account(stage_records);

        std::map<std::string, std::vector<double>> vectors;
        if (use_category_vectors) {
            std::set<std::string> cats;
            for (const auto& r : stage_records)
                if (r.kind == kind_filter) cats.insert(r.category);
            std::vector<std::string> cat_order(cats.begin(), cats.end());
            for (const auto& [id, recs] : per_account) {
                std::vector<double> v(cat_order.size(), 0.0);
                double total = 0.0;
                for (const auto& r : recs) {
                    if (r.kind != kind_filter) continue;
                    auto it = std::lower_bound(cat_order.begin(), cat_order.end(), r.category);
                    v[static_cast<std::size_t>(it - cat_order.begin())] += 1.0;
                    total += 1.0;
                }
                if (total > 0)
                    for (double& x : v) x /= total;
                vectors.emplace(id, std::move(v));
            }
        } else {
            for (const auto& [id, recs] : per_account) {
                auto v = build_issue_vector(recs, kind_filter);
                vectors.emplace(id, std::vector<double>(v.weights.begin(), v.weights.end()));
            }
        }

        StageSimilarityRow row;
        row.stage = s + 1;
        row.within_male = pairwise_group_similarity(vectors, groups, PairMode::WithinA);
        row.within_female = pairwise_group_similarity(vectors, groups, PairMode::WithinB);
        row.between = pairwise_group_similarity(vectors, groups, PairMode::Between);
        out.push_back(row);
        lo = hi + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-issue group comparison table
// ---------------------------------------------------------------------------

struct IssueComparisonRow {
    std::string issue;
    GroupComparison comparison;  // A = male, B = female
    double mean_difference = 0.0;  // mean_a - mean_b
};

// One row per topic: per-account issue shares within the window compared
// across groups, sorted by mean difference descending. Accounts without
// any core-topic political record in the window are skipped.
inline std::vector<IssueComparisonRow> issue_share_comparison(
    const std::map<std::string, std::vector<ExposureRecord>>& records_by_acct,
    const std::map<std::string, Group>& groups, const AnalysisWindow& window, int t_max,
    EventKind kind_filter = EventKind::Exposure) {
    std::vector<std::array<std::vector<double>, 2>> shares(kNumIssues);
    for (const auto& [id, recs] : records_by_acct) {
        auto git = groups.find(id);
        if (git == groups.end()) throw std::invalid_argument("issue_share_comparison: account without group: " + id);
        auto windowed = slice_window(recs, window, t_max);
        auto vec = build_issue_vector(windowed, kind_filter);
        if (vec.is_zero()) continue;
        const std::size_t side = git->second == Group::Male ? 0 : 1;
        for (std::size_t i = 0; i < kNumIssues; ++i) shares[i][side].push_back(vec[i]);
    }

    std::vector<IssueComparisonRow> rows;
    for (std::size_t i = 0; i < kNumIssues; ++i) {
        IssueComparisonRow row;
        row.issue = issue_names()[i];
        row.comparison = welch_ttest(shares[i][0], shares[i][1]);
        row.comparison.metric_name = row.issue;
        row.mean_difference = row.comparison.mean_a - row.comparison.mean_b;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const IssueComparisonRow& a, const IssueComparisonRow& b) {
        if (a.mean_difference != b.mean_difference) return a.mean_difference > b.mean_difference;
        return a.issue < b.issue;
    });
    return rows;
}

}  // namespace recaudit
