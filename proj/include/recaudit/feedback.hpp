#pragma once
// Exposure -> click -> re-exposure feedback analysis: stage partitioning,
// four-level reference structures (self, within-community, within-group /
// outside-community, out-group), multi-level similarity comparisons with
// Holm correction, and lagged fixed-effects regressions with standardized
// coefficients and account-clustered standard errors.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "recaudit/conet.hpp"
#include "recaudit/datamodel.hpp"
#include "recaudit/diversity.hpp"
#include "recaudit/linalg.hpp"
#include "recaudit/stats.hpp"

namespace recaudit {

enum class Direction { ExposureToClick, ClickToExposure };

inline std::string direction_label(Direction d) {
    return d == Direction::ExposureToClick ? "exposure_to_click" : "click_to_exposure";
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct StagePartition {
    std::vector<std::pair<int, int>> boundaries;  // inclusive, contiguous, cover [1, t_max]

    std::size_t n_stages() const { return boundaries.size(); }
};

// Near-equal contiguous stages; earlier stages absorb the remainder.
inline StagePartition make_stage_partition(int n_stages, int t_max) {
    if (n_stages < 2) throw std::invalid_argument("make_stage_partition: need >= 2 stages");
    if (t_max < n_stages) throw std::invalid_argument("make_stage_partition: t_max too small");
    StagePartition p;
    const int base = t_max / n_stages, extra = t_max % n_stages;
    int lo = 1;
    for (int s = 0; s < n_stages; ++s) {
        const int len = base + (s < extra ? 1 : 0);
        p.boundaries.push_back({lo, lo + len - 1});
        lo += len;
    }
    return p;
}

inline std::vector<std::vector<ExposureRecord>> stage_split(const std::vector<ExposureRecord>& records,
                                                            const StagePartition& partition) {
    std::vector<std::vector<ExposureRecord>> stages(partition.n_stages());
    for (const auto& r : records)
        for (std::size_t s = 0; s < partition.n_stages(); ++s) {
            const auto [lo, hi] = partition.boundaries[s];
            if (r.step >= lo && r.step <= hi) {
                stages[s].push_back(r);
                break;
            }
        }
    return stages;
}

// ---------------------------------------------------------------------------
// Reference structures
// ---------------------------------------------------------------------------

struct ReferenceSet {
    IssueVector self;
    IssueVector community;
    IssueVector in_group_out_community;
    IssueVector out_group;
    // Empty reference sets yield all-zero vectors; flags record which.
    bool community_empty = false;
    bool in_out_empty = false;
    bool out_group_empty = false;
};

// Per-account reference vectors over one stage's records of one kind.
// Non-self references are macro-averages over the per-account issue
// vectors of the respective sets, always excluding the focal account;
// accounts without issue evidence in the stage do not enter any average.
// Accounts absent from the community partition are out of scope.
inline std::map<std::string, ReferenceSet> build_reference_vectors(
    const std::vector<ExposureRecord>& stage_records, const Partition& partition,
    const std::map<std::string, Group>& groups, EventKind kind) {
    auto per_account = records_by_account(stage_records);

    struct AccountInfo {
        IssueVector vec;
        bool has_evidence = false;
        int community = 0;
        Group group = Group::Male;
    };
    std::map<std::string, AccountInfo> info;
    for (const auto& [id, c] : partition.assignment) {
        auto git = groups.find(id);
        if (git == groups.end())
            throw std::invalid_argument("build_reference_vectors: account without group: " + id);
        AccountInfo ai;
        ai.community = c;
        ai.group = git->second;
        auto rit = per_account.find(id);
        if (rit != per_account.end()) {
            ai.vec = build_issue_vector(rit->second, kind);
            ai.has_evidence = !ai.vec.is_zero();
        }
        info.emplace(id, ai);
    }

    std::map<std::string, ReferenceSet> out;
    for (const auto& [id, ai] : info) {
        ReferenceSet refs;
        refs.self = ai.vec;

        IssueVector comm_sum, in_out_sum, out_sum;
        std::size_t n_comm = 0, n_in_out = 0, n_out = 0;
        for (const auto& [other_id, other] : info) {
            if (other_id == id || !other.has_evidence) continue;
            if (other.group != ai.group) {
                for (std::size_t k = 0; k < kNumIssues; ++k) out_sum[k] += other.vec[k];
                ++n_out;
            } else if (other.community == ai.community) {
                for (std::size_t k = 0; k < kNumIssues; ++k) comm_sum[k] += other.vec[k];
                ++n_comm;
            } else {
                for (std::size_t k = 0; k < kNumIssues; ++k) in_out_sum[k] += other.vec[k];
                ++n_in_out;
            }
        }
        auto finalize = [](IssueVector& sum, std::size_t n, bool& empty_flag) {
            if (n == 0) { empty_flag = true; return; }
            for (std::size_t k = 0; k < kNumIssues; ++k) sum[k] /= static_cast<double>(n);
        };
        refs.community = comm_sum;
        refs.in_group_out_community = in_out_sum;
        refs.out_group = out_sum;
        finalize(refs.community, n_comm, refs.community_empty);
        finalize(refs.in_group_out_community, n_in_out, refs.in_out_empty);
        finalize(refs.out_group, n_out, refs.out_group_empty);
        out.emplace(id, std::move(refs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multi-level similarity comparisons
// ---------------------------------------------------------------------------

// Cosine similarities of one account's stage-(t+1) outcome to the four
// stage-t reference levels.
struct LevelObservation {
    std::string account;
    int transition = 0;  // 1-based: 1 means stage 1 -> stage 2
    double self = 0.0, community = 0.0, in_out = 0.0, out_group = 0.0;
};

struct LevelComparisonRow {
    std::string comparison;  // e.g., "self > community"
    std::size_t n = 0;
    double mean_difference = 0.0;
    double raw_p = 1.0;
    double holm_p = 1.0;
};

struct LevelSimilarityResult {
    std::vector<LevelObservation> observations;
    std::size_t n_excluded = 0;  // accounts dropped for zero vectors
    double mean_self = 0.0, mean_community = 0.0, mean_in_out = 0.0, mean_out_group = 0.0;
    std::vector<LevelComparisonRow> comparisons;
};

// Step-down Holm adjustment; result in original order.
inline std::vector<double> holm_adjust(const std::vector<double>& p_values) {
    const std::size_t m = p_values.size();
    for (double p : p_values)
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("holm_adjust: p outside [0,1]");
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return p_values[a] < p_values[b];
    });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double scaled = std::min(1.0, static_cast<double>(m - k) * p_values[idx[k]]);
        running = std::max(running, scaled);
        adjusted[idx[k]] = running;
    }
    return adjusted;
}

// Per-observation similarities for one stage transition. An account
// contributes only when its outcome vector and all four reference vectors
// are nonzero.
inline std::pair<std::vector<LevelObservation>, std::size_t> level_observations(
    const std::map<std::string, ReferenceSet>& refs_t,
    const std::map<std::string, IssueVector>& outcomes_t1, int transition) {
    std::vector<LevelObservation> obs;
    std::size_t excluded = 0;
    for (const auto& [id, refs] : refs_t) {
        auto oit = outcomes_t1.find(id);
        if (oit == outcomes_t1.end() || oit->second.is_zero() || refs.self.is_zero() ||
            refs.community.is_zero() || refs.in_group_out_community.is_zero() ||
            refs.out_group.is_zero()) {
            ++excluded;
            continue;
        }
        LevelObservation o;
        o.account = id;
        o.transition = transition;
        o.self = cosine_similarity(oit->second, refs.self);
        o.community = cosine_similarity(oit->second, refs.community);
        o.in_out = cosine_similarity(oit->second, refs.in_group_out_community);
        o.out_group = cosine_similarity(oit->second, refs.out_group);
        obs.push_back(std::move(o));
    }
    return {obs, excluded};
}

// Paired comparisons across the four levels, Holm-corrected within the
// family of four. The first comparison is self vs community for the
// exposure -> click direction and community vs self for click -> exposure.
inline LevelSimilarityResult level_similarity_comparison(std::vector<LevelObservation> observations,
                                                         std::size_t n_excluded, Direction direction) {
    if (observations.size() < 2)
        throw std::invalid_argument("level_similarity_comparison: need >= 2 observations");
    LevelSimilarityResult res;
    res.observations = std::move(observations);
    res.n_excluded = n_excluded;

    std::vector<double> self, community, in_out, out_group;
    for (const auto& o : res.observations) {
        self.push_back(o.self);
        community.push_back(o.community);
        in_out.push_back(o.in_out);
        out_group.push_back(o.out_group);
    }
    res.mean_self = stats::mean(self);
    res.mean_community = stats::mean(community);
    res.mean_in_out = stats::mean(in_out);
    res.mean_out_group = stats::mean(out_group);

    struct Pair {
        std::string name;
        const std::vector<double>* hi;
        const std::vector<double>* lo;
    };
    std::vector<Pair> pairs;
    if (direction == Direction::ExposureToClick)
        pairs.push_back({"self > community", &self, &community});
    else
        pairs.push_back({"community > self", &community, &self});
    pairs.push_back({"community > in-group / out-community", &community, &in_out});
    pairs.push_back({"community > out-group", &community, &out_group});
    pairs.push_back({"in-group / out-community > out-group", &in_out, &out_group});

    std::vector<double> raw;
    for (const auto& p : pairs) {
        LevelComparisonRow row;
        row.comparison = p.name;
        row.n = res.observations.size();
        row.mean_difference = stats::mean(*p.hi) - stats::mean(*p.lo);
        row.raw_p = stats::paired_ttest(*p.hi, *p.lo).p_value;
        raw.push_back(row.raw_p);
        res.comparisons.push_back(std::move(row));
    }
    const auto adjusted = holm_adjust(raw);
    for (std::size_t i = 0; i < adjusted.size(); ++i) res.comparisons[i].holm_p = adjusted[i];
    return res;
}

// ---------------------------------------------------------------------------
// Lagged regression design
// ---------------------------------------------------------------------------

// Long-format design: one row per (account, transition, issue). The first
// columns are the four (or three) reference-share predictors; the rest are
// fixed-effect dummies with one level dropped per family.
struct DesignMatrix {
    std::vector<std::string> column_names;
    std::size_t n_predictors = 0;  // leading non-dummy columns
    std::vector<std::vector<double>> rows;
    std::vector<double> outcome;
    std::vector<std::string> cluster;  // account id per row
    std::size_t n_dropped_accounts = 0;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return column_names.size(); }
};

struct LaggedDesignOptions {
    bool include_out_group = true;  // false gives the three-level subgroup model
    bool include_group_fe = true;
    std::set<std::string> account_filter;  // empty = all accounts
};

// One stage transition, already aligned: references from stage t and
// outcome vectors from stage t+1.
struct TransitionData {
    std::map<std::string, ReferenceSet> references;
    std::map<std::string, IssueVector> outcomes;
};

inline DesignMatrix lagged_design(const std::vector<TransitionData>& transitions,
                                  const std::map<std::string, Group>& groups,
                                  const LaggedDesignOptions& opts = {}) {
    if (transitions.empty()) throw std::invalid_argument("lagged_design: no transitions");
    DesignMatrix d;
    d.column_names = {"self", "community", "in_group_out_community"};
    if (opts.include_out_group) d.column_names.push_back("out_group");
    d.n_predictors = d.column_names.size();
    for (std::size_t i = 1; i < kNumIssues; ++i) d.column_names.push_back("issue:" + issue_names()[i]);
    for (std::size_t t = 1; t < transitions.size(); ++t)
        d.column_names.push_back("transition:" + std::to_string(t + 1));
    if (opts.include_group_fe) d.column_names.push_back("group:female");

    const std::size_t n_cols = d.column_names.size();
    for (std::size_t t = 0; t < transitions.size(); ++t) {
        const auto& tr = transitions[t];
        for (const auto& [id, refs] : tr.references) {
            if (!opts.account_filter.empty() && !opts.account_filter.count(id)) continue;
            auto oit = tr.outcomes.find(id);
            if (oit == tr.outcomes.end() || oit->second.is_zero()) {
                ++d.n_dropped_accounts;
                continue;
            }
            auto git = groups.find(id);
            if (git == groups.end())
                throw std::invalid_argument("lagged_design: account without group: " + id);
            for (std::size_t issue = 0; issue < kNumIssues; ++issue) {
                std::vector<double> row(n_cols, 0.0);
                std::size_t col = 0;
                row[col++] = refs.self[issue];
                row[col++] = refs.community[issue];
                row[col++] = refs.in_group_out_community[issue];
                if (opts.include_out_group) row[col++] = refs.out_group[issue];
                if (issue >= 1) row[d.n_predictors + issue - 1] = 1.0;
                if (t >= 1) row[d.n_predictors + (kNumIssues - 1) + t - 1] = 1.0;
                if (opts.include_group_fe && git->second == Group::Female) row[n_cols - 1] = 1.0;
                d.rows.push_back(std::move(row));
                d.outcome.push_back(oit->second[issue]);
                d.cluster.push_back(id);
            }
        }
    }
    return d;
}

// Convenience: slice records into stages, build per-stage references and
// outcomes for the given direction, and assemble the design.
inline std::vector<TransitionData> build_transitions(const std::vector<ExposureRecord>& records,
                                                     const StagePartition& stages,
                                                     const Partition& partition,
                                                     const std::map<std::string, Group>& groups,
                                                     Direction direction) {
    const EventKind ref_kind =
        direction == Direction::ExposureToClick ? EventKind::Exposure : EventKind::Click;
    const EventKind outcome_kind =
        direction == Direction::ExposureToClick ? EventKind::Click : EventKind::Exposure;

    auto per_stage = stage_split(records, stages);
    std::vector<TransitionData> out;
    for (std::size_t t = 0; t + 1 < per_stage.size(); ++t) {
        TransitionData td;
        td.references = build_reference_vectors(per_stage[t], partition, groups, ref_kind);
        auto next_by_account = records_by_account(per_stage[t + 1]);
        for (const auto& [id, recs] : next_by_account)
            td.outcomes.emplace(id, build_issue_vector(recs, outcome_kind));
        out.push_back(std::move(td));
    }
    return out;
}

// ---------------------------------------------------------------------------
// OLS with fixed effects and cluster-robust standard errors
// ---------------------------------------------------------------------------

struct CoefficientEstimate {
    std::string name;
    double beta_standardized = 0.0;
    double beta_raw = 0.0;  // outcome units per predictor unit
    double se_clustered = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
};

struct RegressionResult {
    std::vector<CoefficientEstimate> coefficients;  // design column order
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    double r_squared = 0.0;
    std::size_t n_dropped_accounts = 0;

    const CoefficientEstimate& coefficient(const std::string& name) const {
        for (const auto& c : coefficients)
            if (c.name == name) return c;
        throw std::invalid_argument("no coefficient named " + name);
    }
};

// OLS on the standardized design (outcome and the leading predictor
// columns z-scored on the estimation sample; dummies untouched; no
// intercept). Standard errors are CR1 cluster-robust sandwich estimates
// over the per-account clusters; p-values use t with (n_clusters - 1) df.
inline RegressionResult ols_fe_clustered(const DesignMatrix& design) {
    const std::size_t n = design.n_rows();
    const std::size_t k = design.n_cols();
    if (n <= k) throw std::invalid_argument("ols_fe_clustered: need n_obs > n_params");

    // Standardize.
    std::vector<double> mean_x(k, 0.0), sd_x(k, 1.0);
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_y += design.outcome[i];
    mean_y /= static_cast<double>(n);
    double var_y = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        var_y += (design.outcome[i] - mean_y) * (design.outcome[i] - mean_y);
    var_y /= static_cast<double>(n - 1);
    if (var_y <= 0.0) throw std::invalid_argument("ols_fe_clustered: outcome has zero variance");
    const double sd_y = std::sqrt(var_y);

    for (std::size_t j = 0; j < design.n_predictors; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += design.rows[i][j];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            v += (design.rows[i][j] - m) * (design.rows[i][j] - m);
        v /= static_cast<double>(n - 1);
        if (v <= 0.0)
            throw std::invalid_argument("ols_fe_clustered: predictor '" +
                                        design.column_names[j] + "' has zero variance");
        mean_x[j] = m;
        sd_x[j] = std::sqrt(v);
    }

    linalg::Matrix x(n, k);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = (design.outcome[i] - mean_y) / sd_y;
        for (std::size_t j = 0; j < k; ++j) {
            double v = design.rows[i][j];
            if (j < design.n_predictors) v = (v - mean_x[j]) / sd_x[j];
            x(i, j) = v;
        }
    }

    linalg::PivotedQR qr(x);
    if (qr.rank() < k) {
        std::string names;
        for (std::size_t p = qr.rank(); p < k; ++p) {
            if (!names.empty()) names += ", ";
            names += design.column_names[qr.perm()[p]];
        }
        throw std::invalid_argument("ols_fe_clustered: rank-deficient design; collinear columns: " + names);
    }
    const std::vector<double> beta = qr.solve(y);

    // Residuals and fit quality.
    std::vector<double> resid(n, 0.0);
    double ssr = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double fitted = 0.0;
        for (std::size_t j = 0; j < k; ++j) fitted += x(i, j) * beta[j];
        resid[i] = y[i] - fitted;
        ssr += resid[i] * resid[i];
        sst += y[i] * y[i];  // y standardized: mean 0
    }

    // Cluster-robust meat.
    std::map<std::string, std::vector<std::size_t>> cluster_rows;
    for (std::size_t i = 0; i < n; ++i) cluster_rows[design.cluster[i]].push_back(i);
    const std::size_t n_clusters = cluster_rows.size();
    if (n_clusters < 2) throw std::invalid_argument("ols_fe_clustered: need >= 2 clusters");

    linalg::Matrix meat(k, k, 0.0);
    for (const auto& [cid, rows] : cluster_rows) {
        std::vector<double> score(k, 0.0);
        for (std::size_t i : rows)
            for (std::size_t j = 0; j < k; ++j) score[j] += x(i, j) * resid[i];
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) meat(a, b) += score[a] * score[b];
    }
    const linalg::Matrix bread = qr.xtx_inverse();
    const double nf = static_cast<double>(n), kf = static_cast<double>(k);
    const double gf = static_cast<double>(n_clusters);
    const double cr1 = (gf / (gf - 1.0)) * ((nf - 1.0) / (nf - kf));

    RegressionResult res;
    res.n_obs = n;
    res.n_clusters = n_clusters;
    res.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
    res.n_dropped_accounts = design.n_dropped_accounts;
    const double df = gf - 1.0;
    for (std::size_t j = 0; j < k; ++j) {
        // var(beta_j) = cr1 * [bread * meat * bread]_jj
        double vj = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            double inner = 0.0;
            for (std::size_t b = 0; b < k; ++b) inner += meat(a, b) * bread(b, j);
            vj += bread(j, a) * inner;
        }
        CoefficientEstimate ce;
        ce.name = design.column_names[j];
        ce.beta_standardized = beta[j];
        ce.beta_raw = j < design.n_predictors ? beta[j] * sd_y / sd_x[j] : beta[j] * sd_y;
        ce.se_clustered = std::sqrt(std::max(0.0, cr1 * vj));
        ce.t_stat = ce.se_clustered > 0.0 ? beta[j] / ce.se_clustered : 0.0;
        ce.p_value = ce.se_clustered > 0.0 ? stats::student_t_two_tailed(ce.t_stat, df) : 1.0;
        res.coefficients.push_back(std::move(ce));
    }
    return res;
}

// Classical (homoskedastic) standard error for one column, used by
// validation harnesses to compare against the clustered estimate.
inline std::vector<double> ols_classical_se(const DesignMatrix& design) {
    const std::size_t n = design.n_rows(), k = design.n_cols();
    if (n <= k) throw std::invalid_argument("ols_classical_se: need n_obs > n_params");
    linalg::Matrix x(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) x(i, j) = design.rows[i][j];
    linalg::PivotedQR qr(x);
    if (qr.rank() < k) throw std::invalid_argument("ols_classical_se: rank-deficient design");
    const auto beta = qr.solve(design.outcome);
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double fitted = 0.0;
        for (std::size_t j = 0; j < k; ++j) fitted += x(i, j) * beta[j];
        const double e = design.outcome[i] - fitted;
        ssr += e * e;
    }
    const double sigma2 = ssr / static_cast<double>(n - k);
    const auto bread = qr.xtx_inverse();
    std::vector<double> se(k);
    for (std::size_t j = 0; j < k; ++j) se[j] = std::sqrt(sigma2 * bread(j, j));
    return se;
}

}  // namespace recaudit
