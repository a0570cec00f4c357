#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "recaudit/diversity.hpp"
#include "recaudit/rng.hpp"
#include "test_support.hpp"

using namespace recaudit;

namespace {

// Independent two-tailed Student-t tail area: Simpson integration of the
// density, no incomplete-beta machinery shared with the implementation.
double t_two_tailed_by_quadrature(double t, double df) {
    const double a = -std::fabs(t), b = std::fabs(t);
    const int n = 20000;  // even
    const double h = (b - a) / n;
    const double log_c =
        std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
    auto dens = [&](double x) {
        return std::exp(log_c - 0.5 * (df + 1.0) * std::log1p(x * x / df));
    };
    double acc = dens(a) + dens(b);
    for (int i = 1; i < n; ++i) acc += dens(a + i * h) * (i % 2 ? 4.0 : 2.0);
    const double central = acc * h / 3.0;
    return 1.0 - central;
}

IssueVector make_vec(std::initializer_list<std::pair<std::size_t, double>> entries) {
    IssueVector v;
    for (auto [idx, val] : entries) v[idx] = val;
    return v;
}

}  // namespace

TEST_CASE("shannon_entropy") {
    CHECK(shannon_entropy({1.0}) == doctest::Approx(0.0));
    CHECK(shannon_entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0));
    // Frozen high-precision value for (0.75, 0.25).
    CHECK(shannon_entropy({0.75, 0.25}) == doctest::Approx(0.8112781244591328).epsilon(1e-12));
    CHECK_THROWS(shannon_entropy({0.0, 0.0}));
    CHECK_THROWS(shannon_entropy({0.5, -0.1}));

    SUBCASE("unnormalized input is normalized internally") {
        CHECK(shannon_entropy({3.0, 1.0}) == doctest::Approx(0.8112781244591328).epsilon(1e-12));
    }
    SUBCASE("permutation invariant, maximized by the uniform distribution") {
        Rng rng(11);
        for (int trial = 0; trial < 40; ++trial) {
            const std::size_t n = 2 + rng.uniform_int(8);
            std::vector<double> p(n);
            for (double& x : p) x = rng.uniform01() + 1e-6;
            const double h = shannon_entropy(p);
            rng.shuffle(p);
            CHECK(shannon_entropy(p) == doctest::Approx(h).epsilon(1e-12));
            CHECK(h <= std::log2(static_cast<double>(n)) + 1e-12);
        }
    }
}

TEST_CASE("structural_entropy") {
    CHECK(structural_entropy({1.0, 0.0, 0.0}) == doctest::Approx(0.0));
    CHECK(structural_entropy({1.0 / 3, 1.0 / 3, 1.0 / 3}) == doctest::Approx(std::log2(3.0)));

    SUBCASE("group means on field-shaped synthetic shares sit in the expected band") {
        // Per-account 3-class shares jittered around the group-level means
        // (male ~ (.53, .134, .336), female ~ (.481, .172, .347)).
        Rng rng(404);
        auto simulate_group = [&](std::array<double, 3> base) {
            std::vector<double> entropies;
            for (int acct = 0; acct < 80; ++acct) {
                std::array<double, 3> share{};
                double total = 0.0;
                for (int k = 0; k < 3; ++k) {
                    share[k] = base[k] * std::exp(0.4 * rng.normal01());
                    total += share[k];
                }
                for (double& s : share) s /= total;
                entropies.push_back(structural_entropy(share));
            }
            return stats::mean(entropies);
        };
        const double male_mean = simulate_group({0.530, 0.134, 0.336});
        const double female_mean = simulate_group({0.481, 0.172, 0.347});
        CHECK(male_mean > 1.25);
        CHECK(male_mean < 1.45);
        CHECK(female_mean > 1.25);
        CHECK(female_mean < 1.48);
        CHECK(male_mean < female_mean);
    }
}

TEST_CASE("cosine_similarity") {
    const auto x = make_vec({{0, 0.5}, {1, 0.5}});
    SUBCASE("identity and orthogonality") {
        CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
        const auto y = make_vec({{2, 0.7}, {3, 0.3}});
        CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
    }
    SUBCASE("hand-evaluated overlap") {
        const auto a = make_vec({{0, 0.5}, {1, 0.5}});
        const auto b = make_vec({{1, 0.5}, {2, 0.5}});
        CHECK(cosine_similarity(a, b) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("zero vector is an error") {
        IssueVector z;
        CHECK_THROWS(cosine_similarity(x, z));
    }
    SUBCASE("scale invariance") {
        Rng rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<double> a(21), b(21);
            for (auto& v : a) v = rng.uniform01();
            for (auto& v : b) v = rng.uniform01();
            const double base = cosine_similarity_raw(a, b);
            const double c = 0.01 + 5.0 * rng.uniform01(), d = 0.01 + 5.0 * rng.uniform01();
            std::vector<double> ca(21), db(21);
            for (std::size_t k = 0; k < 21; ++k) {
                ca[k] = c * a[k];
                db[k] = d * b[k];
            }
            CHECK(cosine_similarity_raw(ca, db) == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("jaccard") {
    const std::set<std::string> ab = {"a", "b"}, bc = {"b", "c"};
    CHECK(jaccard(ab, ab) == doctest::Approx(1.0));
    CHECK(jaccard(ab, {"c", "d"}) == doctest::Approx(0.0));
    CHECK(jaccard(ab, bc) == doctest::Approx(1.0 / 3.0));
    CHECK(jaccard(ab, bc) == doctest::Approx(jaccard(bc, ab)));

    SUBCASE("both empty returns 0 with the flag set") {
        const auto r = jaccard_checked({}, {});
        CHECK(r.value == 0.0);
        CHECK(r.both_empty);
        CHECK(!jaccard_checked(ab, {}).both_empty);
        CHECK(jaccard_checked(ab, {}).value == 0.0);
    }
    SUBCASE("equals 1 iff equal (nonempty)") {
        Rng rng(17);
        for (int trial = 0; trial < 40; ++trial) {
            std::set<std::string> a, b;
            for (int i = 0; i < 6; ++i) {
                if (rng.uniform01() < 0.5) a.insert("v" + std::to_string(rng.uniform_int(8)));
                if (rng.uniform01() < 0.5) b.insert("v" + std::to_string(rng.uniform_int(8)));
            }
            if (a.empty() || b.empty()) continue;
            const double j = jaccard(a, b);
            CHECK((j == 1.0) == (a == b));
        }
    }
}

TEST_CASE("pairwise_group_similarity") {
    std::map<std::string, Group> groups;
    for (int i = 0; i < 4; ++i) groups["m" + std::to_string(i)] = Group::Male;
    for (int i = 0; i < 4; ++i) groups["f" + std::to_string(i)] = Group::Female;

    SUBCASE("identical vectors give mean 1, sd 0 in every mode") {
        std::map<std::string, IssueVector> vecs;
        const auto v = make_vec({{0, 0.5}, {5, 0.5}});
        for (const auto& [id, g] : groups) vecs[id] = v;
        for (PairMode mode : {PairMode::WithinA, PairMode::WithinB, PairMode::Between}) {
            const auto s = pairwise_group_similarity(vecs, groups, mode);
            CHECK(s.mean == doctest::Approx(1.0));
            CHECK(s.sd == doctest::Approx(0.0));
        }
    }
    SUBCASE("internally identical, mutually orthogonal groups") {
        std::map<std::string, IssueVector> vecs;
        for (const auto& [id, g] : groups)
            vecs[id] = g == Group::Male ? make_vec({{0, 1.0}}) : make_vec({{1, 1.0}});
        CHECK(pairwise_group_similarity(vecs, groups, PairMode::WithinA).mean == doctest::Approx(1.0));
        CHECK(pairwise_group_similarity(vecs, groups, PairMode::WithinB).mean == doctest::Approx(1.0));
        CHECK(pairwise_group_similarity(vecs, groups, PairMode::Between).mean == doctest::Approx(0.0));
    }
    SUBCASE("random vectors match the exhaustive pair oracle, zero vectors excluded") {
        Rng rng(21);
        std::map<std::string, IssueVector> vecs;
        for (const auto& [id, g] : groups) {
            IssueVector v;
            if (rng.uniform01() < 0.2) { vecs[id] = v; continue; }  // zero-evidence account
            for (std::size_t k = 0; k < kNumIssues; ++k) v[k] = rng.uniform01();
            vecs[id] = v;
        }
        // Oracle: brute-force loop over male pairs.
        std::vector<std::string> males;
        for (const auto& [id, v] : vecs)
            if (groups[id] == Group::Male && !v.is_zero()) males.push_back(id);
        if (males.size() >= 2) {
            double total = 0.0;
            int count = 0;
            for (std::size_t i = 0; i < males.size(); ++i)
                for (std::size_t j = i + 1; j < males.size(); ++j) {
                    total += cosine_similarity(vecs[males[i]], vecs[males[j]]);
                    ++count;
                }
            const auto s = pairwise_group_similarity(vecs, groups, PairMode::WithinA);
            CHECK(s.mean == doctest::Approx(total / count).epsilon(1e-12));
            CHECK(s.n_pairs == static_cast<std::size_t>(count));
        }
    }
    SUBCASE("relabeling accounts within groups leaves summaries unchanged") {
        Rng rng(77);
        std::map<std::string, IssueVector> vecs;
        for (const auto& [id, g] : groups) {
            IssueVector v;
            for (std::size_t k = 0; k < kNumIssues; ++k) v[k] = rng.uniform01();
            vecs[id] = v;
        }
        const auto before = pairwise_group_similarity(vecs, groups, PairMode::Between);
        // Swap the names of two male accounts.
        std::map<std::string, IssueVector> renamed = vecs;
        std::swap(renamed["m0"], renamed["m3"]);
        const auto after = pairwise_group_similarity(renamed, groups, PairMode::Between);
        CHECK(after.mean == doctest::Approx(before.mean).epsilon(1e-12));
        CHECK(after.sd == doctest::Approx(before.sd).epsilon(1e-12));
    }
}

TEST_CASE("welch_ttest") {
    SUBCASE("identical samples give t=0, p=1") {
        const std::vector<double> a = {1.0, 2.0, 3.0};
        const auto g = welch_ttest(a, a);
        CHECK(g.t_stat == doctest::Approx(0.0));
        CHECK(g.p_value == doctest::Approx(1.0));
    }
    SUBCASE("constant equal samples handled as null") {
        const std::vector<double> a = {2.0, 2.0, 2.0};
        const auto g = welch_ttest(a, a);
        CHECK(g.t_stat == 0.0);
        CHECK(g.p_value == 1.0);
    }
    SUBCASE("matches the textbook formula and an independent t CDF") {
        const std::vector<double> a = {1, 2, 3, 4, 5}, b = {2, 3, 4, 5, 6};
        const auto g = welch_ttest(a, b);
        // Textbook Welch pieces, recomputed here.
        const double va = 2.5, vb = 2.5, na = 5, nb = 5;
        const double t = (3.0 - 4.0) / std::sqrt(va / na + vb / nb);
        const double df = std::pow(va / na + vb / nb, 2) /
                          (std::pow(va / na, 2) / (na - 1) + std::pow(vb / nb, 2) / (nb - 1));
        CHECK(g.t_stat == doctest::Approx(t).epsilon(1e-12));
        CHECK(g.df == doctest::Approx(df).epsilon(1e-12));
        CHECK(g.p_value == doctest::Approx(t_two_tailed_by_quadrature(t, df)).epsilon(1e-9));
    }
    SUBCASE("groups with field-typical moments separate below p = .01") {
        // Political-share moments typical of a 50-step window: male .134 +/- .078,
        // female .172 +/- .101, n = 80 per group.
        std::vector<double> base(80);
        for (int i = 0; i < 80; ++i) base[i] = static_cast<double>(i);
        const double m = stats::mean(base), s = stats::stddev(base);
        std::vector<double> male(80), female(80);
        for (int i = 0; i < 80; ++i) {
            const double z = (base[i] - m) / s;
            male[i] = 0.134 + 0.078 * z;
            female[i] = 0.172 + 0.101 * z;
        }
        const auto g = welch_ttest(male, female);
        CHECK(g.mean_a == doctest::Approx(0.134));
        CHECK(g.sd_b == doctest::Approx(0.101));
        CHECK(g.p_value < 0.01);
        CHECK(g.t_stat < 0.0);
    }
    SUBCASE("n < 2 is an error") {
        CHECK_THROWS(welch_ttest({1.0}, {1.0, 2.0}));
    }
    SUBCASE("null calibration (reduced replication; acceptance runs the full check)") {
        Rng rng(2025);
        int rejections = 0;
        const int reps = 400;
        for (int r = 0; r < reps; ++r) {
            std::vector<double> a(15), b(15);
            for (auto& v : a) v = rng.normal01();
            for (auto& v : b) v = rng.normal01();
            if (welch_ttest(a, b).p_value < 0.05) ++rejections;
        }
        const double frac = static_cast<double>(rejections) / reps;
        CHECK(frac > 0.02);
        CHECK(frac < 0.09);
    }
}

TEST_CASE("issue_share_comparison") {
    const IssueId defense = *issue_from_string("Defense");
    const IssueId macro = *issue_from_string("Macroeconomics");
    auto political = [](const std::string& id, int step, IssueId issue) {
        ExposureRecord r;
        r.account_id = id;
        r.step = step;
        r.kind = EventKind::Exposure;
        r.video_id = id + std::to_string(step);
        r.category = kNewsPolitics;
        r.is_political = true;
        r.issue = issue;
        return r;
    };

    SUBCASE("identical logs across groups: zero differences, p = 1") {
        std::map<std::string, std::vector<ExposureRecord>> by_acct;
        std::map<std::string, Group> groups;
        for (int i = 0; i < 6; ++i) {
            const std::string id = "a" + std::to_string(i);
            groups[id] = i % 2 ? Group::Female : Group::Male;
            by_acct[id] = {political(id, 1, defense), political(id, 2, macro)};
        }
        const auto rows = issue_share_comparison(by_acct, groups, AnalysisWindow::last(2), 2);
        REQUIRE(rows.size() == kNumIssues);
        for (const auto& row : rows) {
            CHECK(row.mean_difference == doctest::Approx(0.0));
            CHECK(row.comparison.p_value == doctest::Approx(1.0));
        }
    }
    SUBCASE("constructed extreme: one group all-Defense, other all-Macroeconomics") {
        std::map<std::string, std::vector<ExposureRecord>> by_acct;
        std::map<std::string, Group> groups;
        for (int i = 0; i < 4; ++i) {
            const std::string mid = "m" + std::to_string(i), fid = "f" + std::to_string(i);
            groups[mid] = Group::Male;
            groups[fid] = Group::Female;
            by_acct[mid] = {political(mid, 1, defense)};
            by_acct[fid] = {political(fid, 1, macro)};
        }
        const auto rows = issue_share_comparison(by_acct, groups, AnalysisWindow::first(1), 1);
        CHECK(rows.front().issue == "Defense");
        CHECK(rows.front().mean_difference == doctest::Approx(1.0));
        CHECK(rows.back().issue == "Macroeconomics");
        CHECK(rows.back().mean_difference == doctest::Approx(-1.0));
        // Sorted by difference descending.
        for (std::size_t i = 1; i < rows.size(); ++i)
            CHECK(rows[i - 1].mean_difference >= rows[i].mean_difference);
    }
    SUBCASE("random logs match a per-account share oracle") {
        Rng rng(31);
        testsupport::RandomLogOptions opt;
        opt.n_accounts = 10;
        opt.t_max = 20;
        const Dataset ds = testsupport::make_random_dataset(rng, opt);
        const auto groups = ds.group_map();
        const auto by_acct = records_by_account(ds.records);
        const auto rows = issue_share_comparison(by_acct, groups, AnalysisWindow::last(10), 20);

        // Oracle: recompute one issue's share lists by direct counting.
        for (const auto& row : rows) {
            const IssueId issue = *issue_from_string(row.issue);
            std::vector<double> male_shares, female_shares;
            for (const auto& [id, recs] : by_acct) {
                int hits = 0, total = 0;
                for (const auto& r : recs) {
                    if (r.step < 11 || r.kind != EventKind::Exposure || !r.is_political ||
                        !r.issue || *r.issue == kOtherIssue)
                        continue;
                    ++total;
                    if (*r.issue == issue) ++hits;
                }
                if (total == 0) continue;
                (groups.at(id) == Group::Male ? male_shares : female_shares)
                    .push_back(static_cast<double>(hits) / total);
            }
            const auto oracle = welch_ttest(male_shares, female_shares);
            CHECK(row.comparison.mean_a == doctest::Approx(oracle.mean_a).epsilon(1e-12));
            CHECK(row.comparison.mean_b == doctest::Approx(oracle.mean_b).epsilon(1e-12));
            CHECK(row.comparison.p_value == doctest::Approx(oracle.p_value).epsilon(1e-12));
            CHECK(row.mean_difference ==
                  doctest::Approx(oracle.mean_a - oracle.mean_b).epsilon(1e-12));
        }
    }
}

TEST_CASE("similarity_by_stage produces one row per stage with sane bounds") {
    Rng rng(55);
    testsupport::RandomLogOptions opt;
    opt.n_accounts = 8;
    opt.t_max = 30;
    const Dataset ds = testsupport::make_random_dataset(rng, opt);
    const auto rows = similarity_by_stage(ds.records, ds.group_map(), 3, 30);
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        for (const auto& s : {row.within_male, row.within_female, row.between}) {
            CHECK(s.mean >= -1e-12);
            CHECK(s.mean <= 1.0 + 1e-12);
            CHECK(s.n_pairs > 0);
        }
    }
    SUBCASE("category-vector mode also works") {
        const auto cat_rows =
            similarity_by_stage(ds.records, ds.group_map(), 2, 30, EventKind::Exposure, true);
        CHECK(cat_rows.size() == 2);
    }
}
