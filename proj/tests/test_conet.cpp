#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "recaudit/conet.hpp"
#include "recaudit/rng.hpp"
#include "test_support.hpp"

using namespace recaudit;

namespace {

// Network with explicit weights, nodes n0..n{k-1}.
CoExposureNetwork make_net(std::size_t n, int theta,
                           const std::vector<std::tuple<std::size_t, std::size_t, int>>& edges) {
    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < n; ++i) {
        std::string id = std::to_string(i);
        while (id.size() < 4) id.insert(0, "0");
        nodes.push_back("n" + id);
    }
    CoExposureNetwork net(nodes, theta);
    for (auto [i, j, w] : edges) net.set_weight(i, j, w);
    return net;
}

CoExposureNetwork random_net(Rng& rng, std::size_t n, int theta, int max_w, double edge_prob) {
    std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform01() < edge_prob)
                edges.push_back({i, j, 1 + static_cast<int>(rng.uniform_int(max_w))});
    return make_net(n, theta, edges);
}

// Literal double-loop weighted modularity over thresholded weights.
double modularity_oracle(const CoExposureNetwork& net, const Partition& part) {
    const std::size_t n = net.size();
    std::vector<double> s(n, 0.0);
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (net.adjacent(i, j)) {
                s[i] += net.weight(i, j);
                two_m += net.weight(i, j);
            }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (part.assignment.at(net.nodes()[i]) != part.assignment.at(net.nodes()[j])) continue;
            const double w = net.adjacent(i, j) ? net.weight(i, j) : 0.0;
            q += w - part.resolution * s[i] * s[j] / two_m;
        }
    return q / two_m;
}

// Exhaustive triple-enumeration clustering oracle.
double clustering_oracle(const CoExposureNetwork& net) {
    const std::size_t n = net.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s_i = 0.0;
        std::size_t k_i = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (net.adjacent(i, j)) {
                s_i += net.weight(i, j);
                ++k_i;
            }
        if (k_i < 2) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t h = 0; h < n; ++h) {
                if (j == h || j == i || h == i) continue;
                if (!net.adjacent(i, j) || !net.adjacent(i, h) || !net.adjacent(j, h)) continue;
                acc += (net.weight(i, j) + net.weight(i, h)) / 2.0;
            }
        total += acc / (s_i * (k_i - 1));
    }
    return total / static_cast<double>(n);
}

double rand_index(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& [node, ca] : a) pairs.push_back({ca, b.at(node)});
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t j = i + 1; j < pairs.size(); ++j) {
            const bool sa = pairs[i].first == pairs[j].first;
            const bool sb = pairs[i].second == pairs[j].second;
            if (sa == sb) ++agree;
            ++total;
        }
    return static_cast<double>(agree) / static_cast<double>(total);
}

// Enumerate all set partitions of n items via restricted growth strings.
void for_each_partition(int n, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> rgs(n, 0), maxv(n, 0);
    for (;;) {
        fn(rgs);
        int i = n - 1;
        while (i > 0 && rgs[i] == maxv[i - 1] + 1) --i;
        if (i == 0) return;
        ++rgs[i];
        maxv[i] = std::max(maxv[i - 1], rgs[i]);
        for (int j = i + 1; j < n; ++j) {
            rgs[j] = 0;
            maxv[j] = maxv[i];
        }
    }
}

ExposureRecord exposure(const std::string& acct, int step, const std::string& video,
                        bool political = true) {
    ExposureRecord r;
    r.account_id = acct;
    r.step = step;
    r.kind = EventKind::Exposure;
    r.video_id = video;
    r.category = political ? kNewsPolitics : "Gaming";
    r.is_political = political;
    if (political) r.issue = IssueId{0};
    return r;
}

}  // namespace

TEST_CASE("build_coexposure") {
    SUBCASE("two accounts with identical 30-video sets, theta 20") {
        std::vector<ExposureRecord> recs;
        for (int v = 0; v < 30; ++v) {
            recs.push_back(exposure("a", 1 + v % 5, "v" + std::to_string(v)));
            recs.push_back(exposure("b", 1 + v % 5, "v" + std::to_string(v)));
        }
        const auto net = build_coexposure(recs, true, AnalysisWindow::first(5), 5, 20);
        REQUIRE(net.size() == 2);
        CHECK(net.weight(0, 1) == 30);
        CHECK(net.edge_count() == 1);

        SUBCASE("theta at the max weight removes every edge") {
            const auto over = build_coexposure(recs, true, AnalysisWindow::first(5), 5, 30);
            CHECK(over.edge_count() == 0);
        }
    }
    SUBCASE("weights equal the incidence self-product off-diagonal") {
        Rng rng(42);
        for (int trial = 0; trial < 25; ++trial) {
            const std::size_t n_accounts = 3 + rng.uniform_int(10);
            const std::size_t n_videos = 5 + rng.uniform_int(25);
            std::vector<std::vector<int>> x(n_accounts, std::vector<int>(n_videos, 0));
            std::vector<ExposureRecord> recs;
            for (std::size_t i = 0; i < n_accounts; ++i)
                for (std::size_t k = 0; k < n_videos; ++k)
                    if (rng.uniform01() < 0.4) {
                        x[i][k] = 1;
                        recs.push_back(exposure("acct" + std::to_string(i), 1, "v" + std::to_string(k)));
                    }
            if (recs.empty()) continue;
            const auto net = build_coexposure(recs, true, AnalysisWindow::first(1), 1, 0, true);
            for (std::size_t i = 0; i < n_accounts; ++i) {
                const auto ii = net.index_of("acct" + std::to_string(i));
                if (!ii) continue;
                for (std::size_t j = i + 1; j < n_accounts; ++j) {
                    const auto jj = net.index_of("acct" + std::to_string(j));
                    if (!jj) continue;
                    int dot = 0;
                    for (std::size_t k = 0; k < n_videos; ++k) dot += x[i][k] * x[j][k];
                    CHECK(net.weight(*ii, *jj) == dot);
                }
            }
        }
    }
    SUBCASE("political filter and windowing narrow the node set") {
        std::vector<ExposureRecord> recs;
        recs.push_back(exposure("a", 1, "v1"));
        recs.push_back(exposure("b", 9, "v1"));               // outside window
        recs.push_back(exposure("c", 2, "v1", false));        // not political
        recs.push_back(exposure("d", 2, "v1"));
        const auto net = build_coexposure(recs, true, AnalysisWindow::first(5), 10, 0);
        CHECK(net.size() == 2);  // a and d
        const auto all = build_coexposure(recs, true, AnalysisWindow::first(5), 10, 0, true);
        CHECK(all.size() == 4);  // isolated accounts retained on request
    }
    SUBCASE("empty window errors") {
        std::vector<ExposureRecord> recs = {exposure("a", 9, "v1"), exposure("b", 9, "v1")};
        CHECK_THROWS(build_coexposure(recs, true, AnalysisWindow::first(5), 10, 0));
    }
    SUBCASE("raising theta never adds edges") {
        Rng rng(9);
        const auto base = random_net(rng, 10, 0, 8, 0.5);
        std::size_t prev = base.edge_count();
        for (int theta = 1; theta <= 8; ++theta) {
            CoExposureNetwork net = make_net(10, theta, {});
            for (std::size_t i = 0; i < 10; ++i)
                for (std::size_t j = i + 1; j < 10; ++j)
                    if (base.weight(i, j) > 0) net.set_weight(i, j, base.weight(i, j));
            CHECK(net.edge_count() <= prev);
            prev = net.edge_count();
        }
    }
}

TEST_CASE("density") {
    SUBCASE("complete graph has density 1") {
        std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = i + 1; j < 6; ++j) edges.push_back({i, j, 5});
        CHECK(density(make_net(6, 0, edges)) == doctest::Approx(1.0));
    }
    SUBCASE("N=4, E=3 gives 0.5") {
        CHECK(density(make_net(4, 0, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}})) == doctest::Approx(0.5));
    }
    SUBCASE("edge counts pin the group densities to two decimals") {
        // 78 nodes / 871 edges ~ 0.29; 75 nodes / 555 edges = 0.20.
        auto with_edges = [&](std::size_t n, std::size_t e) {
            std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
            for (std::size_t i = 0; i < n && edges.size() < e; ++i)
                for (std::size_t j = i + 1; j < n && edges.size() < e; ++j)
                    edges.push_back({i, j, 21});
            return make_net(n, 20, edges);
        };
        const double male_like = density(with_edges(78, 871));
        const double female_like = density(with_edges(75, 555));
        CHECK(male_like == doctest::Approx(2.0 * 871 / (78.0 * 77.0)).epsilon(1e-12));
        CHECK(std::round(male_like * 100) / 100 == doctest::Approx(0.29));
        CHECK(female_like == doctest::Approx(0.20).epsilon(1e-12));
    }
    SUBCASE("single node errors") {
        CHECK_THROWS(density(make_net(1, 0, {})));
    }
}

TEST_CASE("weighted_clustering") {
    SUBCASE("unit triangle: every node 1, mean 1") {
        const auto net = make_net(3, 0, {{0, 1, 4}, {1, 2, 4}, {0, 2, 4}});
        const auto c = weighted_clustering(net);
        CHECK(c.mean == doctest::Approx(1.0));
        for (double v : c.per_node) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("star graph has no closed triangles") {
        const auto net = make_net(5, 0, {{0, 1, 2}, {0, 2, 2}, {0, 3, 2}, {0, 4, 2}});
        CHECK(weighted_clustering(net).mean == doctest::Approx(0.0));
    }
    SUBCASE("random graphs match the brute-force triple enumeration") {
        Rng rng(1234);
        for (int trial = 0; trial < 40; ++trial) {
            const std::size_t n = 3 + rng.uniform_int(6);
            const auto net = random_net(rng, n, static_cast<int>(rng.uniform_int(3)), 9, 0.6);
            const auto c = weighted_clustering(net);
            CHECK(c.mean == doctest::Approx(clustering_oracle(net)).epsilon(1e-12));
        }
    }
}

TEST_CASE("modularity") {
    SUBCASE("unit triangle, all in one community, gamma 1: exactly 0") {
        const auto net = make_net(3, 0, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
        Partition p;
        p.resolution = 1.0;
        for (const auto& node : net.nodes()) p.assignment[node] = 0;
        CHECK(modularity(net, p) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("two disconnected unit triangles with the clique partition: 0.5") {
        const auto net =
            make_net(6, 0, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}});
        Partition p;
        p.resolution = 1.0;
        for (std::size_t i = 0; i < 6; ++i) p.assignment[net.nodes()[i]] = i < 3 ? 0 : 1;
        CHECK(modularity(net, p) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("random graph and random partition match the double-loop oracle") {
        Rng rng(88);
        for (int trial = 0; trial < 40; ++trial) {
            const std::size_t n = 3 + rng.uniform_int(8);
            const auto net = random_net(rng, n, 0, 6, 0.7);
            if (net.edge_count() == 0) continue;
            Partition p;
            p.resolution = 0.25 + 2.0 * rng.uniform01();
            for (const auto& node : net.nodes())
                p.assignment[node] = static_cast<int>(rng.uniform_int(3));
            CHECK(modularity(net, p) == doctest::Approx(modularity_oracle(net, p)).epsilon(1e-12));
        }
    }
    SUBCASE("node relabeling leaves density and modularity unchanged") {
        Rng rng(5);
        const auto net = random_net(rng, 8, 0, 5, 0.6);
        if (net.edge_count() > 0) {
            Partition p;
            for (std::size_t i = 0; i < 8; ++i) p.assignment[net.nodes()[i]] = i % 2;
            const double d0 = density(net), q0 = modularity(net, p);
            // Rebuild with reversed node naming; nodes() sorts ascending,
            // so index k holds old node 7-k.
            CoExposureNetwork relabeled(
                std::vector<std::string>{"z7", "z6", "z5", "z4", "z3", "z2", "z1", "z0"}, 0);
            Partition p2;
            for (std::size_t i = 0; i < 8; ++i)
                for (std::size_t j = i + 1; j < 8; ++j)
                    if (net.weight(7 - i, 7 - j) > 0)
                        relabeled.set_weight(i, j, net.weight(7 - i, 7 - j));
            for (std::size_t i = 0; i < 8; ++i)
                p2.assignment[relabeled.nodes()[i]] = p.assignment[net.nodes()[7 - i]];
            CHECK(density(relabeled) == doctest::Approx(d0).epsilon(1e-12));
            CHECK(modularity(relabeled, p2) == doctest::Approx(q0).epsilon(1e-12));
        }
    }
    SUBCASE("edgeless graph errors") {
        Partition p;
        const auto net = make_net(3, 10, {{0, 1, 2}});
        for (const auto& node : net.nodes()) p.assignment[node] = 0;
        CHECK_THROWS(modularity(net, p));
    }
}

TEST_CASE("louvain_partition") {
    SUBCASE("two 5-cliques joined by one edge recover the cliques, and that is the optimum") {
        std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = i + 1; j < 5; ++j) {
                edges.push_back({i, j, 1});
                edges.push_back({i + 5, j + 5, 1});
            }
        edges.push_back({0, 5, 1});
        const auto net = make_net(10, 0, edges);
        const auto part = louvain_partition(net, 1.0, 31337);

        CHECK(part.n_communities() == 2);
        std::set<int> first_clique, second_clique;
        for (std::size_t i = 0; i < 5; ++i) {
            first_clique.insert(part.assignment.at(net.nodes()[i]));
            second_clique.insert(part.assignment.at(net.nodes()[i + 5]));
        }
        CHECK(first_clique.size() == 1);
        CHECK(second_clique.size() == 1);
        CHECK(*first_clique.begin() != *second_clique.begin());

        // Exhaustive search over all 115,975 partitions of 10 nodes
        // confirms the clique split maximizes modularity.
        double best = -2.0;
        std::vector<int> best_rgs;
        for_each_partition(10, [&](const std::vector<int>& rgs) {
            Partition cand;
            cand.resolution = 1.0;
            for (int i = 0; i < 10; ++i) cand.assignment[net.nodes()[i]] = rgs[i];
            const double q = modularity_oracle(net, cand);
            if (q > best) {
                best = q;
                best_rgs = rgs;
            }
        });
        const std::vector<int> clique_split = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
        CHECK(best_rgs == clique_split);
        CHECK(modularity(net, part) == doctest::Approx(best).epsilon(1e-12));
    }
    SUBCASE("a single clique collapses to one community") {
        std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = i + 1; j < 6; ++j) edges.push_back({i, j, 3});
        const auto part = louvain_partition(make_net(6, 0, edges), 1.0, 1);
        CHECK(part.n_communities() == 1);
    }
    SUBCASE("planted two-block graphs are recovered") {
        Rng gen(2024);
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
            for (std::size_t i = 0; i < 40; ++i)
                for (std::size_t j = i + 1; j < 40; ++j) {
                    const bool same = (i < 20) == (j < 20);
                    if (gen.uniform01() < (same ? 0.9 : 0.05)) edges.push_back({i, j, 1});
                }
            const auto net = make_net(40, 0, edges);
            const auto part = louvain_partition(net, 1.0, 7 + trial);
            std::map<std::string, int> planted;
            for (std::size_t i = 0; i < 40; ++i) planted[net.nodes()[i]] = i < 20 ? 0 : 1;
            CHECK(rand_index(part.assignment, planted) > 0.95);
        }
    }
    SUBCASE("deterministic for a fixed seed") {
        Rng rng(15);
        const auto net = random_net(rng, 20, 0, 5, 0.3);
        const auto a = louvain_partition(net, 1.0, 99);
        const auto b = louvain_partition(net, 1.0, 99);
        CHECK(a.assignment == b.assignment);
    }
    SUBCASE("never below the trivial partitions") {
        Rng rng(123);
        for (int trial = 0; trial < 10; ++trial) {
            const auto net = random_net(rng, 12, 0, 4, 0.4);
            if (net.edge_count() == 0) continue;
            const auto part = louvain_partition(net, 1.0, trial);
            const double q = modularity(net, part);
            CHECK(q >= modularity(net, singleton_partition(net)) - 1e-12);
            Partition all_in_one;
            all_in_one.resolution = 1.0;
            for (const auto& node : net.nodes()) all_in_one.assignment[node] = 0;
            CHECK(q >= modularity(net, all_in_one) - 1e-12);
        }
    }
    SUBCASE("edgeless network errors") {
        CHECK_THROWS(louvain_partition(make_net(4, 100, {{0, 1, 2}}), 1.0, 0));
    }
}

TEST_CASE("community_continuity") {
    Partition a, b;
    for (int i = 0; i < 6; ++i) {
        a.assignment["n" + std::to_string(i)] = i / 3;
        b.assignment["n" + std::to_string(i)] = i / 3;
    }
    CHECK(community_continuity(a, b) == doctest::Approx(1.0));

    SUBCASE("all-singletons vs all-together is total disagreement") {
        Partition singles, together;
        for (int i = 0; i < 8; ++i) {
            singles.assignment["n" + std::to_string(i)] = i;
            together.assignment["n" + std::to_string(i)] = 0;
        }
        CHECK(community_continuity(singles, together) == doctest::Approx(0.0));
    }
    SUBCASE("random partitions match the exhaustive pair oracle; only shared nodes count") {
        Rng rng(66);
        for (int trial = 0; trial < 20; ++trial) {
            Partition x, y;
            for (int i = 0; i < 10; ++i) {
                const std::string node = "n" + std::to_string(i);
                x.assignment[node] = static_cast<int>(rng.uniform_int(3));
                if (i < 8) y.assignment[node] = static_cast<int>(rng.uniform_int(3));
            }
            y.assignment["extra"] = 0;
            double agree = 0, total = 0;
            for (int i = 0; i < 8; ++i)
                for (int j = i + 1; j < 8; ++j) {
                    const std::string ni = "n" + std::to_string(i), nj = "n" + std::to_string(j);
                    const bool sx = x.assignment[ni] == x.assignment[nj];
                    const bool sy = y.assignment[ni] == y.assignment[nj];
                    if (sx == sy) ++agree;
                    ++total;
                }
            CHECK(community_continuity(x, y) == doctest::Approx(agree / total).epsilon(1e-12));
        }
    }
    SUBCASE("fewer than 2 shared nodes errors") {
        Partition x, y;
        x.assignment["a"] = 0;
        y.assignment["b"] = 0;
        CHECK_THROWS(community_continuity(x, y));
    }
}

TEST_CASE("permutation_test") {
    PermutationOptions opts;
    opts.window = AnalysisWindow::first(5);
    opts.t_max = 5;
    opts.theta = 0;
    opts.n_permutations = 1000;
    opts.seed = 77;

    SUBCASE("constant metric gives p = 1") {
        Rng rng(1);
        testsupport::RandomLogOptions lo;
        lo.n_accounts = 8;
        lo.t_max = 5;
        const auto ds = testsupport::make_random_dataset(rng, lo);
        const auto res = permutation_test(
            ds.records, ds.group_map(), [](const CoExposureNetwork&) { return 42.0; }, opts);
        CHECK(res.observed_diff == 0.0);
        CHECK(res.p_value == doctest::Approx(1.0));
    }
    SUBCASE("clique vs edgeless group forces the minimal attainable p") {
        // Male accounts all share one video set; female accounts share nothing.
        std::vector<ExposureRecord> recs;
        std::map<std::string, Group> groups;
        for (int i = 0; i < 10; ++i) {
            const std::string mid = "m" + std::to_string(i);
            groups[mid] = Group::Male;
            for (int v = 0; v < 3; ++v)
                recs.push_back(exposure(mid, 1, "shared" + std::to_string(v)));
            const std::string fid = "f" + std::to_string(i);
            groups[fid] = Group::Female;
            recs.push_back(exposure(fid, 1, "solo_" + fid));
        }
        const auto res = permutation_test(
            recs, groups, [](const CoExposureNetwork& n) { return density(n); }, opts);
        CHECK(res.observed_diff == doctest::Approx(1.0));
        CHECK(res.p_value <= 0.005);
        CHECK(res.p_value >= 1.0 / 1001.0);
    }
    SUBCASE("metric failures count toward the denominator") {
        // Each observed group has one internal edge, but mixed groups
        // after shuffling are edgeless and the Louvain-based metric throws.
        std::vector<ExposureRecord> recs;
        std::map<std::string, Group> groups;
        groups["m0"] = Group::Male;
        groups["m1"] = Group::Male;
        groups["f0"] = Group::Female;
        groups["f1"] = Group::Female;
        recs.push_back(exposure("m0", 1, "a"));
        recs.push_back(exposure("m1", 1, "a"));
        recs.push_back(exposure("f0", 1, "b"));
        recs.push_back(exposure("f1", 1, "b"));
        PermutationOptions small = opts;
        small.n_permutations = 200;
        const auto res = permutation_test(
            recs, groups,
            [](const CoExposureNetwork& n) {
                return modularity(n, louvain_partition(n, 1.0, 0));
            },
            small);
        CHECK(res.n_incomparable > 0);
        CHECK(res.p_value <= 1.0);
    }
    SUBCASE("engineered density gap reaches conventional significance") {
        // Male accounts draw from a narrow shared pool (dense network),
        // female accounts from a wide one (sparse), overlapping partially.
        Rng rng(88);
        std::vector<ExposureRecord> recs;
        std::map<std::string, Group> groups;
        for (int i = 0; i < 14; ++i) {
            const std::string mid = "m" + std::to_string(i);
            groups[mid] = Group::Male;
            std::set<std::string> seen;
            for (int e = 0; e < 10; ++e) {
                const std::string vid = "v" + std::to_string(rng.uniform_int(16));
                if (seen.insert(vid).second)
                    recs.push_back(exposure(mid, 1 + e % 5, vid));
            }
            const std::string fid = "f" + std::to_string(i);
            groups[fid] = Group::Female;
            seen.clear();
            for (int e = 0; e < 10; ++e) {
                const std::string vid = "v" + std::to_string(rng.uniform_int(80));
                if (seen.insert(vid).second)
                    recs.push_back(exposure(fid, 1 + e % 5, vid));
            }
        }
        PermutationOptions gap = opts;
        gap.theta = 2;
        const auto res = permutation_test(
            recs, groups, [](const CoExposureNetwork& n) { return density(n); }, gap);
        CHECK(res.observed_diff > 0.0);
        CHECK(res.p_value < 0.05);
    }
    SUBCASE("fewer than 100 permutations is an error") {
        PermutationOptions bad = opts;
        bad.n_permutations = 10;
        Rng rng(2);
        testsupport::RandomLogOptions lo;
        lo.n_accounts = 6;
        lo.t_max = 5;
        const auto ds = testsupport::make_random_dataset(rng, lo);
        CHECK_THROWS(permutation_test(
            ds.records, ds.group_map(), [](const CoExposureNetwork& n) { return density(n); }, bad));
    }
}

TEST_CASE("community_profile") {
    const IssueId defense = *issue_from_string("Defense");
    const IssueId culture = *issue_from_string("Culture");

    SUBCASE("single community of identical accounts reproduces the vector") {
        std::vector<ExposureRecord> recs;
        Partition part;
        for (int i = 0; i < 3; ++i) {
            const std::string id = "a" + std::to_string(i);
            part.assignment[id] = 0;
            auto r = exposure(id, 1, "v" + std::to_string(i));
            r.issue = defense;
            r.ideology = Ideology::Right;
            recs.push_back(r);
        }
        const auto profiles = community_profile(part, recs);
        REQUIRE(profiles.size() == 1);
        CHECK(profiles[0].mean_issue[defense] == doctest::Approx(1.0));
        CHECK(profiles[0].mean_ideology[2] == doctest::Approx(1.0));  // right
        CHECK(profiles[0].n_issue_evidence == 3);
    }
    SUBCASE("disjoint dominant issues separate the profiles") {
        std::vector<ExposureRecord> recs;
        Partition part;
        for (int i = 0; i < 4; ++i) {
            const std::string id = "a" + std::to_string(i);
            part.assignment[id] = i < 2 ? 0 : 1;
            auto r = exposure(id, 1, "v" + std::to_string(i));
            r.issue = i < 2 ? defense : culture;
            recs.push_back(r);
        }
        const auto profiles = community_profile(part, recs);
        REQUIRE(profiles.size() == 2);
        CHECK(profiles[0].mean_issue[defense] > profiles[0].mean_issue[culture]);
        CHECK(profiles[1].mean_issue[culture] > profiles[1].mean_issue[defense]);
    }
    SUBCASE("zero-evidence community is flagged") {
        Partition part;
        part.assignment["a0"] = 0;
        std::vector<ExposureRecord> recs;
        auto r = exposure("a0", 1, "v0");
        r.issue.reset();
        recs.push_back(r);
        const auto profiles = community_profile(part, recs);
        CHECK(profiles[0].n_issue_evidence == 0);
    }
    SUBCASE("random memberships match a group-by-mean oracle") {
        Rng rng(11);
        testsupport::RandomLogOptions lo;
        lo.n_accounts = 9;
        lo.t_max = 10;
        const auto ds = testsupport::make_random_dataset(rng, lo);
        Partition part;
        for (const auto& p : ds.profiles)
            part.assignment[p.account_id] = static_cast<int>(rng.uniform_int(3));
        const auto profiles = community_profile(part, ds.records);

        const auto by_acct = records_by_account(ds.records);
        for (const auto& prof : profiles) {
            IssueVector sum;
            std::size_t n = 0;
            for (const auto& [id, c] : part.assignment) {
                if (c != prof.community) continue;
                const auto v = build_issue_vector(by_acct.at(id), EventKind::Exposure);
                if (v.is_zero()) continue;
                for (std::size_t k = 0; k < kNumIssues; ++k) sum[k] += v[k];
                ++n;
            }
            if (n == 0) continue;
            for (std::size_t k = 0; k < kNumIssues; ++k)
                CHECK(prof.mean_issue[k] == doctest::Approx(sum[k] / n).epsilon(1e-12));
        }
    }
}
