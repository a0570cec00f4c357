#pragma once
// Account co-exposure networks and their topology: thresholded weight
// matrices built from shared distinct video exposures, density, weighted
// clustering, Louvain community detection with resolution-gamma weighted
// modularity, partition continuity, label-permutation tests, and
// per-community content profiles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "recaudit/datamodel.hpp"
#include "recaudit/rng.hpp"

namespace recaudit {

// ---------------------------------------------------------------------------
// Network type
// ---------------------------------------------------------------------------

// Weighted undirected account graph. w(i,j) counts distinct videos both
// accounts were exposed to; an edge exists where w(i,j) > theta.
class CoExposureNetwork {
public:
    CoExposureNetwork() = default;
    CoExposureNetwork(std::vector<std::string> nodes, int theta)
        : nodes_(std::move(nodes)), theta_(theta), w_(nodes_.size() * nodes_.size(), 0) {
        std::set<std::string> uniq(nodes_.begin(), nodes_.end());
        if (uniq.size() != nodes_.size())
            throw std::invalid_argument("CoExposureNetwork: duplicate node ids");
        if (theta < 0) throw std::invalid_argument("CoExposureNetwork: theta must be >= 0");
    }

    std::size_t size() const { return nodes_.size(); }
    int theta() const { return theta_; }
    const std::vector<std::string>& nodes() const { return nodes_; }

    int weight(std::size_t i, std::size_t j) const { return w_[i * nodes_.size() + j]; }
    void set_weight(std::size_t i, std::size_t j, int w) {
        if (i == j) throw std::invalid_argument("CoExposureNetwork: no self weights");
        if (w < 0) throw std::invalid_argument("CoExposureNetwork: negative weight");
        w_[i * nodes_.size() + j] = w;
        w_[j * nodes_.size() + i] = w;
    }

    bool adjacent(std::size_t i, std::size_t j) const {
        return i != j && weight(i, j) > theta_;
    }

    std::size_t edge_count() const {
        std::size_t e = 0;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = i + 1; j < size(); ++j)
                if (adjacent(i, j)) ++e;
        return e;
    }

    // Strength over surviving edges.
    double strength(std::size_t i) const {
        double s = 0.0;
        for (std::size_t j = 0; j < size(); ++j)
            if (adjacent(i, j)) s += weight(i, j);
        return s;
    }

    std::optional<std::size_t> index_of(const std::string& id) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
        if (it == nodes_.end() || *it != id) return std::nullopt;
        return static_cast<std::size_t>(it - nodes_.begin());
    }

private:
    std::vector<std::string> nodes_;  // sorted ascending
    int theta_ = 0;
    std::vector<int> w_;
};

struct Partition {
    std::map<std::string, int> assignment;  // node -> community id, contiguous from 0
    double resolution = 1.0;
    std::uint64_t rng_seed = 0;

    int n_communities() const {
        int n = 0;
        for (const auto& [node, c] : assignment) n = std::max(n, c + 1);
        return n;
    }
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

// Shared-video counts for a fixed node universe; submatrix views of this
// are what label permutations re-select, so the expensive pairwise
// intersection work happens once.
struct CoExposureCounts {
    std::vector<std::string> nodes;  // sorted; only accounts with >= 1 qualifying exposure
    std::vector<int> w;              // dense symmetric, zero diagonal

    int weight(std::size_t i, std::size_t j) const { return w[i * nodes.size() + j]; }
};

inline CoExposureCounts count_shared_exposures(const std::vector<ExposureRecord>& records,
                                               bool political_only, const AnalysisWindow& window,
                                               int t_max) {
    auto [lo, hi] = window.resolve(t_max);
    std::map<std::string, std::set<std::string>> video_sets;
    for (const auto& r : records) {
        if (r.kind != EventKind::Exposure) continue;
        if (r.step < lo || r.step > hi) continue;
        if (political_only && !r.is_political) continue;
        video_sets[r.account_id].insert(r.video_id);
    }

    CoExposureCounts counts;
    for (const auto& [id, vids] : video_sets) counts.nodes.push_back(id);
    const std::size_t n = counts.nodes.size();

    // Intern video ids; per-account sorted int sets make the pairwise
    // intersections cheap.
    std::map<std::string, int> vid_index;
    std::vector<std::vector<int>> sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& vids = video_sets[counts.nodes[i]];
        sets[i].reserve(vids.size());
        for (const auto& v : vids) {
            auto [it, inserted] = vid_index.emplace(v, static_cast<int>(vid_index.size()));
            sets[i].push_back(it->second);
        }
        std::sort(sets[i].begin(), sets[i].end());
    }

    counts.w.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            int shared = 0;
            const auto& a = sets[i];
            const auto& b = sets[j];
            std::size_t x = 0, y = 0;
            while (x < a.size() && y < b.size()) {
                if (a[x] < b[y]) ++x;
                else if (a[x] > b[y]) ++y;
                else { ++shared; ++x; ++y; }
            }
            counts.w[i * n + j] = shared;
            counts.w[j * n + i] = shared;
        }
    }
    return counts;
}

// Network over a subset of the counted universe (keep[i] indexes counts.nodes).
inline CoExposureNetwork network_from_counts(const CoExposureCounts& counts,
                                             const std::vector<std::size_t>& keep, int theta) {
    std::vector<std::string> nodes;
    nodes.reserve(keep.size());
    for (std::size_t k : keep) nodes.push_back(counts.nodes[k]);
    // keep must be sorted by node id; counts.nodes already is.
    CoExposureNetwork net(nodes, theta);
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t b = a + 1; b < keep.size(); ++b) {
            const int w = counts.weight(keep[a], keep[b]);
            if (w > 0) net.set_weight(a, b, w);
        }
    return net;
}

// Build the thresholded co-exposure network for the given window. By
// default, nodes are the accounts with at least one qualifying exposure
// in-window; retain_all keeps every account that appears in the records.
inline CoExposureNetwork build_coexposure(const std::vector<ExposureRecord>& records,
                                          bool political_only, const AnalysisWindow& window,
                                          int t_max, int theta, bool retain_all = false) {
    if (theta < 0) throw std::invalid_argument("build_coexposure: theta must be >= 0");
    auto counts = count_shared_exposures(records, political_only, window, t_max);
    if (counts.nodes.empty()) throw std::invalid_argument("build_coexposure: empty window");

    if (!retain_all) {
        std::set<std::string> distinct_accounts;
        for (const auto& r : records) distinct_accounts.insert(r.account_id);
        if (distinct_accounts.size() < 2)
            throw std::invalid_argument("build_coexposure: need records from >= 2 accounts");
        std::vector<std::size_t> keep(counts.nodes.size());
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
        return network_from_counts(counts, keep, theta);
    }

    std::set<std::string> all_ids;
    for (const auto& r : records) all_ids.insert(r.account_id);
    if (all_ids.size() < 2)
        throw std::invalid_argument("build_coexposure: need records from >= 2 accounts");
    std::vector<std::string> nodes(all_ids.begin(), all_ids.end());
    CoExposureNetwork net(nodes, theta);
    for (std::size_t i = 0; i < counts.nodes.size(); ++i) {
        const std::size_t gi = *net.index_of(counts.nodes[i]);
        for (std::size_t j = i + 1; j < counts.nodes.size(); ++j) {
            const int w = counts.weight(i, j);
            if (w > 0) net.set_weight(gi, *net.index_of(counts.nodes[j]), w);
        }
    }
    return net;
}

// ---------------------------------------------------------------------------
// Topology metrics
// ---------------------------------------------------------------------------

inline double density(const CoExposureNetwork& net) {
    const double n = static_cast<double>(net.size());
    if (net.size() < 2) throw std::invalid_argument("density: need N >= 2");
    return 2.0 * static_cast<double>(net.edge_count()) / (n * (n - 1.0));
}

struct ClusteringResult {
    double mean = 0.0;
    std::vector<double> per_node;
};

// Barrat-style weighted clustering over the thresholded graph; nodes with
// degree < 2 contribute 0 and stay in the denominator.
inline ClusteringResult weighted_clustering(const CoExposureNetwork& net) {
    const std::size_t n = net.size();
    ClusteringResult out;
    out.per_node.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> nbrs;
        double s_i = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (net.adjacent(i, j)) {
                nbrs.push_back(j);
                s_i += net.weight(i, j);
            }
        const std::size_t k_i = nbrs.size();
        if (k_i < 2) continue;
        double acc = 0.0;
        for (std::size_t a = 0; a < k_i; ++a)
            for (std::size_t b = 0; b < k_i; ++b) {
                if (a == b) continue;
                const std::size_t j = nbrs[a], h = nbrs[b];
                if (!net.adjacent(j, h)) continue;
                acc += 0.5 * (net.weight(i, j) + net.weight(i, h));
            }
        out.per_node[i] = acc / (s_i * static_cast<double>(k_i - 1));
    }
    if (n > 0) {
        double total = 0.0;
        for (double c : out.per_node) total += c;
        out.mean = total / static_cast<double>(n);
    }
    return out;
}

// Weighted modularity with resolution gamma over the thresholded graph.
// Full double sum, diagonal null term included.
inline double modularity(const CoExposureNetwork& net, const Partition& partition) {
    const std::size_t n = net.size();
    std::vector<int> comm(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = partition.assignment.find(net.nodes()[i]);
        if (it == partition.assignment.end())
            throw std::invalid_argument("modularity: partition does not cover node " + net.nodes()[i]);
        comm[i] = it->second;
    }
    std::vector<double> s(n, 0.0);
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = net.strength(i);
        two_m += s[i];
    }
    if (two_m == 0.0) throw std::invalid_argument("modularity: graph has no edges");

    const double gamma = partition.resolution;
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (comm[i] != comm[j]) continue;
            const double w = net.adjacent(i, j) ? net.weight(i, j) : 0.0;
            q += w - gamma * s[i] * s[j] / two_m;
        }
    return q / two_m;
}

// ---------------------------------------------------------------------------
// Louvain
// ---------------------------------------------------------------------------

namespace detail {

// Working graph for Louvain levels: adjacency lists plus self-loop mass
// (stored as the full ordered-pair weight of the collapsed community).
struct LouvainGraph {
    std::vector<std::vector<std::pair<int, double>>> adj;
    std::vector<double> self_loop;
    std::vector<double> strength;  // self_loop + incident edge weights
    double two_m = 0.0;

    int size() const { return static_cast<int>(adj.size()); }
};

inline LouvainGraph louvain_graph_from(const CoExposureNetwork& net) {
    LouvainGraph g;
    const int n = static_cast<int>(net.size());
    g.adj.resize(n);
    g.self_loop.assign(n, 0.0);
    g.strength.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (net.adjacent(i, j)) {
                const double w = net.weight(i, j);
                g.adj[i].push_back({j, w});
                g.adj[j].push_back({i, w});
            }
    for (int i = 0; i < n; ++i) {
        double s = g.self_loop[i];
        for (auto [j, w] : g.adj[i]) s += w;
        g.strength[i] = s;
        g.two_m += s;
    }
    return g;
}

// One level of local moving; returns the node->community map (not yet
// renumbered) and whether anything moved.
inline bool louvain_one_level(const LouvainGraph& g, double gamma, Rng& rng,
                              std::vector<int>& community) {
    const int n = g.size();
    community.resize(n);
    for (int i = 0; i < n; ++i) community[i] = i;
    std::vector<double> sigma_tot(g.strength);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    const double two_m = g.two_m;
    std::vector<double> k_ic(n, 0.0);  // scratch: weight from node to community
    std::vector<int> touched;
    bool any_move = false;
    constexpr double kMinGain = 1e-9;

    bool improved = true;
    while (improved) {
        improved = false;
        for (int idx = 0; idx < n; ++idx) {
            const int i = order[idx];
            const int old_c = community[i];

            touched.clear();
            k_ic[old_c] = 0.0;
            touched.push_back(old_c);
            for (auto [j, w] : g.adj[i]) {
                const int c = community[j];
                if (k_ic[c] == 0.0 && c != old_c &&
                    std::find(touched.begin(), touched.end(), c) == touched.end())
                    touched.push_back(c);
                k_ic[c] += w;
            }

            // Evaluate candidates with i removed from its community.
            // Candidates are visited in ascending id order so exact ties
            // resolve deterministically.
            const double s_i = g.strength[i];
            sigma_tot[old_c] -= s_i;
            auto gain = [&](int c) {
                return 2.0 * k_ic[c] / two_m -
                       gamma * (2.0 * s_i * sigma_tot[c]) / (two_m * two_m);
            };
            std::sort(touched.begin(), touched.end());
            const double stay_gain = gain(old_c);
            int best_c = old_c;
            double best_gain = stay_gain;
            for (int c : touched) {
                if (c == old_c) continue;
                const double gc = gain(c);
                if (gc > best_gain) {
                    best_gain = gc;
                    best_c = c;
                }
            }
            if (best_c != old_c && best_gain > stay_gain + kMinGain) {
                community[i] = best_c;
                sigma_tot[best_c] += s_i;
                improved = true;
                any_move = true;
            } else {
                sigma_tot[old_c] += s_i;
            }
            for (int c : touched) k_ic[c] = 0.0;
        }
    }
    return any_move;
}

inline LouvainGraph aggregate(const LouvainGraph& g, const std::vector<int>& community,
                              int n_comms) {
    LouvainGraph out;
    out.adj.resize(n_comms);
    out.self_loop.assign(n_comms, 0.0);
    out.strength.assign(n_comms, 0.0);
    std::map<std::pair<int, int>, double> cross;
    for (int i = 0; i < g.size(); ++i) {
        out.self_loop[community[i]] += g.self_loop[i];
        for (auto [j, w] : g.adj[i]) {
            if (j < i) continue;  // each undirected edge once
            const int ci = community[i], cj = community[j];
            if (ci == cj) out.self_loop[ci] += 2.0 * w;
            else cross[{std::min(ci, cj), std::max(ci, cj)}] += w;
        }
    }
    for (const auto& [key, w] : cross) {
        out.adj[key.first].push_back({key.second, w});
        out.adj[key.second].push_back({key.first, w});
    }
    for (int c = 0; c < n_comms; ++c) {
        double s = out.self_loop[c];
        for (auto [d, w] : out.adj[c]) s += w;
        out.strength[c] = s;
        out.two_m += s;
    }
    return out;
}

// Renumber community labels to 0..k-1 in order of first appearance.
inline int renumber(std::vector<int>& community) {
    std::map<int, int> remap;
    for (int& c : community) {
        auto [it, inserted] = remap.emplace(c, static_cast<int>(remap.size()));
        c = it->second;
    }
    return static_cast<int>(remap.size());
}

}  // namespace detail

// Louvain community detection on the thresholded weighted graph.
// Deterministic for a fixed seed: the seeded RNG fixes node visit order at
// every level. The returned partition's modularity is never below the
// all-singletons baseline.
inline Partition louvain_partition(const CoExposureNetwork& net, double resolution,
                                   std::uint64_t seed) {
    if (resolution <= 0.0) throw std::invalid_argument("louvain_partition: resolution must be > 0");
    if (net.edge_count() == 0) throw std::invalid_argument("louvain_partition: network has no edges");

    Rng rng(seed);
    detail::LouvainGraph g = detail::louvain_graph_from(net);

    std::vector<int> final_assignment(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) final_assignment[i] = static_cast<int>(i);

    for (;;) {
        std::vector<int> community;
        const bool moved = detail::louvain_one_level(g, resolution, rng, community);
        const int n_comms = detail::renumber(community);
        for (auto& c : final_assignment) c = community[c];
        if (!moved || n_comms == g.size()) break;
        g = detail::aggregate(g, community, n_comms);
    }

    Partition part;
    part.resolution = resolution;
    part.rng_seed = seed;
    // Contiguous ids in node order.
    std::vector<int> labels = final_assignment;
    detail::renumber(labels);
    for (std::size_t i = 0; i < net.size(); ++i) part.assignment[net.nodes()[i]] = labels[i];
    return part;
}

inline Partition singleton_partition(const CoExposureNetwork& net, double resolution = 1.0) {
    Partition p;
    p.resolution = resolution;
    for (std::size_t i = 0; i < net.size(); ++i) p.assignment[net.nodes()[i]] = static_cast<int>(i);
    return p;
}

// ---------------------------------------------------------------------------
// Continuity, permutation tests, profiles
// ---------------------------------------------------------------------------

// Pairwise co-membership agreement over nodes present in both partitions
// (Rand index restricted to the shared node set).
inline double community_continuity(const Partition& early, const Partition& late) {
    std::vector<std::pair<int, int>> shared;  // (early community, late community)
    for (const auto& [node, c_early] : early.assignment) {
        auto it = late.assignment.find(node);
        if (it != late.assignment.end()) shared.push_back({c_early, it->second});
    }
    if (shared.size() < 2)
        throw std::invalid_argument("community_continuity: fewer than 2 shared nodes");
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < shared.size(); ++i)
        for (std::size_t j = i + 1; j < shared.size(); ++j) {
            const bool same_early = shared[i].first == shared[j].first;
            const bool same_late = shared[i].second == shared[j].second;
            if (same_early == same_late) ++agree;
            ++total;
        }
    return static_cast<double>(agree) / static_cast<double>(total);
}

struct PermutationOptions {
    bool political_only = true;
    AnalysisWindow window = AnalysisWindow::last(50);
    int t_max = 150;
    int theta = 20;
    std::size_t n_permutations = 1000;
    std::uint64_t seed = 0;
};

struct PermutationResult {
    double observed_diff = 0.0;  // metric(male network) - metric(female network)
    double p_value = 1.0;
    std::size_t n_permutations = 0;
    std::size_t n_incomparable = 0;  // metric failed on a shuffled network
};

// Group-difference permutation test. Labels are reshuffled over accounts
// with group sizes preserved; both group networks are rebuilt per shuffle
// (equivalently: re-selected from the precomputed shared-video counts).
// p uses the add-one estimator, so the smallest attainable value is
// 1/(n_permutations + 1).
inline PermutationResult permutation_test(const std::vector<ExposureRecord>& records,
                                          const std::map<std::string, Group>& groups,
                                          const std::function<double(const CoExposureNetwork&)>& metric,
                                          const PermutationOptions& opts) {
    if (opts.n_permutations < 100)
        throw std::invalid_argument("permutation_test: need >= 100 permutations");

    std::vector<std::string> accounts;
    std::size_t n_male = 0;
    for (const auto& [id, g] : groups) {
        accounts.push_back(id);
        if (g == Group::Male) ++n_male;
    }
    if (n_male == 0 || n_male == accounts.size())
        throw std::invalid_argument("permutation_test: both groups must be present");

    auto counts = count_shared_exposures(records, opts.political_only, opts.window, opts.t_max);
    std::map<std::string, std::size_t> node_index;
    for (std::size_t i = 0; i < counts.nodes.size(); ++i) node_index[counts.nodes[i]] = i;

    auto eval_diff = [&](const std::vector<std::string>& member_order,
                         std::size_t male_count) -> double {
        std::vector<std::size_t> male_keep, female_keep;
        for (std::size_t i = 0; i < member_order.size(); ++i) {
            auto it = node_index.find(member_order[i]);
            if (it == node_index.end()) continue;  // no qualifying exposure in window
            if (i < male_count) male_keep.push_back(it->second);
            else female_keep.push_back(it->second);
        }
        std::sort(male_keep.begin(), male_keep.end());
        std::sort(female_keep.begin(), female_keep.end());
        const double m = metric(network_from_counts(counts, male_keep, opts.theta));
        const double f = metric(network_from_counts(counts, female_keep, opts.theta));
        return m - f;
    };

    // Observed statistic: males first, then females, in id order.
    std::vector<std::string> observed_order;
    for (const auto& [id, g] : groups)
        if (g == Group::Male) observed_order.push_back(id);
    for (const auto& [id, g] : groups)
        if (g == Group::Female) observed_order.push_back(id);

    PermutationResult res;
    res.n_permutations = opts.n_permutations;
    res.observed_diff = eval_diff(observed_order, n_male);

    std::size_t at_least_as_extreme = 0;
    for (std::size_t rep = 0; rep < opts.n_permutations; ++rep) {
        Rng rng = Rng::derive(opts.seed, rep);
        std::vector<std::string> shuffled = accounts;
        rng.shuffle(shuffled);
        try {
            const double d = eval_diff(shuffled, n_male);
            if (std::fabs(d) >= std::fabs(res.observed_diff)) ++at_least_as_extreme;
        } catch (const std::exception&) {
            ++res.n_incomparable;  // counts toward the denominator only
        }
    }
    res.p_value = static_cast<double>(1 + at_least_as_extreme) /
                  static_cast<double>(1 + opts.n_permutations);
    return res;
}

struct CommunityProfile {
    int community = 0;
    std::size_t n_members = 0;
    IssueVector mean_issue;                 // macro-average over members with evidence
    std::array<double, 3> mean_ideology{};  // left, neutral, right
    std::size_t n_issue_evidence = 0;
    std::size_t n_ideology_evidence = 0;
};

// Mean issue and ideology composition per community. Members without
// political evidence do not contribute; a community where no member has
// issue evidence is reported with n_issue_evidence == 0 so callers can
// exclude it.
inline std::vector<CommunityProfile> community_profile(const Partition& partition,
                                                       const std::vector<ExposureRecord>& records,
                                                       EventKind kind_filter = EventKind::Exposure) {
    auto per_account = records_by_account(records);
    const int n_comms = partition.n_communities();
    std::vector<CommunityProfile> profiles(n_comms);
    for (int c = 0; c < n_comms; ++c) profiles[c].community = c;

    for (const auto& [node, c] : partition.assignment) {
        auto& prof = profiles[c];
        ++prof.n_members;
        auto it = per_account.find(node);
        if (it == per_account.end()) continue;

        auto vec = build_issue_vector(it->second, kind_filter);
        if (!vec.is_zero()) {
            for (std::size_t i = 0; i < kNumIssues; ++i) prof.mean_issue[i] += vec[i];
            ++prof.n_issue_evidence;
        }

        std::array<double, 3> ideo{};
        double total = 0.0;
        for (const auto& r : it->second) {
            if (r.kind != kind_filter || !r.is_political || !r.ideology) continue;
            ideo[static_cast<std::size_t>(*r.ideology)] += 1.0;
            total += 1.0;
        }
        if (total > 0.0) {
            for (std::size_t k = 0; k < 3; ++k) prof.mean_ideology[k] += ideo[k] / total;
            ++prof.n_ideology_evidence;
        }
    }

    for (auto& prof : profiles) {
        if (prof.n_issue_evidence > 0)
            for (std::size_t i = 0; i < kNumIssues; ++i)
                prof.mean_issue[i] /= static_cast<double>(prof.n_issue_evidence);
        if (prof.n_ideology_evidence > 0)
            for (std::size_t k = 0; k < 3; ++k)
                prof.mean_ideology[k] /= static_cast<double>(prof.n_ideology_evidence);
    }
    return profiles;
}

}  // namespace recaudit
