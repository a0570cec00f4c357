#pragma once
// Agent-based collaborative-filtering model. A population of gender-coded
// agents lives in a 21-dimensional issue-salience space; at each step the
// system scores pairwise similarity (cosine plus a same-gender bonus
// beta), samples recommendation sources through a temperature-tau softmax,
// and each agent reinforces its own vector through a Hadamard update with
// learning rate alpha, then renormalizes to the simplex. Also provides the
// beta x tau sensitivity sweep and synthetic trajectory-log export that
// feeds the analytics pipeline.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "recaudit/datamodel.hpp"
#include "recaudit/rng.hpp"
#include "recaudit/stats.hpp"

namespace recaudit {

struct SimConfig {
    int n_agents = 160;  // even, split half male-coded / half female-coded
    int n_issues = 21;
    int n_steps = 150;
    double beta = 0.1;   // gender-homophily weight
    double tau = 0.1;    // softmax temperature
    double alpha = 0.1;  // learning rate
    int recs_per_step = 10;
    std::uint64_t seed = 0;

    bool sampled_update = false;        // update from the sampled sources instead of the
                                        // full probability-weighted expectation
    bool record_recommendations = true; // keep per-agent sampled source sets
    bool record_pairwise = true;        // per-step within-group pairwise cosine series
    bool validate = true;               // track conservation deviations per step

    void check() const {
        if (n_agents < 4 || n_agents % 2 != 0)
            throw std::invalid_argument("SimConfig: n_agents must be even and >= 4");
        if (n_issues != static_cast<int>(kNumIssues))
            throw std::invalid_argument("SimConfig: n_issues is fixed at 21");
        if (n_steps < 0) throw std::invalid_argument("SimConfig: n_steps must be >= 0");
        if (beta < 0.0) throw std::invalid_argument("SimConfig: beta must be >= 0");
        if (tau <= 0.0) throw std::invalid_argument("SimConfig: tau must be > 0");
        if (alpha <= 0.0) throw std::invalid_argument("SimConfig: alpha must be > 0");
        if (recs_per_step < 1) throw std::invalid_argument("SimConfig: recs_per_step must be >= 1");
    }
};

struct AgentState {
    std::vector<double> vec;  // nonnegative, L1 = 1
    Group gender = Group::Male;
};

using Population = std::vector<AgentState>;

struct SimTrajectory {
    SimConfig config;
    std::vector<Group> genders;
    // snapshots[t][agent] is the state vector after t update steps
    // (snapshots[0] is the initial population), so size is n_steps + 1.
    std::vector<std::vector<std::vector<double>>> snapshots;
    // recommendations[t][agent]: source agents sampled at step t+1
    // (recommendations drawn against snapshots[t]).
    std::vector<std::vector<std::vector<int>>> recommendations;

    // Summary series, one entry per snapshot.
    std::vector<double> between_center_cosine;
    std::vector<double> within_male_pairwise;
    std::vector<double> within_female_pairwise;

    // Conservation tracking over the whole run (when config.validate).
    double max_l1_deviation = 0.0;
    double min_entry = 0.0;
    double max_softmax_row_deviation = 0.0;

    double final_between_cosine() const { return between_center_cosine.back(); }
    double final_divergence() const { return 1.0 - between_center_cosine.back(); }
};

// ---------------------------------------------------------------------------
// Elementary operations
// ---------------------------------------------------------------------------

inline Population init_population(const SimConfig& config) {
    config.check();
    Rng rng = Rng::derive(config.seed, 0);
    Population pop(config.n_agents);
    for (int i = 0; i < config.n_agents; ++i) {
        auto& agent = pop[i];
        agent.gender = i < config.n_agents / 2 ? Group::Male : Group::Female;
        agent.vec.resize(config.n_issues);
        double total = 0.0;
        for (double& v : agent.vec) {
            v = rng.uniform01();
            total += v;
        }
        for (double& v : agent.vec) v /= total;
    }
    return pop;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Composite similarity: cosine of state vectors plus beta for same-gender
// pairs. Row-major N x N, diagonal unused (zero).
inline std::vector<double> similarity_matrix(const Population& pop, double beta) {
    const std::size_t n = pop.size();
    std::vector<double> s(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = cosine(pop[i].vec, pop[j].vec);
            if (pop[i].gender == pop[j].gender) v += beta;
            s[i * n + j] = v;
            s[j * n + i] = v;
        }
    return s;
}

// Softmax over one agent's similarity row, self excluded; max-shifted so
// low temperatures cannot overflow.
inline std::vector<double> recommendation_probs(const std::vector<double>& sim_row,
                                                std::size_t self, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("recommendation_probs: tau must be > 0");
    const std::size_t n = sim_row.size();
    if (n < 2) throw std::invalid_argument("recommendation_probs: need >= 2 agents");
    double hi = -1e300;
    for (std::size_t j = 0; j < n; ++j)
        if (j != self) hi = std::max(hi, sim_row[j] / tau);
    std::vector<double> p(n, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == self) continue;
        p[j] = std::exp(sim_row[j] / tau - hi);
        total += p[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] /= total;
    return p;
}

// M independent draws with replacement.
inline std::vector<int> sample_recommendations(const std::vector<double>& probs, int m, Rng& rng) {
    if (m < 1) throw std::invalid_argument("sample_recommendations: m must be >= 1");
    std::vector<int> out;
    out.reserve(m);
    for (int d = 0; d < m; ++d) out.push_back(static_cast<int>(rng.sample_discrete(probs)));
    return out;
}

// Hadamard self-reinforcement update followed by L1 renormalization.
// aggregate must be sum_j P_ij x_j (full expectation) or the empirical
// mean over sampled sources; both keep every entry nonnegative, and a
// zero coordinate stays zero.
inline std::vector<double> update_state(const std::vector<double>& x,
                                        const std::vector<double>& aggregate, double alpha) {
    std::vector<double> out(x.size());
    double total = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = x[k] + alpha * aggregate[k] * x[k];
        total += out[k];
    }
    for (double& v : out) v /= total;
    return out;
}

// ---------------------------------------------------------------------------
// Full runs
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> group_center(const std::vector<std::vector<double>>& snapshot,
                                        const std::vector<Group>& genders, Group g) {
    std::vector<double> center(snapshot[0].size(), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        if (genders[i] != g) continue;
        for (std::size_t k = 0; k < center.size(); ++k) center[k] += snapshot[i][k];
        ++n;
    }
    if (n == 0) throw std::invalid_argument("group_center: empty group");
    for (double& v : center) v /= static_cast<double>(n);
    return center;
}

inline double within_pairwise_cosine(const std::vector<std::vector<double>>& snapshot,
                                     const std::vector<Group>& genders, Group g) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < snapshot.size(); ++i)
        if (genders[i] == g) members.push_back(i);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            total += cosine(snapshot[members[a]], snapshot[members[b]]);
            ++count;
        }
    return count ? total / static_cast<double>(count) : 1.0;
}

}  // namespace detail

inline double between_center_cosine(const std::vector<std::vector<double>>& snapshot,
                                    const std::vector<Group>& genders) {
    return cosine(detail::group_center(snapshot, genders, Group::Male),
                  detail::group_center(snapshot, genders, Group::Female));
}

// Center cosine across a random gender-balanced split of the population:
// the exchangeable control that a label-based divergence is compared to.
inline double random_split_between_cosine(const std::vector<std::vector<double>>& snapshot,
                                          const std::vector<Group>& genders, Rng& rng) {
    std::vector<std::size_t> male, female;
    for (std::size_t i = 0; i < genders.size(); ++i)
        (genders[i] == Group::Male ? male : female).push_back(i);
    rng.shuffle(male);
    rng.shuffle(female);
    std::vector<double> a(snapshot[0].size(), 0.0), b(snapshot[0].size(), 0.0);
    std::size_t na = 0, nb = 0;
    auto add = [&](const std::vector<std::size_t>& members) {
        for (std::size_t idx = 0; idx < members.size(); ++idx) {
            auto& dst = idx < members.size() / 2 ? a : b;
            auto& cnt = idx < members.size() / 2 ? na : nb;
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += snapshot[members[idx]][k];
            ++cnt;
        }
    };
    add(male);
    add(female);
    for (double& v : a) v /= static_cast<double>(na);
    for (double& v : b) v /= static_cast<double>(nb);
    return cosine(a, b);
}

// Synchronous-update simulation, bit-deterministic for a fixed config.
inline SimTrajectory run_simulation(const SimConfig& config) {
    config.check();
    Population pop = init_population(config);
    Rng sample_rng = Rng::derive(config.seed, 1);
    const std::size_t n = pop.size();

    SimTrajectory traj;
    traj.config = config;
    traj.genders.reserve(n);
    for (const auto& a : pop) traj.genders.push_back(a.gender);
    traj.min_entry = 1.0;

    auto snapshot_of = [&]() {
        std::vector<std::vector<double>> snap;
        snap.reserve(n);
        for (const auto& a : pop) snap.push_back(a.vec);
        return snap;
    };
    auto record_series = [&](const std::vector<std::vector<double>>& snap) {
        traj.between_center_cosine.push_back(between_center_cosine(snap, traj.genders));
        if (config.record_pairwise) {
            traj.within_male_pairwise.push_back(
                detail::within_pairwise_cosine(snap, traj.genders, Group::Male));
            traj.within_female_pairwise.push_back(
                detail::within_pairwise_cosine(snap, traj.genders, Group::Female));
        }
    };
    auto track_conservation = [&](const std::vector<double>& vec) {
        if (!config.validate) return;
        double total = 0.0;
        for (double v : vec) {
            total += v;
            traj.min_entry = std::min(traj.min_entry, v);
        }
        traj.max_l1_deviation = std::max(traj.max_l1_deviation, std::fabs(total - 1.0));
    };

    traj.snapshots.push_back(snapshot_of());
    record_series(traj.snapshots.back());
    for (const auto& a : pop) track_conservation(a.vec);

    const bool need_samples = config.record_recommendations || config.sampled_update;
    for (int step = 0; step < config.n_steps; ++step) {
        const auto sim = similarity_matrix(pop, config.beta);

        std::vector<std::vector<double>> probs(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(sim.begin() + static_cast<long>(i * n),
                                    sim.begin() + static_cast<long>((i + 1) * n));
            probs[i] = recommendation_probs(row, i, config.tau);
            if (config.validate) {
                double total = 0.0;
                for (double p : probs[i]) total += p;
                traj.max_softmax_row_deviation =
                    std::max(traj.max_softmax_row_deviation, std::fabs(total - 1.0));
            }
        }

        std::vector<std::vector<int>> sampled;
        if (need_samples) {
            sampled.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                sampled[i] = sample_recommendations(probs[i], config.recs_per_step, sample_rng);
            if (config.record_recommendations) traj.recommendations.push_back(sampled);
        }

        // All agents update from the time-t population, then commit.
        Population next = pop;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> aggregate(pop[0].vec.size(), 0.0);
            if (config.sampled_update) {
                for (int src : sampled[i])
                    for (std::size_t k = 0; k < aggregate.size(); ++k)
                        aggregate[k] += pop[src].vec[k];
                for (double& v : aggregate) v /= static_cast<double>(config.recs_per_step);
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    const double p = probs[i][j];
                    if (p == 0.0) continue;
                    for (std::size_t k = 0; k < aggregate.size(); ++k)
                        aggregate[k] += p * pop[j].vec[k];
                }
            }
            next[i].vec = update_state(pop[i].vec, aggregate, config.alpha);
            track_conservation(next[i].vec);
        }
        pop = std::move(next);
        traj.snapshots.push_back(snapshot_of());
        record_series(traj.snapshots.back());
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Sensitivity sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    double beta = 0.0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    double final_divergence = 0.0;
    double final_between_cosine = 0.0;
};

struct SweepCell {
    double beta = 0.0;
    double tau = 0.0;
    double mean_divergence = 0.0;
    double ci_half_width = 0.0;  // 1.96 * sd / sqrt(n seeds)
};

struct SweepResult {
    std::vector<SweepRow> rows;    // one per (beta, tau, seed), grid order
    std::vector<SweepCell> cells;  // one per (beta, tau)
};

// Grid sweep over (beta, tau, seed). Cells are independent simulations
// with their own seeds, so evaluation order (and thread count) cannot
// change the result.
inline SweepResult sweep(const std::vector<double>& beta_grid, const std::vector<double>& tau_grid,
                         const std::vector<std::uint64_t>& seeds, const SimConfig& base,
                         unsigned n_threads = 1) {
    if (beta_grid.empty() || tau_grid.empty() || seeds.empty())
        throw std::invalid_argument("sweep: grids and seeds must be non-empty");

    struct Job {
        double beta, tau;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double b : beta_grid)
        for (double t : tau_grid)
            for (std::uint64_t s : seeds) jobs.push_back({b, t, s});

    SweepResult result;
    result.rows.resize(jobs.size());
    auto run_job = [&](std::size_t idx) {
        SimConfig cfg = base;
        cfg.beta = jobs[idx].beta;
        cfg.tau = jobs[idx].tau;
        cfg.seed = jobs[idx].seed;
        cfg.record_recommendations = false;
        cfg.record_pairwise = false;
        const auto traj = run_simulation(cfg);
        result.rows[idx] = {cfg.beta, cfg.tau, cfg.seed, traj.final_divergence(),
                            traj.final_between_cosine()};
    };

    if (n_threads > 1) {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> workers;
        for (unsigned t = 0; t < n_threads; ++t)
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t idx = cursor.fetch_add(1);
                    if (idx >= jobs.size()) return;
                    run_job(idx);
                }
            });
        for (auto& w : workers) w.join();
    } else {
        for (std::size_t idx = 0; idx < jobs.size(); ++idx) run_job(idx);
    }

    const std::size_t per_cell = seeds.size();
    for (std::size_t c = 0; c * per_cell < result.rows.size(); ++c) {
        std::vector<double> divs;
        for (std::size_t s = 0; s < per_cell; ++s)
            divs.push_back(result.rows[c * per_cell + s].final_divergence);
        SweepCell cell;
        cell.beta = result.rows[c * per_cell].beta;
        cell.tau = result.rows[c * per_cell].tau;
        cell.mean_divergence = stats::mean(divs);
        cell.ci_half_width =
            divs.size() >= 2 ? 1.96 * stats::stddev(divs) / std::sqrt(static_cast<double>(divs.size()))
                             : 0.0;
        result.cells.push_back(cell);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Synthetic log export
// ---------------------------------------------------------------------------

// Turn a trajectory into a trajectory log in the canonical schema. Each
// source agent emits one item per step whose topic is drawn from its
// pre-update state, so two accounts recommended the same source at the
// same step share a video id. Repeated draws of one source within an
// agent's step are collapsed into a single exposure record; each agent
// then clicks one of its step's videos with probability proportional to
// its own salience for the video's topic.
inline Dataset export_synthetic_log(const SimTrajectory& traj) {
    if (traj.recommendations.size() != static_cast<std::size_t>(traj.config.n_steps))
        throw std::invalid_argument("export_synthetic_log: trajectory has no recommendation record");
    const std::size_t n = traj.genders.size();

    auto account_name = [&](std::size_t i) {
        const char* prefix = traj.genders[i] == Group::Male ? "m" : "f";
        std::string num = std::to_string(i);
        while (num.size() < 3) num.insert(num.begin(), '0');
        return std::string("sim_") + prefix + "_" + num;
    };

    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) ds.profiles.push_back({account_name(i), traj.genders[i]});

    Rng issue_rng = Rng::derive(traj.config.seed, 2);
    Rng click_rng = Rng::derive(traj.config.seed, 3);

    for (int step = 1; step <= traj.config.n_steps; ++step) {
        const auto& source_states = traj.snapshots[static_cast<std::size_t>(step - 1)];
        // One item per source agent this step.
        std::vector<IssueId> item_issue(n);
        for (std::size_t j = 0; j < n; ++j)
            item_issue[j] = static_cast<IssueId>(issue_rng.sample_discrete(source_states[j]));

        const auto& recs = traj.recommendations[static_cast<std::size_t>(step - 1)];
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<int> sources = recs[i];
            std::sort(sources.begin(), sources.end());
            sources.erase(std::unique(sources.begin(), sources.end()), sources.end());

            for (int j : sources) {
                ExposureRecord r;
                r.account_id = account_name(i);
                r.step = step;
                r.kind = EventKind::Exposure;
                r.video_id = "v" + std::to_string(step) + "_" + std::to_string(j);
                r.category = kNewsPolitics;
                r.is_political = true;
                r.issue = item_issue[static_cast<std::size_t>(j)];
                ds.records.push_back(std::move(r));
            }

            // Click: pick among this step's videos by own-topic salience.
            std::vector<double> weights;
            weights.reserve(sources.size());
            for (int j : sources)
                weights.push_back(source_states[i][item_issue[static_cast<std::size_t>(j)]]);
            double total = 0.0;
            for (double w : weights) total += w;
            if (total <= 0.0) weights.assign(sources.size(), 1.0);
            const int chosen = sources[click_rng.sample_discrete(weights)];

            ExposureRecord c;
            c.account_id = account_name(i);
            c.step = step;
            c.kind = EventKind::Click;
            c.video_id = "v" + std::to_string(step) + "_" + std::to_string(chosen);
            c.category = kNewsPolitics;
            c.is_political = true;
            c.issue = item_issue[static_cast<std::size_t>(chosen)];
            ds.records.push_back(std::move(c));
        }
    }

    std::sort(ds.records.begin(), ds.records.end(), [](const ExposureRecord& x, const ExposureRecord& y) {
        return std::tie(x.account_id, x.step, x.kind, x.video_id) <
               std::tie(y.account_id, y.step, y.kind, y.video_id);
    });
    return ds;
}

}  // namespace recaudit
