#pragma once
// Subcommand pipelines: each run_* function takes resolved options, reads
// the dataset, writes CSV/JSON outputs plus a manifest into its output
// directory, and returns nothing on success. All file output stays inside
// the given directory. The CLI is a thin flag-parsing layer over these.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "recaudit/conet.hpp"
#include "recaudit/csv.hpp"
#include "recaudit/datamodel.hpp"
#include "recaudit/diversity.hpp"
#include "recaudit/feedback.hpp"
#include "recaudit/manifest.hpp"
#include "recaudit/simulator.hpp"

namespace recaudit {

namespace fs = std::filesystem;

// A pipeline failure that names the stage it happened in.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

namespace detail {

inline std::string fmt(double v) { return io::format_double(v); }

inline LogFormat format_for(const std::string& path, const std::string& override_fmt) {
    if (override_fmt == "csv") return LogFormat::Csv;
    if (override_fmt == "jsonl") return LogFormat::JsonLines;
    if (!override_fmt.empty()) throw std::invalid_argument("unknown log format: " + override_fmt);
    return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? LogFormat::Csv
                                                                      : LogFormat::JsonLines;
}

inline Dataset load_dataset(const std::string& path, const std::string& format_override) {
    try {
        return parse_log(path, format_for(path, format_override));
    } catch (const std::exception& e) {
        throw StageError("parse", e.what());
    }
}

inline fs::path ensure_dir(const std::string& out) {
    if (out.empty()) throw std::invalid_argument("--out directory is required");
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else cur += c;
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    for (const auto& tok : split_list(csv)) out.push_back(std::stod(tok));
    return out;
}

inline std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (const auto& tok : split_list(csv)) out.push_back(std::stoi(tok));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOptions {
    std::string in_path;
    std::string out_dir;
    std::string format;  // "", "jsonl", "csv"
};

inline void run_ingest(const IngestOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    const Dataset ds = detail::load_dataset(opt.in_path, opt.format);

    io::CsvWriter profiles({"account_id", "group"});
    for (const auto& p : ds.profiles) profiles.row({p.account_id, group_to_string(p.group)});
    profiles.write_file((out / "profiles.csv").string());

    std::size_t n_political = 0, n_clicks = 0;
    for (const auto& r : ds.records) {
        if (r.is_political) ++n_political;
        if (r.kind == EventKind::Click) ++n_clicks;
    }
    nlohmann::ordered_json summary;
    summary["n_accounts"] = ds.profiles.size();
    summary["n_records"] = ds.records.size();
    summary["n_political"] = n_political;
    summary["n_clicks"] = n_clicks;
    summary["t_max"] = ds.max_step();
    std::ofstream sf(out / "summary.json", std::ios::binary);
    sf << summary.dump(2) << "\n";

    write_log(ds, (out / "normalized.jsonl").string(), LogFormat::JsonLines);

    manifest.add_input(opt.in_path);
    manifest.write(out);
}

// ---------------------------------------------------------------------------
// diversity
// ---------------------------------------------------------------------------

struct DiversityOptions {
    std::string in_path;
    std::string out_dir;
    std::string format;
    std::vector<int> windows = {50};  // LastK windows
    int stages = 3;
    std::set<std::string> interest_categories = {"Autos & Vehicles", "Sports", "Gaming",
                                                 "Howto & Style", "People & Blogs"};
    bool similarity_on_categories = false;
    int t_max_override = 0;
};

inline void run_diversity(const DiversityOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    const Dataset ds = detail::load_dataset(opt.in_path, opt.format);
    const int t_max = opt.t_max_override > 0 ? opt.t_max_override : ds.max_step();
    const auto groups = ds.group_map();

    try {
        io::CsvWriter accounts({"window", "account_id", "group", "n_exposures", "political_share",
                                "interest_share", "total_entropy", "structural_entropy",
                                "issue_entropy"});
        io::CsvWriter comparisons(
            {"metric", "window", "mean_m", "sd_m", "mean_f", "sd_f", "t", "p"});
        io::CsvWriter issue_rows({"window", "issue", "mean_m", "sd_m", "mean_f", "sd_f",
                                  "diff_m_minus_f", "t", "p"});

        for (int k : opt.windows) {
            if (k > t_max) continue;
            const AnalysisWindow window = AnalysisWindow::last(k);
            const auto sliced = slice_window(ds.records, window, t_max);
            const auto per_account = records_by_account(sliced);
            const std::string wlabel = std::to_string(k);

            // Per-account metric lists, split by group for the comparisons.
            std::map<std::string, std::array<std::vector<double>, 2>> metric_samples;
            for (const auto& [id, recs] : per_account) {
                std::vector<ExposureRecord> exposures;
                for (const auto& r : recs)
                    if (r.kind == EventKind::Exposure) exposures.push_back(r);
                if (exposures.empty()) continue;

                std::map<std::string, double> cat_counts;
                double political = 0.0, interest = 0.0;
                for (const auto& r : exposures) {
                    cat_counts[r.category] += 1.0;
                    if (r.is_political) ++political;
                    if (r.category != kNewsPolitics && opt.interest_categories.count(r.category))
                        ++interest;
                }
                std::vector<double> cat_dist;
                for (const auto& [cat, c] : cat_counts) cat_dist.push_back(c);
                const double n_exp = static_cast<double>(exposures.size());
                const double total_entropy = shannon_entropy(cat_dist);
                const double struct_entropy =
                    structural_entropy(regroup_structural(exposures, opt.interest_categories));
                const auto issue_vec = build_issue_vector(exposures, EventKind::Exposure);
                std::optional<double> issue_entropy;
                if (!issue_vec.is_zero())
                    issue_entropy = shannon_entropy(
                        std::vector<double>(issue_vec.weights.begin(), issue_vec.weights.end()));

                const std::size_t side = groups.at(id) == Group::Male ? 0 : 1;
                metric_samples["political_share"][side].push_back(political / n_exp);
                metric_samples["interest_share"][side].push_back(interest / n_exp);
                metric_samples["total_entropy"][side].push_back(total_entropy);
                metric_samples["structural_entropy"][side].push_back(struct_entropy);
                if (issue_entropy) metric_samples["issue_entropy"][side].push_back(*issue_entropy);

                accounts.row({wlabel, id, group_to_string(groups.at(id)),
                              std::to_string(exposures.size()), detail::fmt(political / n_exp),
                              detail::fmt(interest / n_exp), detail::fmt(total_entropy),
                              detail::fmt(struct_entropy),
                              issue_entropy ? detail::fmt(*issue_entropy) : std::string()});
            }

            for (const auto& [metric, samples] : metric_samples) {
                if (samples[0].size() < 2 || samples[1].size() < 2) continue;
                const auto g = welch_ttest(samples[0], samples[1]);
                comparisons.row({metric, wlabel, detail::fmt(g.mean_a), detail::fmt(g.sd_a),
                                 detail::fmt(g.mean_b), detail::fmt(g.sd_b), detail::fmt(g.t_stat),
                                 detail::fmt(g.p_value)});
            }

            const auto by_acct_full = records_by_account(ds.records);
            for (const auto& row : issue_share_comparison(by_acct_full, groups, window, t_max)) {
                issue_rows.row({wlabel, row.issue, detail::fmt(row.comparison.mean_a),
                                detail::fmt(row.comparison.sd_a), detail::fmt(row.comparison.mean_b),
                                detail::fmt(row.comparison.sd_b), detail::fmt(row.mean_difference),
                                detail::fmt(row.comparison.t_stat),
                                detail::fmt(row.comparison.p_value)});
            }
        }

        accounts.write_file((out / "account_metrics.csv").string());
        comparisons.write_file((out / "group_comparisons.csv").string());
        issue_rows.write_file((out / "issue_comparison.csv").string());

        io::CsvWriter stage_csv({"stage", "within_male_mean", "within_male_sd", "within_female_mean",
                                 "within_female_sd", "between_mean", "between_sd", "n_pairs_between",
                                 "n_excluded"});
        const auto series = similarity_by_stage(ds.records, groups, opt.stages, t_max,
                                                EventKind::Exposure, opt.similarity_on_categories);
        for (const auto& row : series) {
            stage_csv.row({std::to_string(row.stage), detail::fmt(row.within_male.mean),
                           detail::fmt(row.within_male.sd), detail::fmt(row.within_female.mean),
                           detail::fmt(row.within_female.sd), detail::fmt(row.between.mean),
                           detail::fmt(row.between.sd), std::to_string(row.between.n_pairs),
                           std::to_string(row.between.n_excluded)});
        }
        stage_csv.write_file((out / "stage_similarity.csv").string());
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("diversity", e.what());
    }

    manifest.add_input(opt.in_path);
    manifest.write(out);
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

struct NetworkOptions {
    std::string in_path;
    std::string out_dir;
    std::string format;
    int theta = 20;
    double gamma = 1.0;
    std::string window = "last50";
    std::size_t permutations = 1000;
    std::uint64_t seed = 0;
    bool political_only = true;
    bool retain_isolated = false;
    int t_max_override = 0;
};

inline void run_network(const NetworkOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    const Dataset ds = detail::load_dataset(opt.in_path, opt.format);
    const int t_max = opt.t_max_override > 0 ? opt.t_max_override : ds.max_step();
    const auto groups = ds.group_map();

    try {
        const AnalysisWindow window = AnalysisWindow::parse(opt.window, t_max);
        nlohmann::ordered_json metrics;
        metrics["theta"] = opt.theta;
        metrics["gamma"] = opt.gamma;
        metrics["window"] = window.label();

        for (Group g : {Group::Male, Group::Female}) {
            const std::string label = group_to_string(g);
            std::vector<ExposureRecord> group_records;
            for (const auto& r : ds.records)
                if (groups.at(r.account_id) == g) group_records.push_back(r);

            const auto net = build_coexposure(group_records, opt.political_only, window, t_max,
                                              opt.theta, opt.retain_isolated);

            io::CsvWriter edges({"source", "target", "weight"});
            for (std::size_t i = 0; i < net.size(); ++i)
                for (std::size_t j = i + 1; j < net.size(); ++j)
                    if (net.adjacent(i, j))
                        edges.row({net.nodes()[i], net.nodes()[j],
                                   std::to_string(net.weight(i, j))});
            edges.write_file((out / ("edges_" + label + ".csv")).string());

            nlohmann::ordered_json gm;
            gm["n_nodes"] = net.size();
            gm["n_edges"] = net.edge_count();
            gm["density"] = net.size() >= 2 ? density(net) : 0.0;
            gm["clustering"] = weighted_clustering(net).mean;

            if (net.edge_count() > 0) {
                const auto part = louvain_partition(net, opt.gamma, Rng::derive(opt.seed, g == Group::Male ? 0 : 1).next_u64());
                gm["modularity"] = modularity(net, part);
                gm["n_communities"] = part.n_communities();

                io::CsvWriter comm({"account_id", "community"});
                for (const auto& [id, c] : part.assignment) comm.row({id, std::to_string(c)});
                comm.write_file((out / ("communities_" + label + ".csv")).string());

                const auto windowed = slice_window(group_records, window, t_max);
                std::vector<std::string> issue_cols = {"community", "n_members", "n_issue_evidence"};
                for (const auto& name : issue_names()) issue_cols.push_back(name);
                io::CsvWriter prof_issue(issue_cols);
                io::CsvWriter prof_ideology({"community", "n_members", "n_ideology_evidence",
                                             "left", "neutral", "right"});
                for (const auto& prof : community_profile(part, windowed)) {
                    std::vector<std::string> row = {std::to_string(prof.community),
                                                    std::to_string(prof.n_members),
                                                    std::to_string(prof.n_issue_evidence)};
                    for (std::size_t k = 0; k < kNumIssues; ++k)
                        row.push_back(detail::fmt(prof.mean_issue[k]));
                    prof_issue.row(row);
                    prof_ideology.row({std::to_string(prof.community), std::to_string(prof.n_members),
                                       std::to_string(prof.n_ideology_evidence),
                                       detail::fmt(prof.mean_ideology[0]),
                                       detail::fmt(prof.mean_ideology[1]),
                                       detail::fmt(prof.mean_ideology[2])});
                }
                prof_issue.write_file((out / ("profile_issue_" + label + ".csv")).string());
                prof_ideology.write_file((out / ("profile_ideology_" + label + ".csv")).string());
            } else {
                gm["modularity"] = nullptr;
                gm["n_communities"] = 0;
            }

            // Community continuity between the first and last half-windows.
            const int half = std::min(50, t_max / 2);
            if (half >= 1) {
                try {
                    const auto early_net = build_coexposure(group_records, opt.political_only,
                                                            AnalysisWindow::first(half), t_max,
                                                            opt.theta, opt.retain_isolated);
                    const auto late_net = build_coexposure(group_records, opt.political_only,
                                                           AnalysisWindow::last(half), t_max,
                                                           opt.theta, opt.retain_isolated);
                    const auto early = louvain_partition(early_net, opt.gamma,
                                                         Rng::derive(opt.seed, 10).next_u64());
                    const auto late = louvain_partition(late_net, opt.gamma,
                                                        Rng::derive(opt.seed, 11).next_u64());
                    gm["continuity"] = community_continuity(early, late);
                } catch (const std::exception&) {
                    gm["continuity"] = nullptr;  // degenerate window networks
                }
            }
            metrics[label] = gm;
        }

        // Group-difference permutation tests.
        PermutationOptions popt;
        popt.political_only = opt.political_only;
        popt.window = window;
        popt.t_max = t_max;
        popt.theta = opt.theta;
        popt.n_permutations = opt.permutations;
        popt.seed = opt.seed;
        const double gamma = opt.gamma;
        const std::uint64_t louvain_seed = Rng::derive(opt.seed, 12).next_u64();
        const std::map<std::string, std::function<double(const CoExposureNetwork&)>> tests = {
            {"density", [](const CoExposureNetwork& n) { return density(n); }},
            {"clustering", [](const CoExposureNetwork& n) { return weighted_clustering(n).mean; }},
            {"modularity", [gamma, louvain_seed](const CoExposureNetwork& n) {
                 return modularity(n, louvain_partition(n, gamma, louvain_seed));
             }}};
        nlohmann::ordered_json perm;
        for (const auto& [name, metric] : tests) {
            const auto res = permutation_test(ds.records, groups, metric, popt);
            nlohmann::ordered_json pj;
            pj["observed_diff_m_minus_f"] = res.observed_diff;
            pj["p_value"] = res.p_value;
            pj["n_permutations"] = res.n_permutations;
            pj["n_incomparable"] = res.n_incomparable;
            perm[name] = pj;
        }
        metrics["permutation_tests"] = perm;

        std::ofstream mf(out / "metrics.json", std::ios::binary);
        mf << metrics.dump(2) << "\n";
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("network", e.what());
    }

    manifest.add_input(opt.in_path);
    manifest.write(out);
}

// ---------------------------------------------------------------------------
// feedback
// ---------------------------------------------------------------------------

struct FeedbackOptions {
    std::string in_path;
    std::string out_dir;
    std::string format;
    int stages = 3;
    std::string direction = "both";  // both | e2c | c2e
    int theta = 20;
    double gamma = 1.0;
    std::uint64_t seed = 0;
    int t_max_override = 0;
};

namespace detail {

// Pipeline-level guard: a reference level with no variation (for example a
// single community per group makes every in-group/out-community reference
// empty) cannot be standardized, so it is dropped from the design with a
// note instead of failing the whole report.
inline std::pair<DesignMatrix, std::vector<std::string>> prune_constant_predictors(
    const DesignMatrix& design) {
    std::vector<std::string> dropped;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < design.n_predictors; ++j) {
        const double first = design.rows.empty() ? 0.0 : design.rows[0][j];
        bool varies = false;
        for (const auto& row : design.rows)
            if (row[j] != first) { varies = true; break; }
        if (varies) keep.push_back(j);
        else dropped.push_back(design.column_names[j]);
    }
    if (dropped.empty()) return {design, {}};
    DesignMatrix pruned;
    pruned.n_predictors = keep.size();
    for (std::size_t j : keep) pruned.column_names.push_back(design.column_names[j]);
    for (std::size_t j = design.n_predictors; j < design.n_cols(); ++j)
        pruned.column_names.push_back(design.column_names[j]);
    pruned.outcome = design.outcome;
    pruned.cluster = design.cluster;
    pruned.n_dropped_accounts = design.n_dropped_accounts;
    for (const auto& row : design.rows) {
        std::vector<double> r;
        r.reserve(pruned.column_names.size());
        for (std::size_t j : keep) r.push_back(row[j]);
        for (std::size_t j = design.n_predictors; j < design.n_cols(); ++j) r.push_back(row[j]);
        pruned.rows.push_back(std::move(r));
    }
    return {pruned, dropped};
}

}  // namespace detail

inline void run_feedback(const FeedbackOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    const Dataset ds = detail::load_dataset(opt.in_path, opt.format);
    const int t_max = opt.t_max_override > 0 ? opt.t_max_override : ds.max_step();
    const auto groups = ds.group_map();

    try {
        const auto stage_partition = make_stage_partition(opt.stages, t_max);

        // Community structure for the reference sets: full-period political
        // co-exposure network over all accounts.
        const auto net = build_coexposure(ds.records, true, AnalysisWindow::first(t_max), t_max,
                                          opt.theta, true);
        if (net.edge_count() == 0)
            throw std::runtime_error("co-exposure network has no edges at theta=" +
                                     std::to_string(opt.theta));
        const auto partition =
            louvain_partition(net, opt.gamma, Rng::derive(opt.seed, 20).next_u64());

        std::vector<Direction> directions;
        if (opt.direction == "both" || opt.direction == "e2c")
            directions.push_back(Direction::ExposureToClick);
        if (opt.direction == "both" || opt.direction == "c2e")
            directions.push_back(Direction::ClickToExposure);
        if (directions.empty())
            throw std::invalid_argument("unknown direction: " + opt.direction);

        io::CsvWriter level_csv({"direction", "group", "transition", "comparison", "n",
                                 "mean_difference", "raw_p", "holm_p"});
        io::CsvWriter coef_csv({"direction", "subgroup", "predictor", "beta", "se", "t", "p",
                                "n_obs", "n_clusters", "r_squared", "dropped_predictors"});
        io::CsvWriter plot_csv({"direction", "subgroup", "predictor", "beta", "ci_lo", "ci_hi"});
        nlohmann::ordered_json level_summary;
        level_summary["n_communities"] = partition.n_communities();

        for (Direction dir : directions) {
            const std::string dlabel = direction_label(dir);
            const auto transitions = build_transitions(ds.records, stage_partition, partition,
                                                       groups, dir);

            // Pooled observations across transitions, plus per group/transition.
            std::vector<LevelObservation> pooled;
            std::size_t pooled_excluded = 0;
            std::vector<std::vector<LevelObservation>> per_transition;
            for (std::size_t t = 0; t < transitions.size(); ++t) {
                auto [obs, excluded] = level_observations(transitions[t].references,
                                                          transitions[t].outcomes,
                                                          static_cast<int>(t) + 1);
                pooled.insert(pooled.end(), obs.begin(), obs.end());
                pooled_excluded += excluded;
                per_transition.push_back(std::move(obs));
            }

            auto emit_levels = [&](const std::string& group_label, const std::string& transition,
                                   const std::vector<LevelObservation>& obs, std::size_t excluded) {
                if (obs.size() < 2) return;
                const auto res = level_similarity_comparison(obs, excluded, dir);
                for (const auto& row : res.comparisons)
                    level_csv.row({dlabel, group_label, transition, row.comparison,
                                   std::to_string(row.n), detail::fmt(row.mean_difference),
                                   detail::fmt(row.raw_p), detail::fmt(row.holm_p)});
            };
            emit_levels("overall", "pooled", pooled, pooled_excluded);
            {
                nlohmann::ordered_json ds_summary;
                ds_summary["n_observations"] = pooled.size();
                ds_summary["n_excluded_zero_vector"] = pooled_excluded;
                level_summary[dlabel] = ds_summary;
            }
            for (std::size_t t = 0; t < per_transition.size(); ++t) {
                const std::string tlabel =
                    std::to_string(t + 1) + "->" + std::to_string(t + 2);
                for (Group g : {Group::Male, Group::Female}) {
                    std::vector<LevelObservation> subset;
                    for (const auto& o : per_transition[t])
                        if (groups.at(o.account) == g) subset.push_back(o);
                    emit_levels(group_to_string(g), tlabel, subset, 0);
                }
            }

            // Pooled four-level model, then three-level subgroup models.
            struct ModelSpec {
                std::string subgroup;
                LaggedDesignOptions opts;
            };
            std::vector<ModelSpec> specs;
            specs.push_back({"pooled", {}});
            for (Group g : {Group::Male, Group::Female}) {
                LaggedDesignOptions lopts;
                lopts.include_out_group = false;
                lopts.include_group_fe = false;
                for (const auto& [id, gg] : groups)
                    if (gg == g) lopts.account_filter.insert(id);
                specs.push_back({group_to_string(g), lopts});
            }

            for (const auto& spec : specs) {
                const auto design_full = lagged_design(transitions, groups, spec.opts);
                auto [design, dropped_cols] = detail::prune_constant_predictors(design_full);
                std::string dropped_note;
                for (const auto& d : dropped_cols) {
                    if (!dropped_note.empty()) dropped_note += ";";
                    dropped_note += d;
                }
                const auto res = ols_fe_clustered(design);
                for (std::size_t j = 0; j < design.n_predictors; ++j) {
                    const auto& ce = res.coefficients[j];
                    coef_csv.row({dlabel, spec.subgroup, ce.name, detail::fmt(ce.beta_standardized),
                                  detail::fmt(ce.se_clustered), detail::fmt(ce.t_stat),
                                  detail::fmt(ce.p_value), std::to_string(res.n_obs),
                                  std::to_string(res.n_clusters), detail::fmt(res.r_squared),
                                  dropped_note});
                    plot_csv.row({dlabel, spec.subgroup, ce.name, detail::fmt(ce.beta_standardized),
                                  detail::fmt(ce.beta_standardized - 1.96 * ce.se_clustered),
                                  detail::fmt(ce.beta_standardized + 1.96 * ce.se_clustered)});
                }
            }
        }

        level_csv.write_file((out / "level_similarity.csv").string());
        coef_csv.write_file((out / "coefficients.csv").string());
        plot_csv.write_file((out / "coefficient_plot.csv").string());
        std::ofstream lf(out / "level_similarity_summary.json", std::ios::binary);
        lf << level_summary.dump(2) << "\n";
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("feedback", e.what());
    }

    manifest.add_input(opt.in_path);
    manifest.write(out);
}

// ---------------------------------------------------------------------------
// simulate / sweep
// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::string out_dir;
    SimConfig config;
    bool export_log = false;
};

inline void run_simulate(const SimulateOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    try {
        const auto traj = run_simulation(opt.config);

        io::CsvWriter csv({"step", "between_center_cosine", "divergence", "within_male_pairwise",
                           "within_female_pairwise"});
        const bool have_pairwise = traj.within_male_pairwise.size() == traj.between_center_cosine.size();
        for (std::size_t t = 0; t < traj.between_center_cosine.size(); ++t) {
            csv.row({std::to_string(t), detail::fmt(traj.between_center_cosine[t]),
                     detail::fmt(1.0 - traj.between_center_cosine[t]),
                     have_pairwise ? detail::fmt(traj.within_male_pairwise[t]) : std::string(),
                     have_pairwise ? detail::fmt(traj.within_female_pairwise[t]) : std::string()});
        }
        csv.write_file((out / "trajectory.csv").string());

        if (opt.export_log) {
            const auto ds = export_synthetic_log(traj);
            write_log(ds, (out / "synthetic_log.jsonl").string(), LogFormat::JsonLines);
        }
    } catch (const std::exception& e) {
        throw StageError("simulate", e.what());
    }
    manifest.write(out);
}

struct SweepOptions {
    std::string out_dir;
    SimConfig base;
    std::vector<double> beta_grid = {0.0, 0.05, 0.1, 0.2, 0.3, 0.5};
    std::vector<double> tau_grid = {0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    std::size_t n_seeds = 8;
    unsigned threads = 1;
};

inline void run_sweep(const SweepOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    try {
        std::vector<std::uint64_t> seeds;
        for (std::size_t s = 0; s < opt.n_seeds; ++s) seeds.push_back(opt.base.seed + s);
        const auto res = sweep(opt.beta_grid, opt.tau_grid, seeds, opt.base, opt.threads);

        io::CsvWriter rows({"beta", "tau", "seed", "final_divergence", "final_between_cosine"});
        for (const auto& r : res.rows)
            rows.row({detail::fmt(r.beta), detail::fmt(r.tau), std::to_string(r.seed),
                      detail::fmt(r.final_divergence), detail::fmt(r.final_between_cosine)});
        rows.write_file((out / "sweep.csv").string());

        io::CsvWriter cells({"beta", "tau", "mean_divergence", "ci_half_width"});
        for (const auto& c : res.cells)
            cells.row({detail::fmt(c.beta), detail::fmt(c.tau), detail::fmt(c.mean_divergence),
                       detail::fmt(c.ci_half_width)});
        cells.write_file((out / "sweep_cells.csv").string());
    } catch (const std::exception& e) {
        throw StageError("sweep", e.what());
    }
    manifest.write(out);
}

// ---------------------------------------------------------------------------
// report: the full analysis bundle
// ---------------------------------------------------------------------------

struct ReportOptions {
    std::string in_path;
    std::string out_dir;
    std::string format;
    std::vector<int> windows = {30, 40, 50, 60, 70};
    std::vector<int> theta_grid = {10, 15, 20, 25, 30};
    int theta_feedback = 20;
    int stages = 3;
    std::size_t permutations = 1000;
    std::uint64_t seed = 0;
};

inline void run_report(const ReportOptions& opt, RunManifest manifest) {
    const auto out = detail::ensure_dir(opt.out_dir);
    const Dataset ds = detail::load_dataset(opt.in_path, opt.format);  // fail fast on parse
    const int t_max = ds.max_step();

    {
        DiversityOptions d;
        d.in_path = opt.in_path;
        d.format = opt.format;
        d.out_dir = (out / "diversity").string();
        d.windows.clear();
        for (int k : opt.windows)
            if (k <= t_max) d.windows.push_back(k);
        if (d.windows.empty()) d.windows = {t_max};
        d.stages = opt.stages;
        RunManifest m = manifest;
        m.subcommand = "report/diversity";
        run_diversity(d, m);
    }

    for (int theta : opt.theta_grid) {
        NetworkOptions n;
        n.in_path = opt.in_path;
        n.format = opt.format;
        n.out_dir = (out / ("network_theta" + std::to_string(theta))).string();
        n.theta = theta;
        n.window = "last" + std::to_string(std::min(50, t_max));
        n.permutations = opt.permutations;
        n.seed = opt.seed;
        RunManifest m = manifest;
        m.subcommand = "report/network";
        m.resolved_config["theta"] = std::to_string(theta);
        run_network(n, m);
    }

    {
        FeedbackOptions f;
        f.in_path = opt.in_path;
        f.format = opt.format;
        f.out_dir = (out / "feedback").string();
        f.stages = opt.stages;
        f.theta = opt.theta_feedback;
        f.seed = opt.seed;
        RunManifest m = manifest;
        m.subcommand = "report/feedback";
        run_feedback(f, m);
    }

    manifest.add_input(opt.in_path);
    manifest.write(out);
}

}  // namespace recaudit
