#pragma once
// Command-line front end. run_cli() parses argv, resolves options (flags
// override an optional JSON config file), dispatches to the pipeline
// functions, and maps failures to exit codes: 0 success, 1 data or
// validation error, 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recaudit/pipeline.hpp"

namespace recaudit {

namespace detail {

inline void apply_sim_config_file(const std::string& path, SimConfig& cfg) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.contains("n_agents")) cfg.n_agents = j["n_agents"].get<int>();
    if (j.contains("n_issues")) cfg.n_issues = j["n_issues"].get<int>();
    if (j.contains("n_steps")) cfg.n_steps = j["n_steps"].get<int>();
    if (j.contains("beta")) cfg.beta = j["beta"].get<double>();
    if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("recs_per_step")) cfg.recs_per_step = j["recs_per_step"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sampled_update")) cfg.sampled_update = j["sampled_update"].get<bool>();
}

inline std::map<std::string, std::string> sim_config_map(const SimConfig& c) {
    return {{"n_agents", std::to_string(c.n_agents)},
            {"n_issues", std::to_string(c.n_issues)},
            {"n_steps", std::to_string(c.n_steps)},
            {"beta", fmt(c.beta)},
            {"tau", fmt(c.tau)},
            {"alpha", fmt(c.alpha)},
            {"recs_per_step", std::to_string(c.recs_per_step)},
            {"seed", std::to_string(c.seed)},
            {"sampled_update", c.sampled_update ? "true" : "false"}};
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"recaudit: recommendation-trajectory audit analytics and simulation"};
    app.require_subcommand(1);

    std::string in_path, out_dir, format;
    std::uint64_t seed = 0;

    auto add_io = [&](CLI::App* cmd, bool needs_in) {
        if (needs_in)
            cmd->add_option("--in", in_path, "input trajectory log (.jsonl or .csv)")->required();
        cmd->add_option("--out", out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--format", format, "input format override: jsonl|csv");
    };

    // ingest
    auto* c_ingest = app.add_subcommand("ingest", "validate a log and emit a normalized copy");
    add_io(c_ingest, true);

    // diversity
    auto* c_div = app.add_subcommand("diversity", "entropy, similarity, and issue-share tables");
    add_io(c_div, true);
    std::string windows_arg = "50";
    int stages = 3;
    std::string interest_arg;
    bool sim_on_categories = false;
    c_div->add_option("--windows", windows_arg, "comma-separated last-K windows (default 50)");
    c_div->add_option("--stages", stages, "number of equal stages for the similarity series");
    c_div->add_option("--interest", interest_arg, "comma-separated interest categories");
    c_div->add_flag("--category-similarity", sim_on_categories,
                    "stage similarity over category vectors instead of issue vectors");

    // network
    auto* c_net = app.add_subcommand("network", "co-exposure networks, communities, permutation tests");
    add_io(c_net, true);
    int theta = 20;
    double gamma = 1.0;
    std::string window_arg = "last50";
    std::size_t permutations = 1000;
    bool all_content = false, retain_isolated = false;
    c_net->add_option("--theta", theta, "co-exposure weight threshold (default 20)");
    c_net->add_option("--gamma", gamma, "modularity resolution (default 1.0)");
    c_net->add_option("--window", window_arg, "analysis window: lastK, firstK, A-B, all");
    c_net->add_option("--permutations", permutations, "label reshuffles for group tests");
    c_net->add_flag("--all-content", all_content, "use all exposures, not only political ones");
    c_net->add_flag("--retain-isolated", retain_isolated,
                    "keep accounts with no qualifying exposure as isolated nodes");

    // feedback
    auto* c_fb = app.add_subcommand("feedback", "lagged multi-level similarity and regressions");
    add_io(c_fb, true);
    int fb_stages = 3, fb_theta = 20;
    double fb_gamma = 1.0;
    std::string direction = "both";
    c_fb->add_option("--stages", fb_stages, "number of stages (default 3)");
    c_fb->add_option("--direction", direction, "both | e2c | c2e");
    c_fb->add_option("--theta", fb_theta, "threshold for the community network");
    c_fb->add_option("--gamma", fb_gamma, "modularity resolution");

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "run the collaborative-filtering model");
    c_sim->add_option("--out", out_dir, "output directory")->required();
    SimConfig sim_cfg;
    std::string sim_config_path;
    bool export_log = false;
    auto* o_agents = c_sim->add_option("--agents", sim_cfg.n_agents, "number of agents (even)");
    auto* o_steps = c_sim->add_option("--steps", sim_cfg.n_steps, "number of steps");
    auto* o_beta = c_sim->add_option("--beta", sim_cfg.beta, "gender-homophily weight");
    auto* o_tau = c_sim->add_option("--tau", sim_cfg.tau, "softmax temperature");
    auto* o_alpha = c_sim->add_option("--alpha", sim_cfg.alpha, "learning rate");
    auto* o_recs = c_sim->add_option("--recs", sim_cfg.recs_per_step, "recommendations per step");
    auto* o_seed_sim = c_sim->add_option("--seed", sim_cfg.seed, "simulation seed");
    auto* o_sampled = c_sim->add_flag("--sampled-update", sim_cfg.sampled_update,
                                      "update from sampled sources instead of the full expectation");
    c_sim->add_option("--config", sim_config_path, "JSON config file (flags override it)");
    c_sim->add_flag("--export-log", export_log, "also write a synthetic trajectory log");

    // sweep
    auto* c_sweep = app.add_subcommand("sweep", "beta x tau sensitivity grid");
    c_sweep->add_option("--out", out_dir, "output directory")->required();
    SimConfig sweep_cfg;
    std::string sweep_config_path;
    std::string beta_grid_arg = "0,0.05,0.1,0.2,0.3,0.5";
    std::string tau_grid_arg = "0.02,0.05,0.1,0.2,0.5,1.0";
    std::size_t n_seeds = 8;
    unsigned threads = 1;
    auto* o_sweep_seed = c_sweep->add_option("--seed", sweep_cfg.seed, "first seed of the block");
    auto* o_sweep_agents = c_sweep->add_option("--agents", sweep_cfg.n_agents, "agents per run");
    auto* o_sweep_steps = c_sweep->add_option("--steps", sweep_cfg.n_steps, "steps per run");
    c_sweep->add_option("--beta-grid", beta_grid_arg, "comma-separated beta values");
    c_sweep->add_option("--tau-grid", tau_grid_arg, "comma-separated tau values");
    c_sweep->add_option("--seeds", n_seeds, "seeds per cell");
    c_sweep->add_option("--threads", threads, "worker threads");
    c_sweep->add_option("--config", sweep_config_path, "JSON config file (flags override it)");

    // report
    auto* c_rep = app.add_subcommand("report", "full analysis bundle over one dataset");
    add_io(c_rep, true);
    std::string theta_grid_arg = "10,15,20,25,30";
    std::string rep_windows_arg = "30,40,50,60,70";
    int rep_stages = 3;
    int rep_feedback_theta = 20;
    std::size_t rep_permutations = 1000;
    c_rep->add_option("--theta-grid", theta_grid_arg, "thresholds for the network sweep");
    c_rep->add_option("--windows", rep_windows_arg, "last-K windows for diversity");
    c_rep->add_option("--stages", rep_stages, "stages for feedback");
    c_rep->add_option("--feedback-theta", rep_feedback_theta,
                      "threshold for the feedback community network");
    c_rep->add_option("--permutations", rep_permutations, "label reshuffles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    RunManifest manifest;
    manifest.master_seed = seed;
    manifest.timestamp = RunManifest::now_utc();

    try {
        if (c_ingest->parsed()) {
            manifest.subcommand = "ingest";
            manifest.resolved_config = {{"in", in_path}, {"format", format}};
            run_ingest({in_path, out_dir, format}, manifest);
        } else if (c_div->parsed()) {
            DiversityOptions opt;
            opt.in_path = in_path;
            opt.out_dir = out_dir;
            opt.format = format;
            opt.windows = detail::parse_int_list(windows_arg);
            opt.stages = stages;
            if (!interest_arg.empty()) {
                opt.interest_categories.clear();
                for (const auto& c : detail::split_list(interest_arg))
                    opt.interest_categories.insert(c);
            }
            opt.similarity_on_categories = sim_on_categories;
            manifest.subcommand = "diversity";
            manifest.resolved_config = {{"in", in_path},
                                        {"windows", windows_arg},
                                        {"stages", std::to_string(stages)},
                                        {"category_similarity", sim_on_categories ? "true" : "false"}};
            run_diversity(opt, manifest);
        } else if (c_net->parsed()) {
            NetworkOptions opt;
            opt.in_path = in_path;
            opt.out_dir = out_dir;
            opt.format = format;
            opt.theta = theta;
            opt.gamma = gamma;
            opt.window = window_arg;
            opt.permutations = permutations;
            opt.seed = seed;
            opt.political_only = !all_content;
            opt.retain_isolated = retain_isolated;
            manifest.subcommand = "network";
            manifest.resolved_config = {{"in", in_path},
                                        {"theta", std::to_string(theta)},
                                        {"gamma", detail::fmt(gamma)},
                                        {"window", window_arg},
                                        {"permutations", std::to_string(permutations)},
                                        {"political_only", all_content ? "false" : "true"},
                                        {"retain_isolated", retain_isolated ? "true" : "false"}};
            run_network(opt, manifest);
        } else if (c_fb->parsed()) {
            FeedbackOptions opt;
            opt.in_path = in_path;
            opt.out_dir = out_dir;
            opt.format = format;
            opt.stages = fb_stages;
            opt.direction = direction;
            opt.theta = fb_theta;
            opt.gamma = fb_gamma;
            opt.seed = seed;
            manifest.subcommand = "feedback";
            manifest.resolved_config = {{"in", in_path},
                                        {"stages", std::to_string(fb_stages)},
                                        {"direction", direction},
                                        {"theta", std::to_string(fb_theta)},
                                        {"gamma", detail::fmt(fb_gamma)}};
            run_feedback(opt, manifest);
        } else if (c_sim->parsed()) {
            SimConfig cfg;  // defaults
            if (!sim_config_path.empty()) detail::apply_sim_config_file(sim_config_path, cfg);
            if (o_agents->count()) cfg.n_agents = sim_cfg.n_agents;
            if (o_steps->count()) cfg.n_steps = sim_cfg.n_steps;
            if (o_beta->count()) cfg.beta = sim_cfg.beta;
            if (o_tau->count()) cfg.tau = sim_cfg.tau;
            if (o_alpha->count()) cfg.alpha = sim_cfg.alpha;
            if (o_recs->count()) cfg.recs_per_step = sim_cfg.recs_per_step;
            if (o_seed_sim->count()) cfg.seed = sim_cfg.seed;
            if (o_sampled->count()) cfg.sampled_update = sim_cfg.sampled_update;
            manifest.subcommand = "simulate";
            manifest.master_seed = cfg.seed;
            manifest.resolved_config = detail::sim_config_map(cfg);
            manifest.resolved_config["export_log"] = export_log ? "true" : "false";
            run_simulate({out_dir, cfg, export_log}, manifest);
        } else if (c_sweep->parsed()) {
            SweepOptions opt;
            SimConfig cfg;
            if (!sweep_config_path.empty()) detail::apply_sim_config_file(sweep_config_path, cfg);
            if (o_sweep_seed->count()) cfg.seed = sweep_cfg.seed;
            if (o_sweep_agents->count()) cfg.n_agents = sweep_cfg.n_agents;
            if (o_sweep_steps->count()) cfg.n_steps = sweep_cfg.n_steps;
            opt.base = cfg;
            opt.out_dir = out_dir;
            opt.beta_grid = detail::parse_double_list(beta_grid_arg);
            opt.tau_grid = detail::parse_double_list(tau_grid_arg);
            opt.n_seeds = n_seeds;
            opt.threads = threads;
            manifest.subcommand = "sweep";
            manifest.master_seed = cfg.seed;
            manifest.resolved_config = detail::sim_config_map(cfg);
            manifest.resolved_config["beta_grid"] = beta_grid_arg;
            manifest.resolved_config["tau_grid"] = tau_grid_arg;
            manifest.resolved_config["seeds"] = std::to_string(n_seeds);
            run_sweep(opt, manifest);
        } else if (c_rep->parsed()) {
            ReportOptions opt;
            opt.in_path = in_path;
            opt.out_dir = out_dir;
            opt.format = format;
            opt.windows = detail::parse_int_list(rep_windows_arg);
            opt.theta_grid = detail::parse_int_list(theta_grid_arg);
            opt.stages = rep_stages;
            opt.theta_feedback = rep_feedback_theta;
            opt.permutations = rep_permutations;
            opt.seed = seed;
            manifest.subcommand = "report";
            manifest.resolved_config = {{"in", in_path},
                                        {"windows", rep_windows_arg},
                                        {"theta_grid", theta_grid_arg},
                                        {"stages", std::to_string(rep_stages)},
                                        {"feedback_theta", std::to_string(rep_feedback_theta)},
                                        {"permutations", std::to_string(rep_permutations)}};
            run_report(opt, manifest);
        }
    } catch (const StageError& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace recaudit
