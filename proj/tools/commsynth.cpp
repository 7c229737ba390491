#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commsynth/error.hpp"
#include "commsynth/exec.hpp"
#include "commsynth/reach.hpp"
#include "commsynth/report.hpp"
#include "commsynth/scenario.hpp"
#include "commsynth/synth.hpp"

namespace fs = std::filesystem;
using namespace commsynth;

namespace {

enum Exit { kOk = 0, kInput = 2, kLp = 3, kInfeasible = 4, kGuard = 5 };

bool quiet = false;

template <typename... Args>
void progress(fmt::format_string<Args...> f, Args&&... args) {
    if (!quiet) fmt::print(stderr, "{}\n", fmt::format(f, std::forward<Args>(args)...));
}

struct SolveArgs {
    std::string scenario;
    std::optional<double> threshold;
    int restarts = 20;
    int max_iterations = 5000;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out = ".";
};

SynthesisConfig make_config(const SolveArgs& a) {
    SynthesisConfig c;
    c.v_threshold = a.threshold;
    c.restarts = a.restarts;
    c.max_iterations = a.max_iterations;
    c.seed = a.seed;
    c.threads = a.threads;
    return c;
}

void add_solver_flags(CLI::App* cmd, SolveArgs& a) {
    cmd->add_option("scenario", a.scenario, "scenario config")->required()->check(CLI::ExistingFile);
    cmd->add_option("--threshold", a.threshold, "reach-avoid threshold (default v*)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--restarts", a.restarts, "multi-start count")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iterations", a.max_iterations, "iterations per restart")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "restart schedule seed");
    cmd->add_option("--threads", a.threads, "workers (0: COMMSYNTH_THREADS or machine)")->check(CLI::NonNegativeNumber);
}

int cmd_value(const std::string& path) {
    auto sc = load_scenario(path);
    auto r = optimal_reach_avoid_value(sc.game, sc.spec);
    fmt::print("v* = {:.6f}\n", r.v_star);
    return kOk;
}

int cmd_solve(const SolveArgs& a) {
    auto sc = load_scenario(a.scenario);
    auto config = make_config(a);
    progress("{}: {} joint states, {} coalitions", sc.name, sc.game.num_states(), sc.game.num_coalitions());
    auto res = synthesize(sc.game, sc.spec, config);
    auto run = make_run_report(sc.name, config, res.report);
    auto t0 = std::chrono::steady_clock::now();
    run.bound = check_theorem1_bound(*res.game, res.policy);
    run.timings["bound_check"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.report.dbar_value > 1e-4)
        run.warnings.push_back(fmt::format("zero communication cost not attained at threshold {:.6f} (dbar {:.6g})",
                                           res.report.v_threshold, res.report.dbar_value));

    fs::create_directories(a.out);
    run.outputs.push_back("policy.json");
    run.outputs.push_back("report.json");
    for (int i = 0; i < res.game->num_agents(); ++i) run.outputs.push_back(fmt::format("occupancy_agent_{}.csv", i));
    auto report_json = to_json(run);
    write_json_file(policy_to_json(*res.game, res.policy, report_json), fs::path(a.out) / "policy.json");
    write_json_file(report_json, fs::path(a.out) / "report.json");
    for (int i = 0; i < res.game->num_agents(); ++i)
        write_heatmap_csv(agent_heatmap(res.region->layout, res.x, i),
                          fs::path(a.out) / fmt::format("occupancy_agent_{}.csv", i));

    for (const auto& w : run.warnings) fmt::print(stderr, "warning: {}\n", w);
    fmt::print("v* = {:.6f}\nthreshold = {:.6f}\nachieved = {:.6f}\ndbar = {:.6g}\nstatus = {}\n", run.v_star,
               run.v_threshold, run.achieved_value, run.dbar_value, run.status);
    progress("{} restarts, best #{}, {} iterations, {:.2f} s", run.restarts_used, run.best_restart, run.iterations,
             run.timings["total"]);
    return kOk;
}

Scenario load_with_k(const std::string& path, std::optional<int> K) {
    if (!K) return load_scenario(path);
    auto cfg = scenario_config_from_json(read_json_file(path));
    cfg.K = *K;
    return build_scenario(cfg);
}

int cmd_evaluate(const std::string& scenario, const std::string& policy, std::optional<int> K) {
    auto sc = load_with_k(scenario, K);
    auto aug = augment_with_sink(sc.game, sc.spec);
    PolicyReadOptions opts;
    opts.ignore_comm = K.has_value();
    auto pair = policy_from_json(aug, read_json_file(policy), opts);
    auto b = check_theorem1_bound(aug, pair);
    fmt::print("p_full = {:.6f}\np_restricted = {:.6f}\ngap = {:.6g}\ndbar = {:.6g}\nbound = {:.6g}\nsatisfied = {}\n",
               b.p_full, b.p_restricted, b.p_full - b.p_restricted, b.d_value, b.bound, b.satisfied);
    return kOk;
}

int cmd_baseline(const SolveArgs& a) {
    auto sc = load_scenario(a.scenario);
    auto config = make_config(a);
    progress("minimizing dbar");
    auto ours = synthesize(sc.game, sc.spec, config);
    config.total_correlation = true;
    config.v_threshold = ours.report.v_threshold;
    progress("minimizing total correlation");
    auto tc = synthesize(sc.game, sc.spec, config);

    const auto& L = ours.region->layout;
    const auto& Ltc = tc.region->layout;
    double tc_ours = CostModel(L, true).value(ours.x);
    double tc_min = tc.report.dbar_value;
    double dbar_ours = ours.report.dbar_value;
    double dbar_tc = CostModel(Ltc).value(with_cheapest_comm(Ltc, tc.x));
    fmt::print("threshold = {:.6f}\n", ours.report.v_threshold);
    fmt::print("tc_min = {:.6f}\ntc_ours = {:.6f}\n", tc_min, tc_ours);
    fmt::print("dbar_tc_policy = {:.6g}\ndbar_ours = {:.6g}\n", dbar_tc, dbar_ours);
    fmt::print("achieved_tc_policy = {:.6f}\nachieved_ours = {:.6f}\n", tc.report.achieved_value,
               ours.report.achieved_value);
    return kOk;
}

int cmd_simulate(const std::string& scenario, const std::string& policy, SimulationOptions opts,
                 const std::string& trajectories) {
    auto sc = load_scenario(scenario);
    auto aug = augment_with_sink(sc.game, sc.spec);
    auto pair = policy_from_json(aug, read_json_file(policy));
    SimulationResult r;
    if (!trajectories.empty()) {
        std::ofstream out(trajectories);
        if (!out) throw InputError(fmt::format("cannot write {}", trajectories));
        r = simulate(aug, pair, opts, &out);
    } else {
        r = simulate(aug, pair, opts);
    }
    fmt::print("estimate = {:.6f}\nstderr = {:.6g}\nepisodes = {}\nsuccesses = {}\nunfinished = {}\n", r.estimate,
               r.standard_error, r.episodes, r.successes, r.unfinished);
    return kOk;
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::input: return kInput;
        case ErrorKind::lp_failure: return kLp;
        case ErrorKind::infeasible_threshold: return kInfeasible;
        case ErrorKind::guard: return kGuard;
    }
    return kInput;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint action and communication policy synthesis for cooperative multi-agent MDPs"};
    app.require_subcommand(1);
    app.add_flag("-q,--quiet", quiet, "suppress progress on stderr");

    std::string value_path;
    auto* value = app.add_subcommand("value", "print the optimal reach-avoid value under full communication");
    value->add_option("scenario", value_path, "scenario config")->required()->check(CLI::ExistingFile);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "synthesize an action and communication policy pair");
    add_solver_flags(solve, solve_args);
    solve->add_option("--out", solve_args.out, "output directory");

    std::string eval_scenario, eval_policy;
    std::optional<int> eval_k;
    auto* evaluate = app.add_subcommand("evaluate", "check the performance-loss bound of a policy file");
    evaluate->add_option("scenario", eval_scenario, "scenario config")->required()->check(CLI::ExistingFile);
    evaluate->add_option("policy", eval_policy, "policy file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--K", eval_k, "override the coalition size; comm rows are then ignored")
        ->check(CLI::PositiveNumber);

    SolveArgs base_args;
    auto* baseline = app.add_subcommand("baseline-tc", "compare against total-correlation minimization");
    add_solver_flags(baseline, base_args);

    std::string sim_scenario, sim_policy, sim_traj, sim_mode = "full";
    SimulationOptions sim_opts;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of the reach-avoid probability");
    sim->add_option("scenario", sim_scenario, "scenario config")->required()->check(CLI::ExistingFile);
    sim->add_option("policy", sim_policy, "policy file")->required()->check(CLI::ExistingFile);
    sim->add_option("--episodes", sim_opts.episodes, "episode count")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_opts.seed, "base seed");
    sim->add_option("--max-steps", sim_opts.max_steps, "step cap per episode")->check(CLI::PositiveNumber);
    sim->add_option("--mode", sim_mode, "full or restricted")->check(CLI::IsMember({"full", "restricted"}));
    sim->add_option("--trajectories", sim_traj, "write per-step trajectories here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInput;
    }

    try {
        if (*value) return cmd_value(value_path);
        if (*solve) return cmd_solve(solve_args);
        if (*evaluate) return cmd_evaluate(eval_scenario, eval_policy, eval_k);
        if (*baseline) return cmd_baseline(base_args);
        if (*sim) {
            sim_opts.mode = sim_mode == "restricted" ? ExecutionMode::restricted : ExecutionMode::full;
            return cmd_simulate(sim_scenario, sim_policy, sim_opts, sim_traj);
        }
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code(e);
    } catch (const nlohmann::json::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInput;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInput;
    }
    return kInput;
}
