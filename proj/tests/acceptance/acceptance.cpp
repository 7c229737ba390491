// Acceptance suite: one PASS/FAIL line per criterion. `--criterion N` runs a single one.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include <commsynth/cost.hpp>
#include <commsynth/exec.hpp>
#include <commsynth/reach.hpp>
#include <commsynth/scenario.hpp>
#include <commsynth/synth.hpp>

#include "oracles/instances.hpp"
#include "oracles/oracles.hpp"

using namespace commsynth;

namespace {

// pinned tolerances
constexpr double kExactValueTol = 1e-6;
constexpr double kScenario4Value = 0.958, kScenario4ValueTol = 0.002;
constexpr double kScenario1Value = 0.99, kScenario1ValueTol = 0.005;
constexpr double kZeroCost = 1e-4;
constexpr double kTradeoffFloor = 0.01;
constexpr double kScenario4Relaxed = 0.92;
constexpr double kTcMin = 0.591, kTcOurs = 0.693, kTcTol = 0.05;
constexpr double kBoundMargin = 1e-6;
constexpr double kEntropyTol = 1e-6, kEntropyResidual = 1e-10;
constexpr double kUpperBoundMargin = 1e-9, kTruncatedDMargin = 1e-6, kTruncatedResidual = 1e-9;
constexpr double kFdStep = 1e-6, kFdRelTol = 1e-4, kFdFloor = 1.0;
constexpr int kScenario3Variables = 62581, kScenario3Constraints = 528;
constexpr double kLpResidual = 1e-8, kNlpResidual = 1e-6, kRowSum = 1e-9, kRoundTrip = 1e-6;
constexpr double kNightlyZeroCost = 1e-3;
constexpr int kRestarts = 20;

struct Result {
    bool pass = false;
    std::string detail;
};

std::string scenario(int k) { return std::string(COMMSYNTH_SCENARIO_DIR) + "/scenario" + std::to_string(k) + ".json"; }

SynthesisConfig config(std::optional<double> threshold, int restarts = kRestarts) {
    SynthesisConfig c;
    c.v_threshold = threshold;
    c.restarts = restarts;
    return c;
}

std::set<std::string> comm_support(const SynthesisResult& r, const std::string& obs) {
    const auto& g = *r.game;
    std::set<std::string> out;
    for (int o = 0; o < g.num_observations(); ++o) {
        if (g.observation_label(o) != obs) continue;
        for (int c = 0; c < g.num_coalitions(); ++c)
            if (r.policy.comm_policy[o][c] > 1e-9) out.insert(g.coalitions()[c].to_string());
    }
    return out;
}

std::string join(const std::set<std::string>& s) {
    std::string out;
    for (const auto& v : s) out += (out.empty() ? "" : " ") + v;
    return out;
}

Result stage1_values() {
    std::string detail;
    bool pass = true;
    auto check = [&](int k, double expect, double tolerance) {
        auto t0 = std::chrono::steady_clock::now();
        auto sc = load_scenario(scenario(k));
        double v = optimal_reach_avoid_value(sc.game, sc.spec).v_star;
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = std::abs(v - expect) <= tolerance;
        pass = pass && ok;
        detail += fmt::format("s{} v*={:.6f} (want {}±{}, {:.1f}s){} ", k, v, expect, tolerance, secs, ok ? "" : " MISS");
    };
    check(2, 1.0, kExactValueTol);
    check(4, kScenario4Value, kScenario4ValueTol);
    check(1, kScenario1Value, kScenario1ValueTol);
    return {pass, detail};
}

Result zero_cost_synthesis() {
    std::string detail;
    bool pass = true;
    for (int k : {2, 3}) {
        auto sc = load_scenario(scenario(k));
        auto r = synthesize(sc.game, sc.spec, config(1.0));
        bool ok = r.report.dbar_value <= kZeroCost;
        pass = pass && ok;
        detail += fmt::format("s{} dbar={:.3g} restarts={} {:.1f}s; ", k, r.report.dbar_value, r.report.restarts_used,
                              r.report.wall_time);
        if (k == 3) {
            const std::vector<std::pair<std::string, std::string>> table = {
                {"(1,1,2)", "{1,2}"}, {"(2,1,2)", "{1,3}"}, {"(0,0,0)", "{1,2}"}};
            for (const auto& [obs, want] : table) {
                auto sup = comm_support(r, obs);
                bool match = sup == std::set<std::string>{want};
                pass = pass && match;
                detail += fmt::format("{}->{}{} ", obs, join(sup), match ? "" : " (want " + want + ")");
            }
        }
    }
    return {pass, detail};
}

Result scenario4_tradeoff() {
    auto sc = load_scenario(scenario(4));
    auto tight = synthesize(sc.game, sc.spec, config(std::nullopt));
    auto relaxed = synthesize(sc.game, sc.spec, config(kScenario4Relaxed));
    double min_tight = tight.report.dbar_value;
    bool pass = min_tight > kTradeoffFloor && relaxed.report.dbar_value <= kZeroCost;
    return {pass, fmt::format("thr v*={:.6f} min dbar={:.4g} over {} restarts ({:.0f}s); thr {} dbar={:.3g} achieved={:.4f}",
                              tight.report.v_threshold, min_tight, tight.report.restarts_used, tight.report.wall_time,
                              kScenario4Relaxed, relaxed.report.dbar_value, relaxed.report.achieved_value)};
}

Result baseline_comparison() {
    auto sc = load_scenario(scenario(2));
    auto ours = synthesize(sc.game, sc.spec, config(1.0));
    auto cfg = config(1.0);
    cfg.total_correlation = true;
    auto tc = synthesize(sc.game, sc.spec, cfg);
    double tc_min = tc.report.dbar_value;
    double tc_ours = CostModel(ours.region->layout, true).value(ours.x);
    const auto& Ltc = tc.region->layout;
    double dbar_tc = CostModel(Ltc).value(with_cheapest_comm(Ltc, tc.x));
    double dbar_ours = ours.report.dbar_value;
    bool pass = std::abs(tc_min - kTcMin) <= kTcTol && std::abs(tc_ours - kTcOurs) <= kTcTol && tc_min < tc_ours &&
                dbar_tc > 0.0 && dbar_ours <= kZeroCost;
    return {pass, fmt::format("TC_min={:.4f} TC_ours={:.4f} dbar(TC-min policy)={:.4g} dbar(ours)={:.3g}", tc_min,
                              tc_ours, dbar_tc, dbar_ours)};
}

oracle::Shape small_shape() {
    oracle::Shape s;
    s.agents = 2;
    s.max_states = 3;
    s.max_obs = 2;
    s.max_actions = 2;
    s.avoid_fraction = 0.3;
    return s;
}

Result bound_sweep() {
    std::mt19937_64 rng(1001);
    int violations = 0;
    double worst_slack = 1e300, max_gap = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = oracle::random_instance(rng, small_shape(), trial % 2);
        auto pair = oracle::random_policy(rng, inst.augmented);
        auto b = check_theorem1_bound(inst.augmented, pair);
        double bound = std::sqrt(1.0 - std::exp(-std::max(b.d_value, 0.0)));
        double gap = b.p_full - b.p_restricted;
        if (gap > bound + kBoundMargin) ++violations;
        worst_slack = std::min(worst_slack, bound - gap);
        max_gap = std::max(max_gap, gap);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {violations == 0, fmt::format("100 instances, violations={}, min slack={:.3g}, max gap={:.3g}, {:.1f}s",
                                         violations, worst_slack, max_gap, secs)};
}

Result entropy_equivalence() {
    std::mt19937_64 rng(2002);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = oracle::random_instance(rng, small_shape(), trial % 2);
        auto pair = oracle::random_policy(rng, inst.augmented);
        auto L = full_layout(inst.augmented);
        auto x = occupancy_from_policy(L, pair);
        auto f = oracle::forward(inst.augmented, pair, kEntropyResidual);
        if (f.residual > kEntropyResidual) return {false, fmt::format("trial {} residual {:.3g}", trial, f.residual)};
        worst = std::max(worst, std::abs(CostModel(L).entropy(x) - f.entropy));
    }
    return {worst <= kEntropyTol, fmt::format("50 instances, max |H_closed - H_paths|={:.3g}", worst)};
}

Result upper_bound_direction() {
    std::mt19937_64 rng(3003);
    double worst_g = -1e300, worst_d = -1e300;
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = oracle::random_instance(rng, small_shape(), trial % 2);
        auto pair = oracle::random_policy(rng, inst.augmented);
        auto L = full_layout(inst.augmented);
        auto x = occupancy_from_policy(L, pair);
        auto b = CostModel(L).breakdown(x);
        TruncatedOptions opt;
        opt.mass_floor = 1e-12;
        auto td = truncated_exact_D(inst.augmented, pair, opt);
        if (td.residual_mass > kTruncatedResidual)
            return {false, fmt::format("trial {} residual {:.3g}", trial, td.residual_mass)};
        for (std::size_t i = 0; i < b.g_agent.size(); ++i) worst_g = std::max(worst_g, td.g_agent[i] - b.g_agent[i]);
        for (std::size_t c = 0; c < b.g_coalition.size(); ++c)
            worst_g = std::max(worst_g, td.g_coalition[c] - b.g_coalition[c]);
        worst_d = std::max(worst_d, td.d - b.dbar);
    }
    bool pass = worst_g <= kUpperBoundMargin && worst_d <= kTruncatedDMargin;
    return {pass, fmt::format("50 instances, max(G - Gbar)={:.3g}, max(D - dbar)={:.3g}", worst_g, worst_d)};
}

Result gradient_check() {
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double worst = 0.0;
    int entries = 0;
    for (int inst_i = 0; inst_i < 10; ++inst_i) {
        auto inst = oracle::random_instance(rng, small_shape(), inst_i % 2);
        auto L = full_layout(inst.augmented);
        CostModel model(L);
        for (int point = 0; point < 20; ++point) {
            auto x = OccupancyVector::zeros(L);
            for (auto& v : x.sa) v = u(rng);
            for (auto& v : x.oc) v = u(rng);
            CostGradient grad;
            model.gradient(x, grad);
            auto probe = [&](double& slot, double analytic) {
                double keep = slot;
                slot = keep + kFdStep;
                double fp = model.value(x);
                slot = keep - kFdStep;
                double fm = model.value(x);
                slot = keep;
                double fd = (fp - fm) / (2 * kFdStep);
                worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), kFdFloor));
                ++entries;
            };
            for (std::size_t v = 0; v < x.sa.size(); ++v) probe(x.sa[v], grad.sa[v]);
            for (std::size_t k = 0; k < x.oc.size(); ++k) probe(x.oc[k], grad.oc[k]);
        }
    }
    return {worst <= kFdRelTol, fmt::format("10 instances x 20 points, {} entries, max rel err={:.3g}", entries, worst)};
}

Result structural_reproduction() {
    auto sc = load_scenario(scenario(3), true);
    auto aug = augment_with_sink(sc.game, sc.spec);
    auto region = assemble_feasible_region(aug, 1.0, RegionLayout::dense);
    int vars = region.num_variables(), cons = region.num_constraints();
    return {vars == kScenario3Variables,
            fmt::format("variables={} (want {}), constraints={} = {} flow + {} coupling + 1 value (delta from {}: {})",
                        vars, kScenario3Variables, cons, region.num_flow_rows, region.num_coupling_rows,
                        kScenario3Constraints, cons - kScenario3Constraints)};
}

Result hygiene() {
    std::string detail;
    bool pass = true;
    double lp_res = 0.0, nlp_res = 0.0, row_err = 0.0, trip = 0.0;
    for (int k : {2, 3, 4}) {
        auto sc = load_scenario(scenario(k));
        lp_res = std::max(lp_res, optimal_reach_avoid_value(sc.game, sc.spec).flow_residual);
    }
    auto check_rows = [&](const PolicyPair& p) {
        for (const auto& row : p.action_policy) {
            double s = 0.0;
            for (const auto& ap : row) s += ap.prob;
            row_err = std::max(row_err, std::abs(s - 1.0));
        }
        for (const auto& row : p.comm_policy) {
            double s = 0.0;
            for (double v : row) s += v;
            row_err = std::max(row_err, std::abs(s - 1.0));
        }
    };
    for (int k : {2, 3}) {
        auto sc = load_scenario(scenario(k));
        auto r = synthesize(sc.game, sc.spec, config(std::nullopt));
        nlp_res = std::max({nlp_res, r.report.flow_residual, r.report.coupling_residual});
        check_rows(r.policy);
    }
    std::mt19937_64 rng(5005);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = oracle::random_instance(rng, small_shape(), 1);
        SynthesisConfig c = config(std::nullopt, 3);
        c.max_iterations = 300;
        c.seed = trial;
        auto r = synthesize(inst.game, inst.spec, c);
        nlp_res = std::max({nlp_res, r.report.flow_residual, r.report.coupling_residual});
        check_rows(r.policy);
        auto f = oracle::forward(*r.game, r.policy, 1e-14);
        auto back = oracle::occupancy(r.region->layout, r.policy, f);
        for (std::size_t v = 0; v < back.sa.size(); ++v) trip = std::max(trip, std::abs(back.sa[v] - r.x.sa[v]));
        trip = std::max(trip, std::abs(f.reach - r.report.achieved_value));
    }
    auto sc = load_scenario(scenario(2));
    auto c1 = config(std::nullopt, 6);
    c1.seed = 17;
    c1.threads = 1;
    auto a = synthesize(sc.game, sc.spec, c1);
    auto b = synthesize(sc.game, sc.spec, c1);
    c1.threads = 3;
    auto c = synthesize(sc.game, sc.spec, c1);
    bool same = a.x.sa == b.x.sa && a.x.oc == b.x.oc && a.x.sa == c.x.sa && a.x.oc == c.x.oc &&
                a.report.dbar_value == c.report.dbar_value;
    pass = lp_res <= kLpResidual && nlp_res <= kNlpResidual && row_err <= kRowSum && trip <= kRoundTrip && same;
    detail = fmt::format("LP flow res={:.3g}, NLP res={:.3g}, row-sum err={:.3g}, round trip={:.3g}, reproducible={}",
                         lp_res, nlp_res, row_err, trip, same);
    return {pass, detail};
}

Result nightly_scenario1() {
    auto sc = load_scenario(scenario(1));
    auto r = synthesize(sc.game, sc.spec, config(std::nullopt));
    bool concentrated = true;
    const auto& g = *r.game;
    for (int o = 0; o < g.num_observations(); ++o) {
        if (r.policy.zero_mass_obs[o]) continue;
        if (r.policy.comm_policy[o][0] < 1.0 - 1e-9) concentrated = false;
    }
    bool pass = r.report.dbar_value <= kNightlyZeroCost && concentrated;
    return {pass, fmt::format("dbar={:.3g}, comm on {} at every visited observation: {}, {:.0f}s", r.report.dbar_value,
                              g.coalitions()[0].to_string(), concentrated, r.report.wall_time)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
        {"1", stage1_values},          {"2", zero_cost_synthesis},  {"3", scenario4_tradeoff},
        {"4", baseline_comparison},    {"5", bound_sweep},       {"6", entropy_equivalence},
        {"7", upper_bound_direction},  {"8", gradient_check},       {"9", structural_reproduction},
        {"10", hygiene},               {"nightly", nightly_scenario1},
    };
    std::string only;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0) only = argv[i + 1];
    int failed = 0, ran = 0;
    for (const auto& [id, fn] : criteria) {
        if (only.empty() ? id == "nightly" : id != only) continue;
        ++ran;
        Result r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        fmt::print("criterion {:>7} {}  {}\n", id, r.pass ? "PASS" : "FAIL", r.detail);
        std::fflush(stdout);
        if (!r.pass) ++failed;
    }
    if (ran == 0) {
        fmt::print(stderr, "unknown criterion '{}'\n", only);
        return 2;
    }
    return failed == 0 ? 0 : 1;
}
