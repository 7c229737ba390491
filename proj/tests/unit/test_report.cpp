#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include <commsynth/error.hpp>
#include <commsynth/report.hpp>
#include <commsynth/scenario.hpp>

#include "oracles/instances.hpp"

using namespace commsynth;

TEST(Report, JsonRoundTripWithNonFiniteFields) {
    RunReport r;
    r.scenario = "s";
    r.config = {{"restarts", 3}};
    r.v_star = 0.5;
    r.v_threshold = 0.25;
    r.achieved_value = std::numeric_limits<double>::quiet_NaN();
    r.dbar_value = std::numeric_limits<double>::infinity();
    r.breakdown.h = 1.0;
    r.breakdown.g_agent = {0.1, -std::numeric_limits<double>::infinity()};
    r.breakdown.g_coalition = {0.2};
    r.bound = BoundCheck{1.0, 0.9, 0.01, 0.0999, true};
    r.timings = {{"stage1", 0.5}, {"total", 1.5}};
    r.status = "converged";
    r.restarts = {RestartRecord{0, "stage1-uniform", 0.1, 0.01, 7, true, false}};
    r.warnings = {"w"};
    r.outputs = {"report.json"};
    auto j = to_json(r);
    EXPECT_EQ(j["achieved_value"], "nan");
    EXPECT_EQ(j["dbar_value"], "inf");
    auto text = j.dump();
    auto back = run_report_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(to_json(back).dump(), text);
    EXPECT_TRUE(std::isnan(back.achieved_value));
    EXPECT_EQ(back.restarts[0].start, "stage1-uniform");
}

TEST(Report, KeysAreSorted) {
    RunReport r;
    auto text = to_json(r).dump();
    auto pos = [&](const char* k) { return text.find(std::string("\"") + k + "\""); };
    EXPECT_LT(pos("achieved_value"), pos("bound_check"));
    EXPECT_LT(pos("bound_check"), pos("breakdown"));
    EXPECT_LT(pos("v_star"), pos("v_threshold"));
    EXPECT_LT(pos("timings"), pos("v_star"));
}

TEST(Report, MalformedReportIsInputError) {
    EXPECT_THROW(run_report_from_json(nlohmann::json{{"scenario", 1}}), InputError);
}

TEST(PolicyFile, RoundTrip) {
    std::mt19937_64 rng(161);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = oracle::random_instance(rng, oracle::Shape{}, 1);
        auto pair = oracle::random_policy(rng, inst.augmented);
        pair.zero_mass_state[inst.augmented.init_state()] = 0;
        auto j = policy_to_json(inst.augmented, pair);
        auto back = policy_from_json(inst.augmented, nlohmann::json::parse(j.dump()));
        ASSERT_EQ(back.action_policy.size(), pair.action_policy.size());
        for (std::size_t s = 0; s < pair.action_policy.size(); ++s) {
            ASSERT_EQ(back.action_policy[s].size(), pair.action_policy[s].size());
            for (std::size_t k = 0; k < pair.action_policy[s].size(); ++k) {
                EXPECT_EQ(back.action_policy[s][k].action, pair.action_policy[s][k].action);
                EXPECT_EQ(back.action_policy[s][k].prob, pair.action_policy[s][k].prob);
            }
        }
        EXPECT_EQ(back.comm_policy, pair.comm_policy);
        EXPECT_EQ(policy_to_json(inst.augmented, back).dump(), j.dump());
    }
}

TEST(PolicyFile, RejectsBadRows) {
    std::mt19937_64 rng(163);
    auto inst = oracle::random_instance(rng, oracle::Shape{}, 1);
    auto pair = oracle::random_policy(rng, inst.augmented);
    auto j = policy_to_json(inst.augmented, pair);
    auto first = j["action_policy"].begin();
    for (auto& [a, p] : first->items()) p = 2.0;
    EXPECT_THROW(policy_from_json(inst.augmented, j), InputError);

    auto k = policy_to_json(inst.augmented, pair);
    k["action_policy"]["((7,7),(7,7))"] = nlohmann::json::object();
    EXPECT_THROW(policy_from_json(inst.augmented, k), InputError);

    auto m = policy_to_json(inst.augmented, pair);
    m["action_policy"].erase(m["action_policy"].begin());
    EXPECT_THROW(policy_from_json(inst.augmented, m), InputError);
}

TEST(Heatmap, SumsMatchJointTotal) {
    std::mt19937_64 rng(167);
    auto inst = oracle::random_instance(rng, oracle::Shape{}, 1);
    auto L = full_layout(inst.augmented);
    auto x = OccupancyVector::zeros(L);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double total = 0.0;
    for (auto& v : x.sa) total += (v = u(rng));
    for (int i = 0; i < inst.augmented.num_agents(); ++i) {
        auto rows = agent_heatmap(L, x, i);
        EXPECT_EQ(static_cast<int>(rows.size()), inst.augmented.agent(i).num_states());
        double sum = 0.0;
        for (const auto& r : rows) sum += r.occupancy;
        EXPECT_NEAR(sum, total, 1e-8);
    }
    auto path = std::filesystem::temp_directory_path() / "commsynth_heatmap_test.csv";
    write_heatmap_csv(agent_heatmap(L, x, 0), path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "state_id,occupancy");
    std::filesystem::remove(path);
}
