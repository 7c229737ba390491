#include <random>

#include <gtest/gtest.h>

#include <commsynth/reach.hpp>
#include <commsynth/scenario.hpp>

#include "oracles/instances.hpp"
#include "oracles/oracles.hpp"

using namespace commsynth;

namespace {
std::string scenario(int k) { return std::string(COMMSYNTH_SCENARIO_DIR) + "/scenario" + std::to_string(k) + ".json"; }
}  // namespace

TEST(ReachValue, MatchesValueIterationOnRandomGames) {
    std::mt19937_64 rng(21);
    oracle::Shape shape;
    shape.avoid_fraction = 0.3;
    for (int trial = 0; trial < 40; ++trial) {
        auto inst = oracle::random_instance(rng, shape, trial % 3);
        auto r = optimal_reach_avoid_value(inst.game, inst.spec);
        EXPECT_NEAR(r.v_star, oracle::max_reach(inst.game, inst.spec), 1e-9) << "trial " << trial;
        if (!r.short_circuit) EXPECT_LE(r.flow_residual, 1e-8);
    }
}

TEST(ReachValue, Scenario2And4AgainstValueIteration) {
    for (int k : {2, 4}) {
        auto sc = load_scenario(scenario(k));
        auto r = optimal_reach_avoid_value(sc.game, sc.spec);
        EXPECT_NEAR(r.v_star, oracle::max_reach(sc.game, sc.spec), 1e-8) << "scenario " << k;
        EXPECT_LE(r.flow_residual, 1e-8);
    }
}

TEST(ReachValue, TargetAtInit) {
    std::mt19937_64 rng(4);
    auto inst = oracle::random_instance(rng, oracle::Shape{}, 1);
    ReachAvoidSpec spec;
    spec.target = {inst.game.init_state()};
    EXPECT_DOUBLE_EQ(optimal_reach_avoid_value(inst.game, spec).v_star, 1.0);
}

TEST(ReachValue, GaussSeidelAgrees) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = oracle::random_instance(rng, oracle::Shape{}, 1);
        auto vi = max_reach_values(inst.game, inst.spec);
        EXPECT_NEAR(vi[inst.game.init_state()], optimal_reach_avoid_value(inst.game, inst.spec).v_star, 1e-9);
    }
}

TEST(ReachValue, ProperPolicyLeavesRelevantSet) {
    std::mt19937_64 rng(12);
    auto inst = oracle::random_instance(rng, oracle::Shape{}, 1);
    auto rel = relevant_states(inst.game, inst.spec);
    auto pol = proper_policy(inst.game, inst.spec, rel);
    for (int s = 0; s < inst.game.num_states(); ++s)
        if (rel[s]) {
            ASSERT_GE(pol[s], 0);
            EXPECT_EQ(inst.game.pair_state(pol[s]), s);
        }
}
