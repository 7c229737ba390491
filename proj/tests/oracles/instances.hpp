#pragma once

// Random tiny games and policies for property tests.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <commsynth/model.hpp>
#include <commsynth/policy.hpp>

namespace oracle {

using namespace commsynth;

struct Shape {
    int agents = 2;
    int max_states = 3;  // per agent, goal included
    int max_obs = 2;
    int max_actions = 2;
    double avoid_fraction = 0.2;  // chance a non-target joint state is an avoid state
    double goal_floor = 0.1;      // every enabled row reaches the goal with at least this mass
};

struct Instance {
    CooperativeGame game;      // not augmented
    ReachAvoidSpec spec;
    CooperativeGame augmented;
};

inline std::vector<double> random_simplex(std::mt19937_64& rng, int n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& v : w) s += (v = e(rng) + 1e-3);
    for (auto& v : w) v /= s;
    return w;
}

// The last state of each agent is its goal and absorbs; every other row moves to the goal with
// positive probability, so every joint policy ends in a terminal state.
inline AgentModel random_agent(std::mt19937_64& rng, const Shape& shape, int index) {
    std::uniform_int_distribution<int> ns_d(2, shape.max_states), no_d(1, shape.max_obs), na_d(1, shape.max_actions);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AgentModel m;
    m.name = "R" + std::to_string(index + 1);
    const int ns = ns_d(rng), no = no_d(rng), na = na_d(rng);
    for (int o = 0; o < no; ++o) m.obs_labels.push_back(std::to_string(o));
    for (int s = 0; s < ns; ++s) {
        m.local_labels.push_back(std::to_string(s));
        m.states.push_back(AgentState{std::uniform_int_distribution<int>(0, no - 1)(rng), s});
    }
    for (int a = 0; a < na; ++a) m.actions.push_back("a" + std::to_string(a));
    m.transitions.assign(ns, std::vector<Distribution>(na));
    const int goal = ns - 1;
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            if (s == goal) {
                m.transitions[s][a] = {Outcome{goal, 1.0}};
                continue;
            }
            if (a > 0 && u(rng) < 0.25) continue;  // disabled
            auto w = random_simplex(rng, ns);
            for (auto& v : w) v *= 1.0 - shape.goal_floor;
            w[goal] += shape.goal_floor;
            // sparsify
            for (int t = 0; t < goal; ++t)
                if (u(rng) < 0.3) {
                    w[goal] += w[t];
                    w[t] = 0.0;
                }
            Distribution d;
            for (int t = 0; t < ns; ++t)
                if (w[t] > 0.0) d.push_back(Outcome{t, w[t]});
            double sum = 0.0;
            for (auto& o : d) sum += o.prob;
            for (auto& o : d) o.prob /= sum;
            m.transitions[s][a] = d;
        }
    }
    m.init = 0;
    return m;
}

inline Instance random_instance(std::mt19937_64& rng, const Shape& shape, int K) {
    std::vector<AgentModel> agents;
    for (int i = 0; i < shape.agents; ++i) agents.push_back(random_agent(rng, shape, i));
    Instance inst;
    inst.game = build_joint_game(agents, K);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < inst.game.num_states(); ++s) {
        bool all_goal = true;
        for (int i = 0; i < inst.game.num_agents(); ++i)
            all_goal = all_goal && inst.game.agent_state(s, i) == inst.game.agent(i).num_states() - 1;
        if (all_goal)
            inst.spec.target.push_back(s);
        else if (s != inst.game.init_state() && u(rng) < shape.avoid_fraction)
            inst.spec.avoid.push_back(s);
    }
    inst.augmented = augment_with_sink(inst.game, inst.spec);
    return inst;
}

// Random positional pair over the augmented game; action rows may drop actions at random.
inline PolicyPair random_policy(std::mt19937_64& rng, const CooperativeGame& g, double drop = 0.3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PolicyPair pair;
    pair.action_policy.resize(g.num_states());
    pair.zero_mass_state.assign(g.num_states(), 0);
    for (int s = 0; s < g.num_states(); ++s) {
        if (g.is_terminal(s)) {
            pair.action_policy[s].push_back(ActionProb{g.sink_action(), 1.0});
            continue;
        }
        const int n = g.pair_end(s) - g.pair_begin(s);
        auto w = random_simplex(rng, n);
        for (int k = 0; k < n; ++k)
            if (u(rng) < drop) w[k] = 0.0;
        if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w[0] = 1.0;
        double sum = 0.0;
        for (double v : w) sum += v;
        for (int k = 0; k < n; ++k)
            if (w[k] > 0.0) pair.action_policy[s].push_back(ActionProb{g.pair_action(g.pair_begin(s) + k), w[k] / sum});
    }
    pair.comm_policy.resize(g.num_observations());
    pair.zero_mass_obs.assign(g.num_observations(), 0);
    for (auto& row : pair.comm_policy) row = random_simplex(rng, g.num_coalitions());
    return pair;
}

}  // namespace oracle
