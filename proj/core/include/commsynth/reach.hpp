#pragma once

#include <vector>

#include "commsynth/lp.hpp"
#include "commsynth/model.hpp"

namespace commsynth {

// Graph analysis on the joint game. Terminal states are those of the spec.
std::vector<char> can_reach_target(const CooperativeGame& game, const ReachAvoidSpec& spec);
// non-terminal, reachable from the initial state without crossing a terminal, and able to reach target
std::vector<char> relevant_states(const CooperativeGame& game, const ReachAvoidSpec& spec);

// One enabled pair per relevant state that moves toward the target with positive probability.
// Under it the process leaves the relevant set with probability one.
std::vector<int> proper_policy(const CooperativeGame& game, const ReachAvoidSpec& spec,
                               const std::vector<char>& relevant);

struct ReachLp {
    LinearProgram lp;
    std::vector<int> var_pair;   // LP variable -> game pair
    std::vector<int> state_row;  // game state -> flow row, -1 when not relevant
    SimplexSolver::BasisHint hint;
};

ReachLp assemble_reach_lp(const CooperativeGame& game, const ReachAvoidSpec& spec);

struct ReachResult {
    double v_star = 0.0;
    bool short_circuit = false;
    LpSolution solution;
    std::vector<double> occupancy;  // per game pair, zero outside the LP
    double flow_residual = 0.0;
};

ReachResult optimal_reach_avoid_value(const CooperativeGame& game, const ReachAvoidSpec& spec);

// Gauss-Seidel value iteration for the maximal reach-avoid probability of every state.
std::vector<double> max_reach_values(const CooperativeGame& game, const ReachAvoidSpec& spec,
                                     double tolerance = 1e-13, int max_sweeps = 1000000);

// max over non-terminal states of |outflow - inflow - init|
double flow_residual(const CooperativeGame& game, const std::vector<char>& flow_states,
                     const std::vector<double>& pair_occupancy);

}  // namespace commsynth
