#pragma once

#include <vector>

#include "commsynth/model.hpp"

namespace commsynth {

struct ActionProb {
    int action = 0;  // joint action code; the game's sink_action() is a_alpha
    double prob = 0.0;
};

// Positional action and communication policies over a sink-augmented game.
struct PolicyPair {
    std::vector<std::vector<ActionProb>> action_policy;  // per game state
    std::vector<std::vector<double>> comm_policy;        // per game observation, over coalitions
    std::vector<char> zero_mass_state;                   // row is the uniform default
    std::vector<char> zero_mass_obs;
};

// Rows sum to one within tolerance, only enabled actions, terminal rows are a_alpha. Throws InputError.
void validate_policy(const CooperativeGame& augmented, const PolicyPair& pair);

}  // namespace commsynth
