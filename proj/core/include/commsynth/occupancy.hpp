#pragma once

#include <vector>

#include "commsynth/model.hpp"

namespace commsynth {

// Index maps between the decision variables of the second stage and the augmented game.
// The layout keeps a pointer to the game; the game must outlive it.
struct OccupancyLayout {
    const CooperativeGame* game = nullptr;
    std::vector<int> pairs;         // state-action variable -> game pair
    std::vector<int> var_of_pair;   // game pair -> variable, -1 when not a variable
    std::vector<int> observations;  // observation slot -> game observation
    std::vector<int> slot_of_obs;   // game observation -> slot, -1 when absent
    std::vector<int> var_slot;      // state-action variable -> observation slot
    std::vector<char> flow_state;   // game state carries a flow row
    std::vector<char> fixed;        // state-action variable pinned to zero

    int num_state_action() const { return static_cast<int>(pairs.size()); }
    int num_slots() const { return static_cast<int>(observations.size()); }
    int num_coalitions() const { return game->num_coalitions(); }
    int num_obs_coalition() const { return num_slots() * num_coalitions(); }
    int num_variables() const { return num_state_action() + num_obs_coalition(); }
    int oc_index(int slot, int coalition) const { return slot * num_coalitions() + coalition; }
};

// Variables for every enabled non-alpha pair of the given states.
OccupancyLayout make_layout(const CooperativeGame& augmented, const std::vector<char>& decision_states);

struct OccupancyVector {
    std::vector<double> sa;  // x_{o,l,a}
    std::vector<double> oc;  // x_{o,c}, slot-major

    static OccupancyVector zeros(const OccupancyLayout& layout);
    void axpy(double alpha, const OccupancyVector& other);  // this += alpha * other
    double dot(const OccupancyVector& other) const;
    OccupancyVector operator-(const OccupancyVector& other) const;
};

// per observation slot: sum of state-action mass
std::vector<double> observation_mass(const OccupancyLayout& layout, const OccupancyVector& x);
// max over slots of |sum_c x_{o,c} - sum_{l,a} x_{o,l,a}|
double coupling_residual(const OccupancyLayout& layout, const OccupancyVector& x);
// max over flow states of |outflow - inflow - init|; terminal states are not flow states
double flow_residual(const OccupancyLayout& layout, const OccupancyVector& x);
// occupancy of a_alpha at each terminal state: its inflow
std::vector<double> terminal_occupancy(const OccupancyLayout& layout, const OccupancyVector& x);
// sum over (s,a) of x P(s,a)(target)
double reach_value(const OccupancyLayout& layout, const OccupancyVector& x);

}  // namespace commsynth
