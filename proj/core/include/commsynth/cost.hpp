#pragma once

#include <vector>

#include "commsynth/occupancy.hpp"

namespace commsynth {

struct CostBreakdown {
    double h = 0.0;
    std::vector<double> g_agent;
    std::vector<double> g_coalition;
    double dbar = 0.0;
};

// One entry of a marginal over (o, l^c, a^c).
struct MarginalEntry {
    int observation = 0;            // game observation
    std::vector<int> agent_states;  // per member, index into that agent's states
    std::vector<int> actions;       // per member
    double mass = 0.0;
};

struct CoalitionWeights {
    // slot-major: w_agent[slot * N + i], w_coalition[slot * |C| + c]
    std::vector<double> w_agent;
    std::vector<double> w_coalition;
    std::vector<char> zero_mass;  // per slot: weights defaulted to uniform
};

struct CostGradient {
    std::vector<double> sa;
    std::vector<double> oc;
};

// Precomputed index structure for the stage-2 objective over one layout.
// A factor is either a single agent or a coalition; each one groups the state-action
// variables by (o, l^f) and by (o, l^f, a^f).
class CostModel {
public:
    // total_correlation: every agent weight is 1 and coalition terms vanish, whatever x_{o,c} says
    explicit CostModel(const OccupancyLayout& layout, bool total_correlation = false);

    const OccupancyLayout& layout() const { return *layout_; }
    bool total_correlation() const { return total_correlation_; }
    int num_agents() const { return num_agents_; }
    int num_coalitions() const { return num_coalitions_; }

    CoalitionWeights weights(const OccupancyVector& x) const;
    CostBreakdown breakdown(const OccupancyVector& x) const;
    double value(const OccupancyVector& x) const { return breakdown(x).dbar; }
    // returns the objective; the gradient uses log(max(q, eps)) and treats unvisited groups as q = 1
    double gradient(const OccupancyVector& x, CostGradient& grad) const;

    // joint entropy of the state-action process
    double entropy(const OccupancyVector& x) const;
    std::vector<MarginalEntry> marginal_agent(const OccupancyVector& x, int agent) const;
    std::vector<MarginalEntry> marginal_coalition(const OccupancyVector& x, int coalition) const;

    // per variable, the (o, l^f, a^f) cell of factor f; factors are agents then coalitions
    int num_factors() const { return static_cast<int>(factors_.size()); }
    int cell_of(int factor, int var) const { return factors_[factor].cell[var]; }
    int group_of_cell(int factor, int cell) const { return factors_[factor].cell_group[cell]; }
    int num_cells(int factor) const { return static_cast<int>(factors_[factor].cell_group.size()); }
    int num_groups(int factor) const { return static_cast<int>(factors_[factor].group_slot.size()); }
    int cell_var(int factor, int cell) const { return factors_[factor].cell_var[cell]; }
    const std::vector<int>& factor_members(int factor) const { return factors_[factor].members; }
    int factor_of_coalition(int coalition) const { return factor_of_coalition_[coalition]; }

    // conditional probability of each cell given its group; unvisited groups are uniform over their cells
    struct Conditionals {
        std::vector<std::vector<double>> cell_prob;   // per factor
        std::vector<std::vector<char>> zero_mass;     // per factor, per group
    };
    Conditionals conditionals(const OccupancyVector& x) const;

    // per slot and coalition, the d-bar contribution of the slot if all of its comm mass sat on
    // that coalition (slot-major); the cost at a slot is linear in its coalition weights
    std::vector<double> coalition_costs(const OccupancyVector& x) const;

private:
    struct Factor {
        std::vector<int> members;
        std::vector<int> cell;             // var -> cell
        std::vector<int> cell_group;       // cell -> group
        std::vector<double> cell_entropy;  // transition entropy of the factor's own dynamics
        std::vector<int> cell_var;         // one representative variable per cell
        std::vector<int> group_slot;       // group -> observation slot
    };
    struct Scratch;

    void accumulate(const OccupancyVector& x, Scratch& s) const;
    std::vector<MarginalEntry> marginal(const OccupancyVector& x, int factor) const;

    const OccupancyLayout* layout_;
    bool total_correlation_;
    int num_agents_;
    int num_coalitions_;
    std::vector<int> joint_group_;         // var -> index of its joint state among flow states
    int num_joint_groups_ = 0;
    std::vector<double> joint_entropy_;    // var -> transition entropy of the joint pair
    std::vector<Factor> factors_;          // agents first, then non-empty coalitions
    std::vector<int> factor_of_coalition_; // -1 for the empty coalition
};

}  // namespace commsynth
