#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "commsynth/cost.hpp"
#include "commsynth/occupancy.hpp"
#include "commsynth/policy.hpp"

namespace commsynth {

struct InducedChain {
    std::vector<Distribution> rows;  // per augmented game state
    std::vector<StateKind> kind;
    int init = 0;

    int num_states() const { return static_cast<int>(rows.size()); }
};

InducedChain induce_full_chain(const CooperativeGame& augmented, const PolicyPair& pair);

// Layout with a variable for every enabled pair of every non-terminal state.
OccupancyLayout full_layout(const CooperativeGame& augmented);

// Expected visits of each state before absorption in a terminal state; nullopt when some state
// reachable from init never gets absorbed.
std::optional<std::vector<double>> expected_visits(const InducedChain& chain);

// Occupancy of the process driven by pi_act; comm mass follows pi_comm. Throws GuardExceeded
// when the chain is not absorbing from init.
OccupancyVector occupancy_from_policy(const OccupancyLayout& layout, const PolicyPair& pair);

// Probability of the joint actions (one entry per layout variable of state s) when the factor
// conditionals are executed under a fixed coalition.
void restricted_action_probs(const CostModel& model, const CostModel::Conditionals& cond, int state, int coalition,
                             std::vector<double>& probs);

// Execution with communication restricted by pi_comm; the conditionals come from the
// occupancy marginals of x over `layout`, which must cover every non-terminal state.
InducedChain induce_restricted_chain(const OccupancyLayout& layout, const OccupancyVector& x, const PolicyPair& pair);
InducedChain induce_restricted_chain(const CooperativeGame& augmented, const PolicyPair& pair);

double reach_avoid_probability(const InducedChain& chain);
// Same quantity by value iteration; used to cross-check the direct solve.
double reach_avoid_probability_iterative(const InducedChain& chain, double tolerance = 1e-13,
                                         int max_sweeps = 10000000);

struct TruncatedOptions {
    int horizon = 100000;
    double mass_floor = 1e-10;
    std::int64_t guard = 1000000;  // bound on tracked (time, state) entries
};

struct TruncatedD {
    double d = 0.0;
    double h = 0.0;  // sum over t of H(A_t S_t | history)
    std::vector<double> g_agent;
    std::vector<double> g_coalition;
    double residual_mass = 0.0;
    int steps = 0;
};

// D summed over time with the process state distribution propagated exactly; histories
// only matter through the last state for positional policies.
TruncatedD truncated_exact_D(const CooperativeGame& augmented, const PolicyPair& pair,
                             const TruncatedOptions& options = {});

struct KlResult {
    double value = 0.0;
    bool infinite = false;
    double residual_mass = 0.0;
    int steps = 0;
};

// KL divergence of the state-path distribution of `full` from that of `restricted`.
KlResult kl_divergence_truncated(const InducedChain& full, const InducedChain& restricted,
                                 const TruncatedOptions& options = {});

struct BoundCheck {
    double p_full = 0.0;
    double p_restricted = 0.0;
    double d_value = 0.0;
    double bound = 0.0;
    bool satisfied = false;
};

double loss_bound(double d);
BoundCheck check_theorem1_bound(const CooperativeGame& augmented, const PolicyPair& pair);

enum class ExecutionMode { full, restricted };

struct SimulationOptions {
    std::int64_t episodes = 10000;
    std::uint64_t seed = 0;
    int max_steps = 100000;
    ExecutionMode mode = ExecutionMode::full;
};

struct SimulationResult {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::int64_t successes = 0;
    std::int64_t episodes = 0;
    std::int64_t unfinished = 0;  // hit max_steps before absorption
};

// Monte Carlo run. Episode e draws from a generator seeded by (seed, e), so the result does not
// depend on the number of workers. With a trajectory stream the run is sequential and writes
// one tab-separated line per step: t, o-tuple, l-tuple, coalition, a-tuple.
SimulationResult simulate(const CooperativeGame& augmented, const PolicyPair& pair, const SimulationOptions& options,
                          std::ostream* trajectories = nullptr);

}  // namespace commsynth
