#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "commsynth/cost.hpp"
#include "commsynth/lp.hpp"
#include "commsynth/occupancy.hpp"
#include "commsynth/policy.hpp"

namespace commsynth {

enum class RegionLayout {
    sparse,  // non-terminal states reachable from init that can still reach the target
    dense,   // every non-terminal product state and every joint action, disabled ones fixed to 0
};

// The stage-2 constraint system. LP columns are the state-action variables followed by the
// observation-coalition variables; rows are flow, coupling, the value row and, when a budget
// is given, one row bounding the total state-action mass.
struct FeasibleRegion {
    OccupancyLayout layout;
    LinearProgram lp;
    RegionLayout mode = RegionLayout::sparse;
    double v_threshold = 0.0;
    double budget = 0.0;  // 0 when unbounded
    int num_flow_rows = 0;
    int num_coupling_rows = 0;
    int value_row = -1;
    int budget_row = -1;
    int oc_column_offset = 0;

    int num_variables() const { return lp.num_variables(); }
    // flow + coupling + value row; the budget row is a solver device and not counted
    int num_constraints() const { return num_flow_rows + num_coupling_rows + 1; }
};

FeasibleRegion assemble_feasible_region(const CooperativeGame& augmented, double v_threshold,
                                        RegionLayout mode = RegionLayout::sparse, double budget = 0.0);

enum class StepRule { line_search, diminishing };
enum class SynthesisStatus { converged, iteration_limit, infeasible_threshold };
const char* to_string(SynthesisStatus status);
const char* to_string(StepRule rule);

struct SynthesisConfig {
    std::optional<double> v_threshold;  // defaults to v*
    int max_iterations = 5000;
    int restarts = 20;
    StepRule step_rule = StepRule::line_search;
    double convergence_tol = 1e-6;
    std::uint64_t seed = 0;
    double budget_scale = 4.0;  // mass budget relative to the stage-1 solution
    int threads = 0;            // 0: worker_count()
    bool total_correlation = false;
};

struct RestartRecord {
    int index = 0;
    std::string start;
    double dbar = 0.0;
    double fw_gap = 0.0;
    int iterations = 0;
    bool converged = false;
    bool projected = false;  // ended on the restricted projection
};

struct SynthesisReport {
    double v_star = 0.0;
    double v_threshold = 0.0;
    double achieved_value = 0.0;
    double dbar_value = 0.0;
    CostBreakdown breakdown;
    int iterations = 0;
    int restarts_used = 0;
    double wall_time = 0.0;
    double stage1_time = 0.0;
    SynthesisStatus status = SynthesisStatus::converged;
    double fw_gap = 0.0;
    int best_restart = -1;
    std::vector<RestartRecord> restarts;
    int num_variables = 0;
    int num_constraints = 0;
    double flow_residual = 0.0;
    double coupling_residual = 0.0;
    double budget = 0.0;
};

struct MinimizeResult {
    OccupancyVector x;
    SynthesisReport report;
};

// Multi-start Frank-Wolfe on the region. `warm` is a feasible state-action point (the stage-1
// solution); it seeds the first restarts.
MinimizeResult minimize_dbar(const FeasibleRegion& region, const std::vector<double>& warm,
                             const SynthesisConfig& config);
MinimizeResult minimize_total_correlation(const FeasibleRegion& region, const std::vector<double>& warm,
                                          const SynthesisConfig& config);

// x with each slot's comm mass moved onto its cheapest coalition for d-bar; the best comm
// policy for fixed state-action occupancies
OccupancyVector with_cheapest_comm(const OccupancyLayout& layout, const OccupancyVector& x);

PolicyPair extract_policies(const OccupancyLayout& layout, const OccupancyVector& x);

struct SynthesisResult {
    std::shared_ptr<const CooperativeGame> game;  // sink-augmented; the region points into it
    std::shared_ptr<const FeasibleRegion> region;
    OccupancyVector x;
    PolicyPair policy;
    SynthesisReport report;
};

// Stage 1, sink augmentation, stage 2 and extraction. Throws InfeasibleThreshold when the
// requested threshold exceeds v*.
SynthesisResult synthesize(const CooperativeGame& game, const ReachAvoidSpec& spec, const SynthesisConfig& config);

}  // namespace commsynth
