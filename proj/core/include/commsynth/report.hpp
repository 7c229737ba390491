#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "commsynth/exec.hpp"
#include "commsynth/policy.hpp"
#include "commsynth/synth.hpp"

namespace commsynth {

struct RunReport {
    std::string scenario;
    nlohmann::json config = nlohmann::json::object();
    double v_star = 0.0;
    double v_threshold = 0.0;
    double achieved_value = 0.0;
    double dbar_value = 0.0;
    CostBreakdown breakdown;
    std::optional<BoundCheck> bound;
    std::map<std::string, double> timings;  // seconds per stage
    std::string status;
    int iterations = 0;
    int restarts_used = 0;
    int best_restart = -1;
    double fw_gap = 0.0;
    std::vector<RestartRecord> restarts;
    int num_variables = 0;
    int num_constraints = 0;
    double flow_residual = 0.0;
    double coupling_residual = 0.0;
    std::vector<std::string> warnings;
    std::vector<std::string> outputs;
};

RunReport make_run_report(const std::string& scenario, const SynthesisConfig& config, const SynthesisReport& report);

// Non-finite numbers are written as the strings "inf", "-inf" and "nan". Objects keep sorted keys.
nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

// Policy file. Rows of zero-mass states and observations are left out and listed instead;
// reading restores them as uniform rows. Terminal states always map to a_alpha.
nlohmann::json policy_to_json(const CooperativeGame& augmented, const PolicyPair& pair,
                              const nlohmann::json& report = nlohmann::json::object());

struct PolicyReadOptions {
    // replace the comm rows by uniform rows over the game's coalitions (used with a K override)
    bool ignore_comm = false;
};
PolicyPair policy_from_json(const CooperativeGame& augmented, const nlohmann::json& j,
                            const PolicyReadOptions& options = {});

// Per agent state: the state-action mass summed over everything else. Keyed by local label.
struct HeatmapRow {
    std::string state_id;
    double occupancy = 0.0;
};
std::vector<HeatmapRow> agent_heatmap(const OccupancyLayout& layout, const OccupancyVector& x, int agent);
void write_heatmap_csv(const std::vector<HeatmapRow>& rows, const std::filesystem::path& path);

// Writes j to path with a trailing newline; indent 2.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace commsynth
