#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "commsynth/model.hpp"

namespace commsynth {

enum class SlipModel { stay_on_fail, redistribute };
enum class AvoidRule { none, pairwise_collision };

// Targets are either a product of per-agent cell sets or an explicit list of joint tuples.
// Cells are referred to by their local-state label (an integer in all shipped configs).
struct TargetConfig {
    std::vector<std::vector<int>> per_agent;
    std::vector<std::vector<int>> joint;
};

struct GridConfig {
    int rows = 0;
    int cols = 0;
    std::vector<int> starts;
    std::vector<int> regions;  // one label per cell, row-major, row 0 is north
    SlipModel slip = SlipModel::stay_on_fail;
    std::vector<std::string> names;
};

struct TableRow {
    int state = 0;
    std::string action;
    double prob = 0.0;
    int next = 0;
};

struct TableAgentConfig {
    std::string name;
    std::vector<int> states;
    std::vector<std::string> actions;
    std::string remain_action;  // self-loop given to states with no listed row
    std::vector<int> region_of_state;
    std::vector<TableRow> rows;
    int init = 0;
};

struct ScenarioConfig {
    std::string name;
    int K = 0;
    bool allow_smaller_coalitions = false;
    AvoidRule avoid = AvoidRule::pairwise_collision;
    TargetConfig targets;
    std::optional<GridConfig> grid;
    std::vector<TableAgentConfig> table;
};

struct Scenario {
    std::string name;
    CooperativeGame game;  // not augmented
    ReachAvoidSpec spec;
    ScenarioConfig config;
};

ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& config);

std::vector<AgentModel> grid_agents(const GridConfig& grid);
std::vector<AgentModel> table_agents(const std::vector<TableAgentConfig>& table);

ReachAvoidSpec make_spec(const CooperativeGame& game, const TargetConfig& targets, AvoidRule avoid);

Scenario build_grid_scenario(const ScenarioConfig& config, bool full_product = false);
Scenario build_table_scenario(const ScenarioConfig& config, bool full_product = false);
Scenario build_scenario(const ScenarioConfig& config, bool full_product = false);
Scenario load_scenario(const std::filesystem::path& path, bool full_product = false);

}  // namespace commsynth
