#include "commsynth/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "commsynth/error.hpp"

namespace commsynth {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return it->get<T>();
}

std::string action_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<int>());
    throw InputError("action must be a string or an integer");
}

TargetConfig targets_from_json(const json& j) {
    TargetConfig t;
    if (j.contains("per_agent")) t.per_agent = j.at("per_agent").get<std::vector<std::vector<int>>>();
    if (j.contains("joint")) t.joint = j.at("joint").get<std::vector<std::vector<int>>>();
    if (t.per_agent.empty() == t.joint.empty())
        throw InputError("targets: give exactly one of per_agent or joint");
    return t;
}

}  // namespace

ScenarioConfig scenario_config_from_json(const json& j) {
    try {
        ScenarioConfig c;
        c.name = get_or<std::string>(j, "name", "scenario");
        c.K = j.at("K").get<int>();
        c.allow_smaller_coalitions = get_or<bool>(j, "allow_smaller_coalitions", false);
        auto rule = get_or<std::string>(j, "avoid_rule", "pairwise-collision");
        if (rule == "pairwise-collision")
            c.avoid = AvoidRule::pairwise_collision;
        else if (rule == "none")
            c.avoid = AvoidRule::none;
        else
            throw InputError("unknown avoid_rule " + rule);
        c.targets = targets_from_json(j.at("targets"));
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            GridConfig grid;
            grid.rows = g.at("rows").get<int>();
            grid.cols = g.at("cols").get<int>();
            grid.starts = g.at("starts").get<std::vector<int>>();
            grid.regions = g.at("regions").get<std::vector<int>>();
            auto slip = g.at("slip_model").get<std::string>();
            if (slip == "stay-on-fail")
                grid.slip = SlipModel::stay_on_fail;
            else if (slip == "redistribute")
                grid.slip = SlipModel::redistribute;
            else
                throw InputError("unknown slip_model " + slip);
            grid.names = get_or<std::vector<std::string>>(g, "names", {});
            c.grid = grid;
        } else if (j.contains("agents")) {
            for (const auto& a : j.at("agents")) {
                TableAgentConfig t;
                t.name = a.at("name").get<std::string>();
                t.states = a.at("states").get<std::vector<int>>();
                for (const auto& act : a.at("actions")) t.actions.push_back(action_string(act));
                t.remain_action = a.contains("remain_action") ? action_string(a.at("remain_action")) : std::string{};
                t.region_of_state = a.at("region_of_state").get<std::vector<int>>();
                t.init = a.at("init").get<int>();
                for (const auto& r : a.at("transitions")) {
                    if (!r.is_array() || r.size() != 4) throw InputError("transition rows are [state, action, prob, next]");
                    t.rows.push_back(TableRow{r[0].get<int>(), action_string(r[1]), r[2].get<double>(), r[3].get<int>()});
                }
                c.table.push_back(std::move(t));
            }
        } else {
            throw InputError("scenario needs either grid or agents");
        }
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("scenario config: ") + e.what());
    }
}

json to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["K"] = c.K;
    j["allow_smaller_coalitions"] = c.allow_smaller_coalitions;
    j["avoid_rule"] = c.avoid == AvoidRule::pairwise_collision ? "pairwise-collision" : "none";
    if (!c.targets.per_agent.empty()) j["targets"]["per_agent"] = c.targets.per_agent;
    if (!c.targets.joint.empty()) j["targets"]["joint"] = c.targets.joint;
    if (c.grid) {
        const auto& g = *c.grid;
        j["grid"] = {{"rows", g.rows},
                     {"cols", g.cols},
                     {"starts", g.starts},
                     {"regions", g.regions},
                     {"slip_model", g.slip == SlipModel::stay_on_fail ? "stay-on-fail" : "redistribute"}};
        if (!g.names.empty()) j["grid"]["names"] = g.names;
    } else {
        for (const auto& t : c.table) {
            json a;
            a["name"] = t.name;
            a["states"] = t.states;
            a["actions"] = t.actions;
            if (!t.remain_action.empty()) a["remain_action"] = t.remain_action;
            a["region_of_state"] = t.region_of_state;
            a["init"] = t.init;
            a["transitions"] = json::array();
            for (const auto& r : t.rows) a["transitions"].push_back(json::array({r.state, r.action, r.prob, r.next}));
            j["agents"].push_back(a);
        }
    }
    return j;
}

namespace {

AgentModel cells_agent(const std::string& name, const std::vector<int>& cells, const std::vector<int>& region_of_cell,
                       std::vector<std::string> actions) {
    AgentModel ag;
    ag.name = name;
    ag.actions = std::move(actions);
    std::set<int> regions(region_of_cell.begin(), region_of_cell.end());
    std::vector<int> region_list(regions.begin(), regions.end());
    for (int r : region_list) ag.obs_labels.push_back(std::to_string(r));
    for (std::size_t k = 0; k < cells.size(); ++k) {
        ag.local_labels.push_back(std::to_string(cells[k]));
        int obs = static_cast<int>(std::lower_bound(region_list.begin(), region_list.end(), region_of_cell[k]) -
                                   region_list.begin());
        ag.states.push_back(AgentState{obs, static_cast<int>(k)});
    }
    ag.transitions.assign(cells.size(), std::vector<Distribution>(ag.actions.size()));
    return ag;
}

}  // namespace

std::vector<AgentModel> grid_agents(const GridConfig& g) {
    if (g.rows <= 0 || g.cols <= 0) throw InputError("grid dimensions must be positive");
    const int ncell = g.rows * g.cols;
    if (static_cast<int>(g.regions.size()) != ncell)
        throw InputError(fmt::format("region map has {} entries for {} cells", g.regions.size(), ncell));
    std::vector<int> cells(ncell);
    for (int c = 0; c < ncell; ++c) cells[c] = c;

    auto neighbor = [&](int cell, int dir) -> int {
        int r = cell / g.cols, c = cell % g.cols;
        static constexpr int dr[4] = {-1, 0, 1, 0};
        static constexpr int dc[4] = {0, 1, 0, -1};
        r += dr[dir];
        c += dc[dir];
        if (r < 0 || r >= g.rows || c < 0 || c >= g.cols) return -1;
        return r * g.cols + c;
    };

    std::vector<AgentModel> out;
    for (std::size_t i = 0; i < g.starts.size(); ++i) {
        if (g.starts[i] < 0 || g.starts[i] >= ncell)
            throw InputError(fmt::format("start cell {} outside the grid", g.starts[i]));
        std::string name = i < g.names.size() ? g.names[i] : fmt::format("R{}", i + 1);
        AgentModel ag = cells_agent(name, cells, g.regions, {"N", "E", "S", "W", "R"});
        for (int cell = 0; cell < ncell; ++cell) {
            std::vector<int> valid;
            for (int d = 0; d < 4; ++d)
                if (neighbor(cell, d) >= 0) valid.push_back(neighbor(cell, d));
            for (int d = 0; d < 4; ++d) {
                Distribution dist;
                int to = neighbor(cell, d);
                if (g.slip == SlipModel::stay_on_fail) {
                    if (to >= 0)
                        dist = {{to, 0.9}, {cell, 0.1}};
                    else
                        dist = {{cell, 1.0}};
                } else if (to >= 0) {
                    dist = {{to, 0.9}};
                    std::vector<int> rest{cell};
                    for (int v : valid)
                        if (v != to) rest.push_back(v);
                    for (int v : rest) dist.push_back({v, 0.1 / static_cast<double>(rest.size())});
                } else {
                    std::vector<int> rest{cell};
                    rest.insert(rest.end(), valid.begin(), valid.end());
                    for (int v : rest) dist.push_back({v, 1.0 / static_cast<double>(rest.size())});
                }
                ag.transitions[cell][d] = dist;
            }
            ag.transitions[cell][4] = {{cell, 1.0}};
        }
        ag.init = g.starts[i];
        out.push_back(std::move(ag));
    }
    return out;
}

std::vector<AgentModel> table_agents(const std::vector<TableAgentConfig>& table) {
    std::vector<AgentModel> out;
    for (const auto& t : table) {
        if (t.region_of_state.size() != t.states.size())
            throw InputError(fmt::format("agent {}: region_of_state is not total", t.name));
        AgentModel ag = cells_agent(t.name, t.states, t.region_of_state, t.actions);
        auto state_idx = [&](int label) {
            auto it = std::find(t.states.begin(), t.states.end(), label);
            if (it == t.states.end()) throw InputError(fmt::format("agent {}: unknown state {}", t.name, label));
            return static_cast<int>(it - t.states.begin());
        };
        auto action_idx = [&](const std::string& label) {
            auto it = std::find(t.actions.begin(), t.actions.end(), label);
            if (it == t.actions.end()) throw InputError(fmt::format("agent {}: unknown action {}", t.name, label));
            return static_cast<int>(it - t.actions.begin());
        };
        for (const auto& r : t.rows) {
            if (!(r.prob >= 0.0 && r.prob <= 1.0))
                throw InputError(fmt::format("agent {}: probability {} outside [0,1]", t.name, r.prob));
            ag.transitions[state_idx(r.state)][action_idx(r.action)].push_back({state_idx(r.next), r.prob});
        }
        for (std::size_t s = 0; s < t.states.size(); ++s) {
            bool any = std::any_of(ag.transitions[s].begin(), ag.transitions[s].end(),
                                   [](const Distribution& d) { return !d.empty(); });
            if (!any) {
                if (t.remain_action.empty())
                    throw InputError(fmt::format("agent {}: state {} has no action", t.name, t.states[s]));
                ag.transitions[s][action_idx(t.remain_action)] = {{static_cast<int>(s), 1.0}};
            }
        }
        ag.init = state_idx(t.init);
        out.push_back(std::move(ag));
    }
    return out;
}

ReachAvoidSpec make_spec(const CooperativeGame& game, const TargetConfig& targets, AvoidRule avoid) {
    const int n = game.num_agents();
    if (!targets.per_agent.empty() && static_cast<int>(targets.per_agent.size()) != n)
        throw InputError("per-agent targets must list one set per agent");
    std::set<std::vector<int>> joint;
    for (const auto& t : targets.joint) {
        if (static_cast<int>(t.size()) != n) throw InputError("joint target tuple has the wrong arity");
        joint.insert(t);
    }
    ReachAvoidSpec spec;
    std::vector<int> cells(n);
    for (int s = 0; s < game.num_states(); ++s) {
        if (s == game.sink_state()) continue;
        for (int i = 0; i < n; ++i) {
            const auto& ag = game.agent(i);
            cells[i] = std::stoi(ag.local_labels[ag.states[game.agent_state(s, i)].local]);
        }
        bool collide = false;
        if (avoid == AvoidRule::pairwise_collision)
            for (int i = 0; i < n && !collide; ++i)
                for (int k = i + 1; k < n; ++k)
                    if (cells[i] == cells[k]) {
                        collide = true;
                        break;
                    }
        if (collide) {
            spec.avoid.push_back(s);
            continue;
        }
        bool hit;
        if (!targets.per_agent.empty()) {
            hit = true;
            for (int i = 0; i < n && hit; ++i) {
                const auto& set = targets.per_agent[i];
                hit = std::find(set.begin(), set.end(), cells[i]) != set.end();
            }
        } else {
            hit = joint.count(cells) > 0;
        }
        if (hit) spec.target.push_back(s);
    }
    return spec;
}

Scenario build_grid_scenario(const ScenarioConfig& config, bool full_product) {
    if (!config.grid) throw InputError("not a grid scenario");
    GameOptions opt{config.allow_smaller_coalitions, full_product};
    Scenario sc{config.name, build_joint_game(grid_agents(*config.grid), config.K, opt), {}, config};
    sc.spec = make_spec(sc.game, config.targets, config.avoid);
    validate_spec(sc.game, sc.spec);
    return sc;
}

Scenario build_table_scenario(const ScenarioConfig& config, bool full_product) {
    if (config.table.empty()) throw InputError("not a table scenario");
    GameOptions opt{config.allow_smaller_coalitions, full_product};
    Scenario sc{config.name, build_joint_game(table_agents(config.table), config.K, opt), {}, config};
    sc.spec = make_spec(sc.game, config.targets, config.avoid);
    validate_spec(sc.game, sc.spec);
    return sc;
}

Scenario build_scenario(const ScenarioConfig& config, bool full_product) {
    return config.grid ? build_grid_scenario(config, full_product) : build_table_scenario(config, full_product);
}

Scenario load_scenario(const std::filesystem::path& path, bool full_product) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return build_scenario(scenario_config_from_json(j), full_product);
}

}  // namespace commsynth
