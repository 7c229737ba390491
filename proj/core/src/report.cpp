#include "commsynth/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <fmt/format.h>

#include "commsynth/error.hpp"

namespace commsynth {

using nlohmann::json;

json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw InputError("expected a number");
}

namespace {

json numbers(const std::vector<double>& v) {
    json out = json::array();
    for (double d : v) out.push_back(number_to_json(d));
    return out;
}

std::vector<double> numbers_from(const json& j) {
    std::vector<double> out;
    for (const auto& e : j) out.push_back(number_from_json(e));
    return out;
}

}  // namespace

RunReport make_run_report(const std::string& scenario, const SynthesisConfig& config, const SynthesisReport& rep) {
    RunReport r;
    r.scenario = scenario;
    r.config = {
        {"v_threshold", config.v_threshold ? number_to_json(*config.v_threshold) : json(nullptr)},
        {"max_iterations", config.max_iterations},
        {"restarts", config.restarts},
        {"step_rule", to_string(config.step_rule)},
        {"convergence_tol", config.convergence_tol},
        {"seed", config.seed},
        {"budget_scale", config.budget_scale},
        {"total_correlation", config.total_correlation},
    };
    r.v_star = rep.v_star;
    r.v_threshold = rep.v_threshold;
    r.achieved_value = rep.achieved_value;
    r.dbar_value = rep.dbar_value;
    r.breakdown = rep.breakdown;
    r.timings["stage1"] = rep.stage1_time;
    r.timings["total"] = rep.wall_time;
    r.status = to_string(rep.status);
    r.iterations = rep.iterations;
    r.restarts_used = rep.restarts_used;
    r.best_restart = rep.best_restart;
    r.fw_gap = rep.fw_gap;
    r.restarts = rep.restarts;
    r.num_variables = rep.num_variables;
    r.num_constraints = rep.num_constraints;
    r.flow_residual = rep.flow_residual;
    r.coupling_residual = rep.coupling_residual;
    return r;
}

json to_json(const RunReport& r) {
    json j;
    j["scenario"] = r.scenario;
    j["config"] = r.config;
    j["v_star"] = number_to_json(r.v_star);
    j["v_threshold"] = number_to_json(r.v_threshold);
    j["achieved_value"] = number_to_json(r.achieved_value);
    j["dbar_value"] = number_to_json(r.dbar_value);
    j["breakdown"] = {{"h", number_to_json(r.breakdown.h)},
                      {"g_agent", numbers(r.breakdown.g_agent)},
                      {"g_coalition", numbers(r.breakdown.g_coalition)},
                      {"dbar", number_to_json(r.breakdown.dbar)}};
    if (r.bound) {
        j["bound_check"] = {{"p_full", number_to_json(r.bound->p_full)},
                            {"p_restricted", number_to_json(r.bound->p_restricted)},
                            {"d", number_to_json(r.bound->d_value)},
                            {"bound", number_to_json(r.bound->bound)},
                            {"satisfied", r.bound->satisfied}};
    } else {
        j["bound_check"] = nullptr;
    }
    json t = json::object();
    for (const auto& [k, v] : r.timings) t[k] = number_to_json(v);
    j["timings"] = t;
    json rs = json::array();
    for (const auto& x : r.restarts)
        rs.push_back({{"index", x.index},
                      {"start", x.start},
                      {"dbar", number_to_json(x.dbar)},
                      {"fw_gap", number_to_json(x.fw_gap)},
                      {"iterations", x.iterations},
                      {"converged", x.converged},
                      {"projected", x.projected}});
    j["solver"] = {{"status", r.status},
                   {"iterations", r.iterations},
                   {"restarts_used", r.restarts_used},
                   {"best_restart", r.best_restart},
                   {"fw_gap", number_to_json(r.fw_gap)},
                   {"restarts", rs},
                   {"num_variables", r.num_variables},
                   {"num_constraints", r.num_constraints},
                   {"flow_residual", number_to_json(r.flow_residual)},
                   {"coupling_residual", number_to_json(r.coupling_residual)}};
    j["warnings"] = r.warnings;
    j["outputs"] = r.outputs;
    return j;
}

RunReport run_report_from_json(const json& j) {
    try {
        RunReport r;
        r.scenario = j.at("scenario").get<std::string>();
        r.config = j.at("config");
        r.v_star = number_from_json(j.at("v_star"));
        r.v_threshold = number_from_json(j.at("v_threshold"));
        r.achieved_value = number_from_json(j.at("achieved_value"));
        r.dbar_value = number_from_json(j.at("dbar_value"));
        const auto& b = j.at("breakdown");
        r.breakdown.h = number_from_json(b.at("h"));
        r.breakdown.g_agent = numbers_from(b.at("g_agent"));
        r.breakdown.g_coalition = numbers_from(b.at("g_coalition"));
        r.breakdown.dbar = number_from_json(b.at("dbar"));
        if (const auto& bc = j.at("bound_check"); !bc.is_null()) {
            BoundCheck c;
            c.p_full = number_from_json(bc.at("p_full"));
            c.p_restricted = number_from_json(bc.at("p_restricted"));
            c.d_value = number_from_json(bc.at("d"));
            c.bound = number_from_json(bc.at("bound"));
            c.satisfied = bc.at("satisfied").get<bool>();
            r.bound = c;
        }
        for (const auto& [k, v] : j.at("timings").items()) r.timings[k] = number_from_json(v);
        const auto& s = j.at("solver");
        r.status = s.at("status").get<std::string>();
        r.iterations = s.at("iterations").get<int>();
        r.restarts_used = s.at("restarts_used").get<int>();
        r.best_restart = s.at("best_restart").get<int>();
        r.fw_gap = number_from_json(s.at("fw_gap"));
        for (const auto& x : s.at("restarts")) {
            RestartRecord rr;
            rr.index = x.at("index").get<int>();
            rr.start = x.at("start").get<std::string>();
            rr.dbar = number_from_json(x.at("dbar"));
            rr.fw_gap = number_from_json(x.at("fw_gap"));
            rr.iterations = x.at("iterations").get<int>();
            rr.converged = x.at("converged").get<bool>();
            rr.projected = x.at("projected").get<bool>();
            r.restarts.push_back(rr);
        }
        r.num_variables = s.at("num_variables").get<int>();
        r.num_constraints = s.at("num_constraints").get<int>();
        r.flow_residual = number_from_json(s.at("flow_residual"));
        r.coupling_residual = number_from_json(s.at("coupling_residual"));
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        r.outputs = j.at("outputs").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw InputError(fmt::format("malformed report: {}", e.what()));
    }
}

json policy_to_json(const CooperativeGame& g, const PolicyPair& pair, const json& report) {
    validate_policy(g, pair);
    json act = json::object();
    json zero_states = json::array();
    for (int s = 0; s < g.num_states(); ++s) {
        if (g.is_terminal(s)) continue;
        if (pair.zero_mass_state[s]) {
            zero_states.push_back(g.state_label(s));
            continue;
        }
        json row = json::object();
        for (const auto& ap : pair.action_policy[s])
            if (ap.prob > 0.0) row[g.action_label(ap.action)] = ap.prob;
        act[g.state_label(s)] = row;
    }
    json comm = json::object();
    json zero_obs = json::array();
    for (int o = 0; o < g.num_observations(); ++o) {
        if (pair.zero_mass_obs[o]) {
            zero_obs.push_back(g.observation_label(o));
            continue;
        }
        json row = json::object();
        for (int c = 0; c < g.num_coalitions(); ++c)
            if (pair.comm_policy[o][c] > 0.0) row[g.coalitions()[c].to_string()] = pair.comm_policy[o][c];
        comm[g.observation_label(o)] = row;
    }
    return json{{"action_policy", act},
                {"comm_policy", comm},
                {"zero_mass_states", zero_states},
                {"zero_mass_observations", zero_obs},
                {"report", report}};
}

PolicyPair policy_from_json(const CooperativeGame& g, const json& j, const PolicyReadOptions& options) {
    if (!g.augmented()) throw InputError("policy files are read against the sink-augmented game");
    std::unordered_map<std::string, int> action_of;
    for (int a = 0; a < g.num_joint_actions(); ++a) action_of.emplace(g.action_label(a), a);
    std::unordered_map<std::string, int> obs_of;
    for (int o = 0; o < g.num_observations(); ++o) obs_of.emplace(g.observation_label(o), o);

    PolicyPair pair;
    pair.action_policy.resize(g.num_states());
    pair.zero_mass_state.assign(g.num_states(), 0);
    const int C = g.num_coalitions();
    pair.comm_policy.assign(g.num_observations(), std::vector<double>(C, 1.0 / C));
    pair.zero_mass_obs.assign(g.num_observations(), 1);
    try {
        std::vector<char> seen(g.num_states(), 0);
        for (const auto& label : j.at("zero_mass_states")) {
            auto s = g.parse_state_label(label.get<std::string>());
            if (!s || g.is_terminal(*s)) throw InputError(fmt::format("unknown state {}", label.dump()));
            seen[*s] = 1;
            pair.zero_mass_state[*s] = 1;
            const int n = g.pair_end(*s) - g.pair_begin(*s);
            for (int p = g.pair_begin(*s); p < g.pair_end(*s); ++p)
                pair.action_policy[*s].push_back(ActionProb{g.pair_action(p), 1.0 / n});
        }
        for (const auto& [label, row] : j.at("action_policy").items()) {
            auto s = g.parse_state_label(label);
            if (!s || g.is_terminal(*s)) throw InputError(fmt::format("unknown state {}", label));
            if (seen[*s]) throw InputError(fmt::format("state {} listed twice", label));
            seen[*s] = 1;
            for (const auto& [alabel, prob] : row.items()) {
                auto it = action_of.find(alabel);
                if (it == action_of.end()) throw InputError(fmt::format("unknown action {} at {}", alabel, label));
                pair.action_policy[*s].push_back(ActionProb{it->second, prob.get<double>()});
            }
        }
        for (int s = 0; s < g.num_states(); ++s) {
            if (g.is_terminal(s)) {
                pair.action_policy[s].push_back(ActionProb{g.sink_action(), 1.0});
            } else if (!seen[s]) {
                throw InputError(fmt::format("policy has no row for {}", g.state_label(s)));
            }
        }
        if (!options.ignore_comm) {
            for (const auto& [label, row] : j.at("comm_policy").items()) {
                auto it = obs_of.find(label);
                if (it == obs_of.end()) throw InputError(fmt::format("unknown observation {}", label));
                auto& out = pair.comm_policy[it->second];
                std::fill(out.begin(), out.end(), 0.0);
                pair.zero_mass_obs[it->second] = 0;
                for (const auto& [clabel, prob] : row.items()) {
                    Coalition c = parse_coalition(clabel);
                    auto pos = std::find(g.coalitions().begin(), g.coalitions().end(), c);
                    if (pos == g.coalitions().end())
                        throw InputError(fmt::format("coalition {} is not allowed by the game", clabel));
                    out[pos - g.coalitions().begin()] = prob.get<double>();
                }
            }
        }
    } catch (const json::exception& e) {
        throw InputError(fmt::format("malformed policy file: {}", e.what()));
    } catch (const std::invalid_argument&) {
        throw InputError("malformed coalition in policy file");
    }
    validate_policy(g, pair);
    return pair;
}

std::vector<HeatmapRow> agent_heatmap(const OccupancyLayout& L, const OccupancyVector& x, int agent) {
    const auto& g = *L.game;
    const auto& m = g.agent(agent);
    std::vector<double> mass(m.num_states(), 0.0);
    for (int v = 0; v < L.num_state_action(); ++v)
        mass[g.agent_state(g.pair_state(L.pairs[v]), agent)] += x.sa[v];
    std::vector<HeatmapRow> rows;
    for (int k = 0; k < m.num_states(); ++k) rows.push_back(HeatmapRow{m.local_labels[m.states[k].local], mass[k]});
    return rows;
}

void write_heatmap_csv(const std::vector<HeatmapRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
    out << "state_id,occupancy\n";
    for (const auto& r : rows) out << r.state_id << ',' << fmt::format("{:.17g}", r.occupancy) << '\n';
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
    out << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot read {}", path.string()));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace commsynth
