#include "commsynth/reach.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

#include "commsynth/error.hpp"
#include "commsynth/tolerances.hpp"

namespace commsynth {

namespace {

std::vector<StateKind> spec_kinds(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    validate_spec(game, spec);
    return classify_states(game, spec);
}

// backward BFS distance to the target over edges leaving non-terminal states
std::vector<int> target_distance(const CooperativeGame& game, const std::vector<StateKind>& kind) {
    const int ns = game.num_states();
    std::vector<std::vector<int>> pred(ns);
    for (int s = 0; s < ns; ++s) {
        if (kind[s] != StateKind::normal) continue;
        for (int p = game.pair_begin(s); p < game.pair_end(s); ++p)
            for (const auto& o : game.successors(p))
                if (o.prob > 0.0) pred[o.next].push_back(s);
    }
    std::vector<int> dist(ns, -1);
    std::deque<int> queue;
    for (int s = 0; s < ns; ++s)
        if (kind[s] == StateKind::target) {
            dist[s] = 0;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int s : pred[u])
            if (dist[s] < 0) {
                dist[s] = dist[u] + 1;
                queue.push_back(s);
            }
    }
    return dist;
}

}  // namespace

std::vector<char> can_reach_target(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    auto dist = target_distance(game, spec_kinds(game, spec));
    std::vector<char> out(dist.size());
    for (std::size_t s = 0; s < dist.size(); ++s) out[s] = dist[s] >= 0;
    return out;
}

std::vector<char> relevant_states(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    auto kind = spec_kinds(game, spec);
    auto dist = target_distance(game, kind);
    const int ns = game.num_states();
    std::vector<char> rel(ns, 0);
    auto ok = [&](int s) { return kind[s] == StateKind::normal && dist[s] > 0; };
    const int init = game.init_state();
    if (!ok(init)) return rel;
    std::deque<int> queue{init};
    rel[init] = 1;
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        for (int p = game.pair_begin(s); p < game.pair_end(s); ++p)
            for (const auto& o : game.successors(p))
                if (o.prob > 0.0 && ok(o.next) && !rel[o.next]) {
                    rel[o.next] = 1;
                    queue.push_back(o.next);
                }
    }
    return rel;
}

std::vector<int> proper_policy(const CooperativeGame& game, const ReachAvoidSpec& spec,
                               const std::vector<char>& relevant) {
    auto dist = target_distance(game, spec_kinds(game, spec));
    std::vector<int> choice(game.num_states(), -1);
    for (int s = 0; s < game.num_states(); ++s) {
        if (!relevant[s]) continue;
        for (int p = game.pair_begin(s); p < game.pair_end(s) && choice[s] < 0; ++p)
            for (const auto& o : game.successors(p))
                if (o.prob > 0.0 && dist[o.next] >= 0 && dist[o.next] < dist[s]) {
                    choice[s] = p;
                    break;
                }
    }
    return choice;
}

ReachLp assemble_reach_lp(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    if (game.augmented()) throw InputError("the stage-1 program is built on the raw game");
    auto kind = spec_kinds(game, spec);
    auto rel = relevant_states(game, spec);
    ReachLp out;
    out.lp.set_sense(ObjectiveSense::maximize);
    out.state_row.assign(game.num_states(), -1);
    int rows = 0;
    for (int s = 0; s < game.num_states(); ++s)
        if (rel[s]) out.state_row[s] = rows++;

    std::vector<std::vector<Entry>> row_entries(rows);
    for (int s = 0; s < game.num_states(); ++s) {
        if (!rel[s]) continue;
        for (int p = game.pair_begin(s); p < game.pair_end(s); ++p) {
            double to_target = 0.0;
            for (const auto& o : game.successors(p))
                if (kind[o.next] == StateKind::target) to_target += o.prob;
            int v = out.lp.add_variable(to_target);
            out.var_pair.push_back(p);
            double self = 0.0;
            for (const auto& o : game.successors(p)) {
                if (o.next == s)
                    self += o.prob;
                else if (out.state_row[o.next] >= 0)
                    row_entries[out.state_row[o.next]].push_back(Entry{v, -o.prob});
            }
            row_entries[out.state_row[s]].push_back(Entry{v, 1.0 - self});
        }
    }
    for (int s = 0; s < game.num_states(); ++s) {
        int r = out.state_row[s];
        if (r < 0) continue;
        auto& e = row_entries[r];
        std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
        out.lp.add_row(std::move(e), RowSense::equal, s == game.init_state() ? 1.0 : 0.0);
    }

    auto choice = proper_policy(game, spec, rel);
    std::vector<int> var_of_pair(game.num_pairs(), -1);
    for (std::size_t v = 0; v < out.var_pair.size(); ++v) var_of_pair[out.var_pair[v]] = static_cast<int>(v);
    for (int s = 0; s < game.num_states(); ++s)
        if (rel[s] && choice[s] >= 0) {
            out.hint.columns.push_back(var_of_pair[choice[s]]);
            out.hint.rows.push_back(out.state_row[s]);
        }
    return out;
}

double flow_residual(const CooperativeGame& game, const std::vector<char>& flow_states,
                     const std::vector<double>& x) {
    std::vector<double> balance(game.num_states(), 0.0);
    balance[game.init_state()] += 1.0;
    for (int p = 0; p < game.num_pairs(); ++p) {
        if (x[p] == 0.0) continue;
        int s = game.pair_state(p);
        balance[s] -= x[p];
        for (const auto& o : game.successors(p)) balance[o.next] += x[p] * o.prob;
    }
    double worst = 0.0;
    for (int s = 0; s < game.num_states(); ++s)
        if (flow_states[s]) worst = std::max(worst, std::abs(balance[s]));
    return worst;
}

ReachResult optimal_reach_avoid_value(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    ReachResult res;
    res.occupancy.assign(game.num_pairs(), 0.0);
    auto kind = spec_kinds(game, spec);
    const int init = game.init_state();
    if (kind[init] == StateKind::target) {
        res.v_star = 1.0;
        res.short_circuit = true;
        res.solution.status = LpStatus::optimal;
        res.solution.objective_value = 1.0;
        return res;
    }
    ReachLp rlp = assemble_reach_lp(game, spec);
    if (rlp.lp.num_rows() == 0) {
        // initial state is avoid or cannot reach the target
        res.v_star = 0.0;
        res.short_circuit = true;
        res.solution.status = LpStatus::optimal;
        return res;
    }
    SimplexSolver solver(rlp.lp);
    res.solution = solver.solve(rlp.hint);
    if (res.solution.status != LpStatus::optimal)
        throw LpFailure(fmt::format("stage-1 LP ended with status {}", to_string(res.solution.status)));
    for (std::size_t v = 0; v < rlp.var_pair.size(); ++v) res.occupancy[rlp.var_pair[v]] = res.solution.values[v];
    res.v_star = std::clamp(res.solution.objective_value, 0.0, 1.0);
    std::vector<char> flow(game.num_states(), 0);
    for (int s = 0; s < game.num_states(); ++s) flow[s] = rlp.state_row[s] >= 0;
    res.flow_residual = flow_residual(game, flow, res.occupancy);
    return res;
}

std::vector<double> max_reach_values(const CooperativeGame& game, const ReachAvoidSpec& spec, double tolerance,
                                     int max_sweeps) {
    auto kind = spec_kinds(game, spec);
    auto reach = can_reach_target(game, spec);
    const int ns = game.num_states();
    std::vector<double> v(ns, 0.0);
    for (int s = 0; s < ns; ++s)
        if (kind[s] == StateKind::target) v[s] = 1.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (int s = 0; s < ns; ++s) {
            if (kind[s] != StateKind::normal || !reach[s]) continue;
            double best = 0.0;
            for (int p = game.pair_begin(s); p < game.pair_end(s); ++p) {
                double q = 0.0;
                for (const auto& o : game.successors(p)) q += o.prob * v[o.next];
                best = std::max(best, q);
            }
            change = std::max(change, std::abs(best - v[s]));
            v[s] = best;
        }
        if (change <= tolerance) break;
    }
    return v;
}

}  // namespace commsynth
