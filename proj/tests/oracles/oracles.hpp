#pragma once

// Independent reference computations. Everything here works straight from the game's transition
// lists and plain maps; none of it goes through the library's cost or chain code.

#include <cmath>
#include <map>
#include <vector>

#include <commsynth/model.hpp>
#include <commsynth/occupancy.hpp>
#include <commsynth/policy.hpp>

namespace oracle {

using namespace commsynth;

inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

inline double entropy_of(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) h -= xlogx(v);
    return h;
}

inline double joint_transition_entropy(const CooperativeGame& g, int pair) {
    double h = 0.0;
    for (const auto& o : g.successors(pair)) h -= xlogx(o.prob);
    return h;
}

struct Forward {
    std::vector<double> visits;  // per state, expected visits while normal
    double reach = 0.0;          // mass that entered a target state
    double entropy = 0.0;        // sum over t of H(A_t, S_{t+1} | S_t)
    double residual = 0.0;
    int steps = 0;
};

// Propagates the state distribution of the full-communication process until the live mass
// drops below `floor`.
inline Forward forward(const CooperativeGame& g, const PolicyPair& pair, double floor = 1e-13, int max_steps = 1000000) {
    Forward f;
    f.visits.assign(g.num_states(), 0.0);
    std::vector<double> dist(g.num_states(), 0.0), next(g.num_states(), 0.0);
    dist[g.init_state()] = 1.0;
    if (g.kind(g.init_state()) == StateKind::target) f.reach = 1.0;
    auto live = [&] {
        double m = 0.0;
        for (int s = 0; s < g.num_states(); ++s)
            if (g.kind(s) == StateKind::normal) m += dist[s];
        return m;
    };
    f.residual = live();
    while (f.residual > floor && f.steps < max_steps) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < g.num_states(); ++s) {
            if (dist[s] == 0.0 || g.kind(s) != StateKind::normal) continue;
            f.visits[s] += dist[s];
            std::vector<double> probs;
            for (const auto& ap : pair.action_policy[s]) {
                probs.push_back(ap.prob);
                int p = g.find_pair(s, ap.action);
                f.entropy += dist[s] * ap.prob * joint_transition_entropy(g, p);
                for (const auto& o : g.successors(p)) {
                    double m = dist[s] * ap.prob * o.prob;
                    next[o.next] += m;
                    if (g.kind(o.next) == StateKind::target) f.reach += m;
                }
            }
            f.entropy += dist[s] * entropy_of(probs);
        }
        dist.swap(next);
        ++f.steps;
        f.residual = live();
    }
    return f;
}

// Gauss-Seidel-free Jacobi value iteration for the maximal reach-avoid probability.
inline double max_reach(const CooperativeGame& g, const ReachAvoidSpec& spec, double tol = 1e-14,
                        int max_sweeps = 2000000) {
    std::vector<char> target(g.num_states(), 0), avoid(g.num_states(), 0);
    for (int s : spec.target) target[s] = 1;
    for (int s : spec.avoid) avoid[s] = 1;
    std::vector<double> v(g.num_states(), 0.0), nv(g.num_states(), 0.0);
    for (int s = 0; s < g.num_states(); ++s) v[s] = target[s] ? 1.0 : 0.0;
    for (int it = 0; it < max_sweeps; ++it) {
        double change = 0.0;
        for (int s = 0; s < g.num_states(); ++s) {
            if (target[s] || avoid[s]) {
                nv[s] = v[s];
                continue;
            }
            double best = 0.0;
            for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
                double q = 0.0;
                for (const auto& o : g.successors(p)) q += o.prob * v[o.next];
                best = std::max(best, q);
            }
            nv[s] = best;
            change = std::max(change, std::abs(best - v[s]));
        }
        v.swap(nv);
        if (change < tol) break;
    }
    return v[g.init_state()];
}

struct DbarParts {
    double h = 0.0;
    std::vector<double> g_agent;
    std::vector<double> g_coalition;
    double dbar = 0.0;
};

// The stage-2 objective evaluated from its definition with explicit tuple-keyed marginals.
inline DbarParts dbar(const OccupancyLayout& L, const OccupancyVector& x) {
    const auto& g = *L.game;
    const int N = g.num_agents(), C = g.num_coalitions();
    DbarParts out;
    out.g_agent.assign(N, 0.0);
    out.g_coalition.assign(C, 0.0);

    // joint entropy
    std::map<int, double> state_mass;
    for (int v = 0; v < L.num_state_action(); ++v) state_mass[g.pair_state(L.pairs[v])] += x.sa[v];
    for (int v = 0; v < L.num_state_action(); ++v) {
        double m = x.sa[v];
        if (m <= 0.0) continue;
        out.h += -m * std::log(m / state_mass[g.pair_state(L.pairs[v])]) + m * joint_transition_entropy(g, L.pairs[v]);
    }

    // weights per game observation
    std::map<int, std::vector<double>> wc;
    for (int slot = 0; slot < L.num_slots(); ++slot) {
        std::vector<double> w(C);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += x.oc[L.oc_index(slot, c)];
        for (int c = 0; c < C; ++c) w[c] = z > 0.0 ? x.oc[L.oc_index(slot, c)] / z : 1.0 / C;
        wc[L.observations[slot]] = w;
    }

    auto factor_term = [&](const std::vector<int>& members, auto weight_of) {
        using Key = std::vector<int>;  // o, member agent states, member actions
        std::map<Key, double> cell, group;
        std::map<Key, double> cell_h;
        for (int v = 0; v < L.num_state_action(); ++v) {
            int s = g.pair_state(L.pairs[v]), a = g.pair_action(L.pairs[v]);
            Key gk{g.obs_of(s)}, ck;
            double th = 0.0;
            for (int j : members) gk.push_back(g.agent_state(s, j));
            ck = gk;
            for (int j : members) {
                int aj = g.agent_action(a, j);
                ck.push_back(aj);
                std::vector<double> row;
                for (const auto& o : g.agent(j).transitions[g.agent_state(s, j)][aj]) row.push_back(o.prob);
                th += entropy_of(row);
            }
            cell[ck] += x.sa[v];
            group[gk] += x.sa[v];
            cell_h[ck] = th;
        }
        double total = 0.0;
        for (const auto& [ck, m] : cell) {
            if (m <= 0.0) continue;
            Key gk(ck.begin(), ck.begin() + 1 + static_cast<long>(members.size()));
            total += weight_of(ck[0]) * (-m * std::log(m / group[gk]) + m * cell_h[ck]);
        }
        return total;
    };

    for (int i = 0; i < N; ++i)
        out.g_agent[i] = factor_term({i}, [&](int o) {
            double w = 0.0;
            for (int c = 0; c < C; ++c)
                if (!g.coalitions()[c].contains(i)) w += wc[o][c];
            return w;
        });
    for (int c = 0; c < C; ++c) {
        if (g.coalitions()[c].empty()) continue;
        out.g_coalition[c] = factor_term(g.coalitions()[c].members, [&](int o) { return wc[o][c]; });
    }
    out.dbar = -out.h;
    for (double v : out.g_agent) out.dbar += v;
    for (double v : out.g_coalition) out.dbar += v;
    return out;
}

// Occupancy of the full-communication process on a layout, with comm mass split by pi_comm.
inline OccupancyVector occupancy(const OccupancyLayout& L, const PolicyPair& pair, const Forward& f) {
    const auto& g = *L.game;
    auto x = OccupancyVector::zeros(L);
    for (int v = 0; v < L.num_state_action(); ++v) {
        int s = g.pair_state(L.pairs[v]), a = g.pair_action(L.pairs[v]);
        for (const auto& ap : pair.action_policy[s])
            if (ap.action == a) x.sa[v] = f.visits[s] * ap.prob;
    }
    std::vector<double> mass(L.num_slots(), 0.0);
    for (int v = 0; v < L.num_state_action(); ++v) mass[L.var_slot[v]] += x.sa[v];
    for (int slot = 0; slot < L.num_slots(); ++slot)
        for (int c = 0; c < L.num_coalitions(); ++c)
            x.oc[L.oc_index(slot, c)] = mass[slot] * pair.comm_policy[L.observations[slot]][c];
    return x;
}

}  // namespace oracle
