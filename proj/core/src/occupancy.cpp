#include "commsynth/occupancy.hpp"

#include <algorithm>
#include <cmath>

#include "commsynth/error.hpp"

namespace commsynth {

OccupancyLayout make_layout(const CooperativeGame& game, const std::vector<char>& decision_states) {
    if (!game.augmented()) throw InputError("the occupancy layout is defined on the augmented game");
    OccupancyLayout L;
    L.game = &game;
    L.var_of_pair.assign(game.num_pairs(), -1);
    L.slot_of_obs.assign(game.num_observations(), -1);
    L.flow_state.assign(game.num_states(), 0);
    std::vector<char> obs_used(game.num_observations(), 0);
    for (int s = 0; s < game.num_states(); ++s) {
        if (!decision_states[s] || game.is_terminal(s)) continue;
        L.flow_state[s] = 1;
        obs_used[game.obs_of(s)] = 1;
        for (int p = game.pair_begin(s); p < game.pair_end(s); ++p) {
            L.var_of_pair[p] = static_cast<int>(L.pairs.size());
            L.pairs.push_back(p);
        }
    }
    for (int o = 0; o < game.num_observations(); ++o)
        if (obs_used[o]) {
            L.slot_of_obs[o] = static_cast<int>(L.observations.size());
            L.observations.push_back(o);
        }
    L.var_slot.resize(L.pairs.size());
    for (std::size_t v = 0; v < L.pairs.size(); ++v)
        L.var_slot[v] = L.slot_of_obs[game.obs_of(game.pair_state(L.pairs[v]))];
    L.fixed.assign(L.pairs.size(), 0);
    return L;
}

OccupancyVector OccupancyVector::zeros(const OccupancyLayout& layout) {
    return OccupancyVector{std::vector<double>(layout.num_state_action(), 0.0),
                           std::vector<double>(layout.num_obs_coalition(), 0.0)};
}

void OccupancyVector::axpy(double alpha, const OccupancyVector& other) {
    for (std::size_t k = 0; k < sa.size(); ++k) sa[k] += alpha * other.sa[k];
    for (std::size_t k = 0; k < oc.size(); ++k) oc[k] += alpha * other.oc[k];
}

double OccupancyVector::dot(const OccupancyVector& other) const {
    double s = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) s += sa[k] * other.sa[k];
    for (std::size_t k = 0; k < oc.size(); ++k) s += oc[k] * other.oc[k];
    return s;
}

OccupancyVector OccupancyVector::operator-(const OccupancyVector& other) const {
    OccupancyVector out = *this;
    out.axpy(-1.0, other);
    return out;
}

std::vector<double> observation_mass(const OccupancyLayout& L, const OccupancyVector& x) {
    std::vector<double> mass(L.num_slots(), 0.0);
    for (int v = 0; v < L.num_state_action(); ++v) mass[L.var_slot[v]] += x.sa[v];
    return mass;
}

double coupling_residual(const OccupancyLayout& L, const OccupancyVector& x) {
    auto mass = observation_mass(L, x);
    double worst = 0.0;
    for (int o = 0; o < L.num_slots(); ++o) {
        double z = 0.0;
        for (int c = 0; c < L.num_coalitions(); ++c) z += x.oc[L.oc_index(o, c)];
        worst = std::max(worst, std::abs(z - mass[o]));
    }
    return worst;
}

namespace {

std::vector<double> balance(const OccupancyLayout& L, const OccupancyVector& x) {
    const auto& g = *L.game;
    std::vector<double> bal(g.num_states(), 0.0);
    bal[g.init_state()] += 1.0;
    for (int v = 0; v < L.num_state_action(); ++v) {
        double y = x.sa[v];
        if (y == 0.0) continue;
        int p = L.pairs[v];
        bal[g.pair_state(p)] -= y;
        for (const auto& o : g.successors(p)) bal[o.next] += y * o.prob;
    }
    return bal;
}

}  // namespace

double flow_residual(const OccupancyLayout& L, const OccupancyVector& x) {
    auto bal = balance(L, x);
    double worst = 0.0;
    for (std::size_t s = 0; s < bal.size(); ++s)
        if (L.flow_state[s]) worst = std::max(worst, std::abs(bal[s]));
    return worst;
}

std::vector<double> terminal_occupancy(const OccupancyLayout& L, const OccupancyVector& x) {
    auto bal = balance(L, x);
    const auto& g = *L.game;
    std::vector<double> out(g.num_states(), 0.0);
    for (int s = 0; s < g.num_states(); ++s)
        if (g.kind(s) == StateKind::target || g.kind(s) == StateKind::avoid) out[s] = bal[s];
    return out;
}

double reach_value(const OccupancyLayout& L, const OccupancyVector& x) {
    const auto& g = *L.game;
    double v = 0.0;
    for (int k = 0; k < L.num_state_action(); ++k) {
        if (x.sa[k] == 0.0) continue;
        for (const auto& o : g.successors(L.pairs[k]))
            if (g.kind(o.next) == StateKind::target) v += x.sa[k] * o.prob;
    }
    return v;
}

}  // namespace commsynth
