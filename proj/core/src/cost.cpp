#include "commsynth/cost.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "commsynth/error.hpp"
#include "commsynth/tolerances.hpp"

namespace commsynth {

namespace {

double xlogx_ratio(double m, double total) {
    if (m <= 0.0 || total <= 0.0) return 0.0;
    return m * std::log(m / total);
}

double smoothed_log_ratio(double m, double total) {
    if (total <= tol::kZeroMass) return 0.0;
    return std::log(std::max(m / total, tol::kLogFloor));
}

double entropy_of(std::span<const Outcome> dist) {
    double h = 0.0;
    for (const auto& o : dist)
        if (o.prob > 0.0) h -= o.prob * std::log(o.prob);
    return h;
}

// mixed-radix key builder that refuses to overflow
struct KeyBuilder {
    std::uint64_t key = 0;
    void push(int digit, int radix) {
        constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
        if (key > (kMax - static_cast<std::uint64_t>(digit)) / static_cast<std::uint64_t>(radix))
            throw InputError("joint index space too large for the cost model");
        key = key * static_cast<std::uint64_t>(radix) + static_cast<std::uint64_t>(digit);
    }
};

}  // namespace

struct CostModel::Scratch {
    std::vector<double> joint_mass;
    std::vector<std::vector<double>> cell_mass;
    std::vector<std::vector<double>> group_mass;
};

CostModel::CostModel(const OccupancyLayout& layout, bool total_correlation)
    : layout_(&layout), total_correlation_(total_correlation) {
    const auto& g = *layout.game;
    num_agents_ = g.num_agents();
    num_coalitions_ = g.num_coalitions();
    const int nv = layout.num_state_action();

    joint_group_.resize(nv);
    joint_entropy_.resize(nv);
    std::unordered_map<int, int> group_of_state;
    for (int v = 0; v < nv; ++v) {
        int p = layout.pairs[v];
        auto [it, fresh] = group_of_state.try_emplace(g.pair_state(p), num_joint_groups_);
        if (fresh) ++num_joint_groups_;
        joint_group_[v] = it->second;
        joint_entropy_[v] = entropy_of(g.successors(p));
    }

    std::vector<std::vector<int>> member_lists;
    for (int i = 0; i < num_agents_; ++i) member_lists.push_back({i});
    factor_of_coalition_.assign(num_coalitions_, -1);
    for (int c = 0; c < num_coalitions_; ++c) {
        const auto& members = g.coalitions()[c].members;
        if (members.empty()) continue;
        factor_of_coalition_[c] = static_cast<int>(member_lists.size());
        member_lists.push_back(members);
    }

    std::vector<int> actions;
    for (const auto& members : member_lists) {
        Factor f;
        f.members = members;
        f.cell.resize(nv);
        std::unordered_map<std::uint64_t, int> group_index, cell_index;
        for (int v = 0; v < nv; ++v) {
            int p = layout.pairs[v];
            int s = g.pair_state(p);
            int slot = layout.var_slot[v];
            actions = g.decode_action(g.pair_action(p));
            KeyBuilder gk;
            gk.push(slot, layout.num_slots());
            for (int j : members) gk.push(g.agent_state(s, j), g.agent(j).num_states());
            auto [git, gfresh] = group_index.try_emplace(gk.key, static_cast<int>(f.group_slot.size()));
            if (gfresh) f.group_slot.push_back(slot);
            KeyBuilder ck{static_cast<std::uint64_t>(git->second)};
            for (int j : members) ck.push(actions[j], g.agent(j).num_actions());
            auto [cit, cfresh] = cell_index.try_emplace(ck.key, static_cast<int>(f.cell_group.size()));
            if (cfresh) {
                double e = 0.0;
                for (int j : members) e += g.agent(j).transition_entropy(g.agent_state(s, j), actions[j]);
                f.cell_group.push_back(git->second);
                f.cell_entropy.push_back(e);
                f.cell_var.push_back(v);
            }
            f.cell[v] = cit->second;
        }
        factors_.push_back(std::move(f));
    }
}

void CostModel::accumulate(const OccupancyVector& x, Scratch& s) const {
    const int nv = layout_->num_state_action();
    s.joint_mass.assign(num_joint_groups_, 0.0);
    s.cell_mass.resize(factors_.size());
    s.group_mass.resize(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        s.cell_mass[f].assign(factors_[f].cell_group.size(), 0.0);
        s.group_mass[f].assign(factors_[f].group_slot.size(), 0.0);
    }
    for (int v = 0; v < nv; ++v) {
        double y = x.sa[v];
        if (y == 0.0) continue;
        s.joint_mass[joint_group_[v]] += y;
        for (std::size_t f = 0; f < factors_.size(); ++f) s.cell_mass[f][factors_[f].cell[v]] += y;
    }
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        const auto& F = factors_[f];
        for (std::size_t c = 0; c < F.cell_group.size(); ++c) s.group_mass[f][F.cell_group[c]] += s.cell_mass[f][c];
    }
}

CoalitionWeights CostModel::weights(const OccupancyVector& x) const {
    const int slots = layout_->num_slots();
    const auto& coalitions = layout_->game->coalitions();
    CoalitionWeights w;
    w.w_agent.assign(static_cast<std::size_t>(slots) * num_agents_, 0.0);
    w.w_coalition.assign(static_cast<std::size_t>(slots) * num_coalitions_, 0.0);
    w.zero_mass.assign(slots, 0);
    for (int o = 0; o < slots; ++o) {
        double* wc = &w.w_coalition[static_cast<std::size_t>(o) * num_coalitions_];
        double* wi = &w.w_agent[static_cast<std::size_t>(o) * num_agents_];
        if (total_correlation_) {
            for (int i = 0; i < num_agents_; ++i) wi[i] = 1.0;
            continue;
        }
        double z = 0.0;
        for (int c = 0; c < num_coalitions_; ++c) z += x.oc[layout_->oc_index(o, c)];
        if (z <= tol::kZeroMass) {
            w.zero_mass[o] = 1;
            for (int c = 0; c < num_coalitions_; ++c) wc[c] = 1.0 / num_coalitions_;
        } else {
            for (int c = 0; c < num_coalitions_; ++c) wc[c] = x.oc[layout_->oc_index(o, c)] / z;
        }
        for (int c = 0; c < num_coalitions_; ++c)
            for (int i = 0; i < num_agents_; ++i)
                if (!coalitions[c].contains(i)) wi[i] += wc[c];
    }
    return w;
}

namespace {

// per slot, sum over the factor's cells of -m log(m/M) + m e
std::vector<double> factor_slot_terms(const std::vector<double>& cell_mass, const std::vector<double>& group_mass,
                                      const std::vector<int>& cell_group, const std::vector<double>& cell_entropy,
                                      const std::vector<int>& group_slot, int slots) {
    std::vector<double> out(slots, 0.0);
    for (std::size_t c = 0; c < cell_mass.size(); ++c) {
        double m = cell_mass[c];
        if (m <= 0.0) continue;
        int grp = cell_group[c];
        out[group_slot[grp]] += -xlogx_ratio(m, group_mass[grp]) + m * cell_entropy[c];
    }
    return out;
}

}  // namespace

double CostModel::entropy(const OccupancyVector& x) const {
    Scratch s;
    accumulate(x, s);
    double h = 0.0;
    for (int v = 0; v < layout_->num_state_action(); ++v) {
        double y = x.sa[v];
        if (y <= 0.0) continue;
        h += -xlogx_ratio(y, s.joint_mass[joint_group_[v]]) + y * joint_entropy_[v];
    }
    return h;
}

CostBreakdown CostModel::breakdown(const OccupancyVector& x) const {
    CostBreakdown out;
    Scratch s;
    accumulate(x, s);
    const int slots = layout_->num_slots();
    for (int v = 0; v < layout_->num_state_action(); ++v) {
        double y = x.sa[v];
        if (y <= 0.0) continue;
        out.h += -xlogx_ratio(y, s.joint_mass[joint_group_[v]]) + y * joint_entropy_[v];
    }
    auto w = weights(x);
    out.g_agent.assign(num_agents_, 0.0);
    out.g_coalition.assign(num_coalitions_, 0.0);
    for (int i = 0; i < num_agents_; ++i) {
        const auto& F = factors_[i];
        auto t = factor_slot_terms(s.cell_mass[i], s.group_mass[i], F.cell_group, F.cell_entropy, F.group_slot, slots);
        for (int o = 0; o < slots; ++o) out.g_agent[i] += w.w_agent[static_cast<std::size_t>(o) * num_agents_ + i] * t[o];
    }
    for (int c = 0; c < num_coalitions_; ++c) {
        int f = factor_of_coalition_[c];
        if (f < 0 || total_correlation_) continue;
        const auto& F = factors_[f];
        auto t = factor_slot_terms(s.cell_mass[f], s.group_mass[f], F.cell_group, F.cell_entropy, F.group_slot, slots);
        for (int o = 0; o < slots; ++o)
            out.g_coalition[c] += w.w_coalition[static_cast<std::size_t>(o) * num_coalitions_ + c] * t[o];
    }
    out.dbar = -out.h;
    for (double gi : out.g_agent) out.dbar += gi;
    for (double gc : out.g_coalition) out.dbar += gc;
    return out;
}

double CostModel::gradient(const OccupancyVector& x, CostGradient& grad) const {
    Scratch s;
    accumulate(x, s);
    const int slots = layout_->num_slots();
    const int nv = layout_->num_state_action();
    auto w = weights(x);

    // A[f][o]: unweighted factor term per slot; L[f][cell]: smoothed log conditional
    std::vector<std::vector<double>> A(factors_.size());
    std::vector<std::vector<double>> L(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        const auto& F = factors_[f];
        A[f] = factor_slot_terms(s.cell_mass[f], s.group_mass[f], F.cell_group, F.cell_entropy, F.group_slot, slots);
        L[f].resize(F.cell_group.size());
        for (std::size_t c = 0; c < F.cell_group.size(); ++c)
            L[f][c] = smoothed_log_ratio(s.cell_mass[f][c], s.group_mass[f][F.cell_group[c]]);
    }

    // per slot and factor, the weight that multiplies the factor's term
    const int nf = static_cast<int>(factors_.size());
    std::vector<double> fw(static_cast<std::size_t>(slots) * nf, 0.0);
    for (int o = 0; o < slots; ++o) {
        for (int i = 0; i < num_agents_; ++i) fw[static_cast<std::size_t>(o) * nf + i] = w.w_agent[static_cast<std::size_t>(o) * num_agents_ + i];
        if (total_correlation_) continue;
        for (int c = 0; c < num_coalitions_; ++c)
            if (factor_of_coalition_[c] >= 0)
                fw[static_cast<std::size_t>(o) * nf + factor_of_coalition_[c]] =
                    w.w_coalition[static_cast<std::size_t>(o) * num_coalitions_ + c];
    }

    double value = 0.0;
    grad.sa.assign(nv, 0.0);
    for (int v = 0; v < nv; ++v) {
        double y = x.sa[v];
        double Y = s.joint_mass[joint_group_[v]];
        if (y > 0.0) value -= -xlogx_ratio(y, Y) + y * joint_entropy_[v];
        double gv = smoothed_log_ratio(y, Y) - joint_entropy_[v];
        const double* wrow = &fw[static_cast<std::size_t>(layout_->var_slot[v]) * nf];
        for (int f = 0; f < nf; ++f) {
            double wf = wrow[f];
            if (wf == 0.0) continue;
            int cell = factors_[f].cell[v];
            gv += wf * (-L[f][cell] + factors_[f].cell_entropy[cell]);
        }
        grad.sa[v] = gv;
    }
    for (int o = 0; o < slots; ++o)
        for (int f = 0; f < nf; ++f) value += fw[static_cast<std::size_t>(o) * nf + f] * A[f][o];

    grad.oc.assign(layout_->num_obs_coalition(), 0.0);
    if (!total_correlation_) {
        const auto& coalitions = layout_->game->coalitions();
        std::vector<double> Q(num_coalitions_);
        for (int o = 0; o < slots; ++o) {
            if (w.zero_mass[o]) continue;
            double z = 0.0;
            for (int c = 0; c < num_coalitions_; ++c) z += x.oc[layout_->oc_index(o, c)];
            double mean = 0.0;
            for (int c = 0; c < num_coalitions_; ++c) {
                int f = factor_of_coalition_[c];
                Q[c] = f >= 0 ? A[f][o] : 0.0;
                for (int i = 0; i < num_agents_; ++i)
                    if (!coalitions[c].contains(i)) Q[c] += A[i][o];
                mean += w.w_coalition[static_cast<std::size_t>(o) * num_coalitions_ + c] * Q[c];
            }
            for (int c = 0; c < num_coalitions_; ++c) grad.oc[layout_->oc_index(o, c)] = (Q[c] - mean) / z;
        }
    }
    return value;
}

CostModel::Conditionals CostModel::conditionals(const OccupancyVector& x) const {
    Scratch s;
    accumulate(x, s);
    Conditionals out;
    out.cell_prob.resize(factors_.size());
    out.zero_mass.resize(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        const auto& F = factors_[f];
        std::vector<int> cells_in_group(F.group_slot.size(), 0);
        for (int grp : F.cell_group) ++cells_in_group[grp];
        out.zero_mass[f].assign(F.group_slot.size(), 0);
        out.cell_prob[f].resize(F.cell_group.size());
        for (std::size_t c = 0; c < F.cell_group.size(); ++c) {
            int grp = F.cell_group[c];
            double M = s.group_mass[f][grp];
            if (M <= tol::kZeroMass) {
                out.zero_mass[f][grp] = 1;
                out.cell_prob[f][c] = 1.0 / cells_in_group[grp];
            } else {
                out.cell_prob[f][c] = std::max(s.cell_mass[f][c], 0.0) / M;
            }
        }
    }
    return out;
}

std::vector<double> CostModel::coalition_costs(const OccupancyVector& x) const {
    Scratch s;
    accumulate(x, s);
    const int slots = layout_->num_slots();
    std::vector<std::vector<double>> A(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        const auto& F = factors_[f];
        A[f] = factor_slot_terms(s.cell_mass[f], s.group_mass[f], F.cell_group, F.cell_entropy, F.group_slot, slots);
    }
    std::vector<double> joint(slots, 0.0);
    for (int v = 0; v < layout_->num_state_action(); ++v) {
        double y = x.sa[v];
        if (y > 0.0) joint[layout_->var_slot[v]] += -xlogx_ratio(y, s.joint_mass[joint_group_[v]]) + y * joint_entropy_[v];
    }
    const auto& coalitions = layout_->game->coalitions();
    std::vector<double> out(static_cast<std::size_t>(slots) * num_coalitions_, 0.0);
    for (int o = 0; o < slots; ++o)
        for (int c = 0; c < num_coalitions_; ++c) {
            int f = factor_of_coalition_[c];
            double q = (f >= 0 ? A[f][o] : 0.0) - joint[o];
            for (int i = 0; i < num_agents_; ++i)
                if (!coalitions[c].contains(i)) q += A[i][o];
            out[static_cast<std::size_t>(o) * num_coalitions_ + c] = q;
        }
    return out;
}

std::vector<MarginalEntry> CostModel::marginal(const OccupancyVector& x, int factor) const {
    Scratch s;
    accumulate(x, s);
    const auto& g = *layout_->game;
    const auto& F = factors_[factor];
    std::vector<MarginalEntry> out(F.cell_group.size());
    for (std::size_t c = 0; c < F.cell_group.size(); ++c) {
        int v = F.cell_var[c];
        int p = layout_->pairs[v];
        auto actions = g.decode_action(g.pair_action(p));
        auto& e = out[c];
        e.observation = layout_->observations[F.group_slot[F.cell_group[c]]];
        for (int j : F.members) {
            e.agent_states.push_back(g.agent_state(g.pair_state(p), j));
            e.actions.push_back(actions[j]);
        }
        e.mass = s.cell_mass[factor][c];
    }
    return out;
}

std::vector<MarginalEntry> CostModel::marginal_agent(const OccupancyVector& x, int agent) const {
    return marginal(x, agent);
}

std::vector<MarginalEntry> CostModel::marginal_coalition(const OccupancyVector& x, int coalition) const {
    int f = factor_of_coalition_.at(coalition);
    if (f < 0) {
        // empty coalition: one aggregate per observation
        std::vector<MarginalEntry> out(layout_->num_slots());
        for (int o = 0; o < layout_->num_slots(); ++o) out[o].observation = layout_->observations[o];
        for (int v = 0; v < layout_->num_state_action(); ++v) out[layout_->var_slot[v]].mass += x.sa[v];
        return out;
    }
    return marginal(x, f);
}

}  // namespace commsynth
