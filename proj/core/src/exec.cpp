#include "commsynth/exec.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <random>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "commsynth/error.hpp"
#include "commsynth/parallel.hpp"
#include "commsynth/tolerances.hpp"

namespace commsynth {

namespace {

void merge_row(Distribution& row) {
    std::sort(row.begin(), row.end(), [](const Outcome& a, const Outcome& b) { return a.next < b.next; });
    std::size_t w = 0;
    for (std::size_t r = 0; r < row.size(); ++r) {
        if (w > 0 && row[w - 1].next == row[r].next)
            row[w - 1].prob += row[r].prob;
        else
            row[w++] = row[r];
    }
    row.resize(w);
    std::erase_if(row, [](const Outcome& o) { return o.prob <= 0.0; });
}

void add_pair(const CooperativeGame& g, int p, double weight, Distribution& row) {
    for (const auto& o : g.successors(p)) row.push_back(Outcome{o.next, weight * o.prob});
}

// per layout variable, pi_act(a | s)
std::vector<double> policy_var_probs(const OccupancyLayout& layout, const PolicyPair& pair) {
    const auto& g = *layout.game;
    std::vector<double> out(layout.num_state_action(), 0.0);
    for (int v = 0; v < layout.num_state_action(); ++v) {
        int p = layout.pairs[v];
        for (const auto& ap : pair.action_policy[g.pair_state(p)])
            if (ap.action == g.pair_action(p)) out[v] = ap.prob;
    }
    return out;
}

Distribution terminal_row(const CooperativeGame& g) { return Distribution{Outcome{g.sink_state(), 1.0}}; }

std::vector<char> forward_reachable(const InducedChain& chain) {
    std::vector<char> seen(chain.num_states(), 0);
    std::deque<int> queue{chain.init};
    seen[chain.init] = 1;
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        if (chain.kind[s] != StateKind::normal) continue;
        for (const auto& o : chain.rows[s])
            if (!seen[o.next]) {
                seen[o.next] = 1;
                queue.push_back(o.next);
            }
    }
    return seen;
}

// states of `within` with a path to some state of `goal` through `within`
std::vector<char> backward_reach(const InducedChain& chain, const std::vector<char>& within,
                                 const std::vector<char>& goal) {
    const int n = chain.num_states();
    std::vector<std::vector<int>> pred(n);
    for (int s = 0; s < n; ++s)
        if (within[s])
            for (const auto& o : chain.rows[s]) pred[o.next].push_back(s);
    std::vector<char> ok(n, 0);
    std::deque<int> queue;
    for (int s = 0; s < n; ++s)
        if (goal[s]) {
            ok[s] = 1;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int s : pred[u])
            if (!ok[s]) {
                ok[s] = 1;
                queue.push_back(s);
            }
    }
    return ok;
}

std::vector<double> sparse_solve(const std::vector<Eigen::Triplet<double>>& triplets, const std::vector<double>& rhs) {
    const int m = static_cast<int>(rhs.size());
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw GuardExceeded("singular chain system");
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), m);
    Eigen::VectorXd x = lu.solve(b);
    return std::vector<double>(x.data(), x.data() + m);
}

}  // namespace

void validate_policy(const CooperativeGame& g, const PolicyPair& pair) {
    if (static_cast<int>(pair.action_policy.size()) != g.num_states())
        throw InputError("action policy does not cover every state");
    if (static_cast<int>(pair.comm_policy.size()) != g.num_observations())
        throw InputError("communication policy does not cover every observation");
    for (int s = 0; s < g.num_states(); ++s) {
        double sum = 0.0;
        for (const auto& ap : pair.action_policy[s]) {
            if (ap.prob < 0.0) throw InputError(fmt::format("negative probability at {}", g.state_label(s)));
            if (g.find_pair(s, ap.action) < 0)
                throw InputError(fmt::format("disabled action {} at {}", ap.action, g.state_label(s)));
            sum += ap.prob;
        }
        if (std::abs(sum - 1.0) > tol::kPolicyRowSum)
            throw InputError(fmt::format("action row of {} sums to {}", g.state_label(s), sum));
    }
    for (int o = 0; o < g.num_observations(); ++o) {
        const auto& row = pair.comm_policy[o];
        if (static_cast<int>(row.size()) != g.num_coalitions())
            throw InputError("communication row has the wrong length");
        double sum = 0.0;
        for (double p : row) {
            if (p < 0.0) throw InputError("negative communication probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol::kPolicyRowSum)
            throw InputError(fmt::format("communication row of {} sums to {}", g.observation_label(o), sum));
    }
}

InducedChain induce_full_chain(const CooperativeGame& g, const PolicyPair& pair) {
    validate_policy(g, pair);
    InducedChain chain;
    chain.init = g.init_state();
    chain.rows.resize(g.num_states());
    chain.kind.resize(g.num_states());
    for (int s = 0; s < g.num_states(); ++s) {
        chain.kind[s] = g.kind(s);
        auto& row = chain.rows[s];
        for (const auto& ap : pair.action_policy[s])
            if (ap.prob > 0.0) add_pair(g, g.find_pair(s, ap.action), ap.prob, row);
        merge_row(row);
    }
    return chain;
}

OccupancyLayout full_layout(const CooperativeGame& g) {
    std::vector<char> decision(g.num_states(), 0);
    for (int s = 0; s < g.num_states(); ++s) decision[s] = g.kind(s) == StateKind::normal;
    return make_layout(g, decision);
}

std::optional<std::vector<double>> expected_visits(const InducedChain& chain) {
    const int n = chain.num_states();
    std::vector<double> visits(n, 0.0);
    if (chain.kind[chain.init] != StateKind::normal) return visits;
    auto reach = forward_reachable(chain);
    std::vector<char> transient(n, 0), exits(n, 0);
    for (int s = 0; s < n; ++s) {
        transient[s] = reach[s] && chain.kind[s] == StateKind::normal;
        exits[s] = reach[s] && chain.kind[s] != StateKind::normal;
    }
    auto leaves = backward_reach(chain, transient, exits);
    std::vector<int> index(n, -1);
    int m = 0;
    for (int s = 0; s < n; ++s)
        if (transient[s]) {
            if (!leaves[s]) return std::nullopt;
            index[s] = m++;
        }
    // (I - P_TT)^T v = e_init
    std::vector<Eigen::Triplet<double>> trip;
    for (int s = 0; s < n; ++s) {
        if (index[s] < 0) continue;
        trip.emplace_back(index[s], index[s], 1.0);
        for (const auto& o : chain.rows[s])
            if (index[o.next] >= 0) trip.emplace_back(index[o.next], index[s], -o.prob);
    }
    std::vector<double> rhs(m, 0.0);
    rhs[index[chain.init]] = 1.0;
    auto sol = sparse_solve(trip, rhs);
    for (int s = 0; s < n; ++s)
        if (index[s] >= 0) visits[s] = std::max(sol[index[s]], 0.0);
    return visits;
}

OccupancyVector occupancy_from_policy(const OccupancyLayout& layout, const PolicyPair& pair) {
    const auto& g = *layout.game;
    auto chain = induce_full_chain(g, pair);
    auto visits = expected_visits(chain);
    if (!visits) throw GuardExceeded("the policy keeps the process away from terminal states forever");
    auto probs = policy_var_probs(layout, pair);
    auto x = OccupancyVector::zeros(layout);
    for (int v = 0; v < layout.num_state_action(); ++v) x.sa[v] = (*visits)[g.pair_state(layout.pairs[v])] * probs[v];
    auto mass = observation_mass(layout, x);
    for (int o = 0; o < layout.num_slots(); ++o)
        for (int c = 0; c < layout.num_coalitions(); ++c)
            x.oc[layout.oc_index(o, c)] = mass[o] * pair.comm_policy[layout.observations[o]][c];
    return x;
}

void restricted_action_probs(const CostModel& model, const CostModel::Conditionals& cond, int s, int coalition,
                             std::vector<double>& probs) {
    const auto& layout = model.layout();
    const auto& g = *layout.game;
    const auto& members = g.coalitions()[coalition].members;
    const int fc = model.factor_of_coalition(coalition);
    probs.clear();
    for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
        int v = layout.var_of_pair[p];
        double q = fc >= 0 ? cond.cell_prob[fc][model.cell_of(fc, v)] : 1.0;
        for (int i = 0; i < g.num_agents(); ++i)
            if (!std::binary_search(members.begin(), members.end(), i)) q *= cond.cell_prob[i][model.cell_of(i, v)];
        probs.push_back(q);
    }
}

InducedChain induce_restricted_chain(const OccupancyLayout& layout, const OccupancyVector& x, const PolicyPair& pair) {
    const auto& g = *layout.game;
    validate_policy(g, pair);
    CostModel model(layout);
    auto cond = model.conditionals(x);
    InducedChain chain;
    chain.init = g.init_state();
    chain.rows.resize(g.num_states());
    chain.kind.resize(g.num_states());
    std::vector<double> probs;
    for (int s = 0; s < g.num_states(); ++s) {
        chain.kind[s] = g.kind(s);
        auto& row = chain.rows[s];
        if (g.kind(s) != StateKind::normal) {
            row = terminal_row(g);
            continue;
        }
        if (!layout.flow_state[s]) throw InputError("restricted execution needs a layout over every non-terminal state");
        const auto& comm = pair.comm_policy[g.obs_of(s)];
        for (int c = 0; c < g.num_coalitions(); ++c) {
            if (comm[c] <= 0.0) continue;
            restricted_action_probs(model, cond, s, c, probs);
            for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
                double q = comm[c] * probs[p - g.pair_begin(s)];
                if (q > 0.0) add_pair(g, p, q, row);
            }
        }
        merge_row(row);
    }
    return chain;
}

InducedChain induce_restricted_chain(const CooperativeGame& g, const PolicyPair& pair) {
    auto layout = full_layout(g);
    auto x = occupancy_from_policy(layout, pair);
    return induce_restricted_chain(layout, x, pair);
}

double reach_avoid_probability(const InducedChain& chain) {
    const int n = chain.num_states();
    if (chain.kind[chain.init] == StateKind::target) return 1.0;
    if (chain.kind[chain.init] != StateKind::normal) return 0.0;
    auto reach = forward_reachable(chain);
    std::vector<char> normal(n, 0), target(n, 0);
    for (int s = 0; s < n; ++s) {
        normal[s] = reach[s] && chain.kind[s] == StateKind::normal;
        target[s] = chain.kind[s] == StateKind::target;
    }
    auto can = backward_reach(chain, normal, target);
    std::vector<int> index(n, -1);
    int m = 0;
    for (int s = 0; s < n; ++s)
        if (normal[s] && can[s]) index[s] = m++;
    if (index[chain.init] < 0) return 0.0;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> rhs(m, 0.0);
    for (int s = 0; s < n; ++s) {
        if (index[s] < 0) continue;
        trip.emplace_back(index[s], index[s], 1.0);
        for (const auto& o : chain.rows[s]) {
            if (index[o.next] >= 0)
                trip.emplace_back(index[s], index[o.next], -o.prob);
            else if (target[o.next])
                rhs[index[s]] += o.prob;
        }
    }
    auto p = sparse_solve(trip, rhs);
    return std::clamp(p[index[chain.init]], 0.0, 1.0);
}

double reach_avoid_probability_iterative(const InducedChain& chain, double tolerance, int max_sweeps) {
    const int n = chain.num_states();
    std::vector<double> p(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (chain.kind[s] == StateKind::target) p[s] = 1.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (int s = 0; s < n; ++s) {
            if (chain.kind[s] != StateKind::normal) continue;
            double v = 0.0;
            for (const auto& o : chain.rows[s]) v += o.prob * p[o.next];
            change = std::max(change, std::abs(v - p[s]));
            p[s] = v;
        }
        if (change <= tolerance) break;
    }
    return p[chain.init];
}

TruncatedD truncated_exact_D(const CooperativeGame& g, const PolicyPair& pair, const TruncatedOptions& options) {
    auto chain = induce_full_chain(g, pair);
    auto layout = full_layout(g);
    CostModel model(layout);
    auto probs = policy_var_probs(layout, pair);
    TruncatedD out;
    out.g_agent.assign(g.num_agents(), 0.0);
    out.g_coalition.assign(g.num_coalitions(), 0.0);
    std::vector<double> dist(g.num_states(), 0.0), next(g.num_states(), 0.0);
    dist[g.init_state()] = 1.0;
    auto live_mass = [&](const std::vector<double>& d) {
        double m = 0.0;
        for (int s = 0; s < g.num_states(); ++s)
            if (g.kind(s) == StateKind::normal) m += d[s];
        return m;
    };
    out.residual_mass = live_mass(dist);
    std::int64_t tracked = 0;
    auto x = OccupancyVector::zeros(layout);
    while (out.residual_mass > options.mass_floor && out.steps < options.horizon) {
        for (int v = 0; v < layout.num_state_action(); ++v) x.sa[v] = dist[g.pair_state(layout.pairs[v])] * probs[v];
        auto mass = observation_mass(layout, x);
        for (int o = 0; o < layout.num_slots(); ++o)
            for (int c = 0; c < layout.num_coalitions(); ++c)
                x.oc[layout.oc_index(o, c)] = mass[o] * pair.comm_policy[layout.observations[o]][c];
        auto b = model.breakdown(x);
        out.h += b.h;
        out.d += b.dbar;
        for (int i = 0; i < g.num_agents(); ++i) out.g_agent[i] += b.g_agent[i];
        for (int c = 0; c < g.num_coalitions(); ++c) out.g_coalition[c] += b.g_coalition[c];

        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < g.num_states(); ++s) {
            if (dist[s] <= 0.0 || g.kind(s) != StateKind::normal) continue;
            ++tracked;
            for (const auto& o : chain.rows[s]) next[o.next] += dist[s] * o.prob;
        }
        if (tracked > options.guard) throw GuardExceeded("truncated evaluation exceeded its guard");
        dist.swap(next);
        ++out.steps;
        out.residual_mass = live_mass(dist);
    }
    return out;
}

KlResult kl_divergence_truncated(const InducedChain& full, const InducedChain& restricted,
                                 const TruncatedOptions& options) {
    const int n = full.num_states();
    if (restricted.num_states() != n) throw InputError("chains have different state spaces");
    // per-state KL of the successor rows
    std::vector<double> row_kl(n, 0.0);
    std::vector<char> row_inf(n, 0);
    for (int s = 0; s < n; ++s) {
        const auto& P = full.rows[s];
        const auto& Q = restricted.rows[s];
        std::size_t j = 0;
        for (const auto& o : P) {
            while (j < Q.size() && Q[j].next < o.next) ++j;
            double q = (j < Q.size() && Q[j].next == o.next) ? Q[j].prob : 0.0;
            if (o.prob <= 0.0) continue;
            if (q <= 0.0)
                row_inf[s] = 1;
            else
                row_kl[s] += o.prob * std::log(o.prob / q);
        }
    }
    KlResult out;
    std::vector<double> dist(n, 0.0), next(n, 0.0);
    dist[full.init] = 1.0;
    auto live = [&] {
        double m = 0.0;
        for (int s = 0; s < n; ++s)
            if (full.kind[s] == StateKind::normal) m += dist[s];
        return m;
    };
    out.residual_mass = live();
    std::int64_t tracked = 0;
    while (out.residual_mass > options.mass_floor && out.steps < options.horizon) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < n; ++s) {
            if (dist[s] <= 0.0 || full.kind[s] != StateKind::normal) continue;
            ++tracked;
            if (row_inf[s]) out.infinite = true;
            out.value += dist[s] * row_kl[s];
            for (const auto& o : full.rows[s]) next[o.next] += dist[s] * o.prob;
        }
        if (tracked > options.guard) throw GuardExceeded("truncated evaluation exceeded its guard");
        dist.swap(next);
        ++out.steps;
        out.residual_mass = live();
    }
    if (out.infinite) out.value = std::numeric_limits<double>::infinity();
    return out;
}

double loss_bound(double d) { return std::sqrt(1.0 - std::exp(-std::max(d, 0.0))); }

BoundCheck check_theorem1_bound(const CooperativeGame& g, const PolicyPair& pair) {
    auto layout = full_layout(g);
    auto x = occupancy_from_policy(layout, pair);
    BoundCheck out;
    out.p_full = reach_avoid_probability(induce_full_chain(g, pair));
    out.p_restricted = reach_avoid_probability(induce_restricted_chain(layout, x, pair));
    out.d_value = CostModel(layout).value(x);
    out.bound = loss_bound(out.d_value);
    out.satisfied = out.p_full - out.p_restricted <= out.bound + tol::kBoundMargin;
    return out;
}

namespace {

std::string local_tuple(const CooperativeGame& g, int s) {
    std::string out = "(";
    for (int i = 0; i < g.num_agents(); ++i) {
        const auto& a = g.agent(i);
        if (i) out += ',';
        out += a.local_labels[a.states[g.agent_state(s, i)].local];
    }
    return out + ")";
}

int sample_index(std::mt19937_64& rng, const double* probs, int n) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int last = -1;
    for (int k = 0; k < n; ++k) {
        if (probs[k] <= 0.0) continue;
        acc += probs[k];
        last = k;
        if (u < acc) return k;
    }
    return last;
}

}  // namespace

SimulationResult simulate(const CooperativeGame& g, const PolicyPair& pair, const SimulationOptions& options,
                          std::ostream* trajectories) {
    if (options.episodes < 1) throw InputError("episodes must be positive");
    validate_policy(g, pair);
    auto layout = full_layout(g);
    std::optional<CostModel> model;
    CostModel::Conditionals cond;
    if (options.mode == ExecutionMode::restricted) {
        auto x = occupancy_from_policy(layout, pair);
        model.emplace(layout);
        cond = model->conditionals(x);
    }

    auto run = [&](std::int64_t episode, std::ostream* out) -> int {
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32)};
        std::mt19937_64 rng(seq);
        std::vector<double> probs;
        int s = g.init_state();
        for (int t = 0; t < options.max_steps; ++t) {
            if (g.kind(s) == StateKind::target) return 1;
            if (g.kind(s) != StateKind::normal) return 0;
            const auto& comm = pair.comm_policy[g.obs_of(s)];
            int c = sample_index(rng, comm.data(), static_cast<int>(comm.size()));
            int p = -1;
            if (options.mode == ExecutionMode::restricted) {
                restricted_action_probs(*model, cond, s, c, probs);
                p = g.pair_begin(s) + sample_index(rng, probs.data(), static_cast<int>(probs.size()));
            } else {
                const auto& row = pair.action_policy[s];
                probs.clear();
                for (const auto& ap : row) probs.push_back(ap.prob);
                p = g.find_pair(s, row[sample_index(rng, probs.data(), static_cast<int>(probs.size()))].action);
            }
            if (out)
                *out << t << '\t' << g.observation_label(g.obs_of(s)) << '\t' << local_tuple(g, s) << '\t'
                     << g.coalitions()[c].to_string() << '\t' << g.action_label(g.pair_action(p)) << '\n';
            auto succ = g.successors(p);
            probs.clear();
            for (const auto& o : succ) probs.push_back(o.prob);
            s = succ[sample_index(rng, probs.data(), static_cast<int>(probs.size()))].next;
        }
        if (g.kind(s) == StateKind::target) return 1;
        return g.kind(s) == StateKind::normal ? -1 : 0;
    };

    std::vector<signed char> outcome(options.episodes);
    if (trajectories) {
        for (std::int64_t e = 0; e < options.episodes; ++e) {
            *trajectories << "# episode " << e << '\n';
            outcome[e] = static_cast<signed char>(run(e, trajectories));
        }
    } else {
        parallel_for(static_cast<std::size_t>(options.episodes), worker_count(),
                     [&](std::size_t e) { outcome[e] = static_cast<signed char>(run(static_cast<std::int64_t>(e), nullptr)); });
    }
    SimulationResult res;
    res.episodes = options.episodes;
    for (auto o : outcome) {
        if (o == 1) ++res.successes;
        if (o < 0) ++res.unfinished;
    }
    res.estimate = static_cast<double>(res.successes) / static_cast<double>(res.episodes);
    res.standard_error = std::sqrt(res.estimate * (1.0 - res.estimate) / static_cast<double>(res.episodes));
    return res;
}

}  // namespace commsynth
