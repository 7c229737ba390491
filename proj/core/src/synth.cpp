#include "commsynth/synth.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "commsynth/error.hpp"
#include "commsynth/exec.hpp"
#include "commsynth/parallel.hpp"
#include "commsynth/reach.hpp"
#include "commsynth/tolerances.hpp"

namespace commsynth {

const char* to_string(SynthesisStatus status) {
    switch (status) {
        case SynthesisStatus::converged: return "converged";
        case SynthesisStatus::iteration_limit: return "iteration-limit";
        case SynthesisStatus::infeasible_threshold: return "infeasible-threshold";
    }
    return "unknown";
}

const char* to_string(StepRule rule) { return rule == StepRule::line_search ? "line-search" : "diminishing"; }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// non-terminal states reachable from init through non-terminal states that can reach the target
std::vector<char> relevant_augmented(const CooperativeGame& g) {
    const int n = g.num_states();
    std::vector<std::vector<int>> pred(n);
    for (int s = 0; s < n; ++s) {
        if (g.kind(s) != StateKind::normal) continue;
        for (int p = g.pair_begin(s); p < g.pair_end(s); ++p)
            for (const auto& o : g.successors(p)) pred[o.next].push_back(s);
    }
    std::vector<char> back(n, 0);
    std::deque<int> queue;
    for (int s = 0; s < n; ++s)
        if (g.kind(s) == StateKind::target) {
            back[s] = 1;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int s : pred[u])
            if (!back[s]) {
                back[s] = 1;
                queue.push_back(s);
            }
    }
    std::vector<char> rel(n, 0);
    int init = g.init_state();
    if (g.kind(init) != StateKind::normal || !back[init]) return rel;
    rel[init] = 1;
    queue.push_back(init);
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        for (int p = g.pair_begin(s); p < g.pair_end(s); ++p)
            for (const auto& o : g.successors(p))
                if (g.kind(o.next) == StateKind::normal && back[o.next] && !rel[o.next]) {
                    rel[o.next] = 1;
                    queue.push_back(o.next);
                }
    }
    return rel;
}

double target_prob(const CooperativeGame& g, int p) {
    double t = 0.0;
    for (const auto& o : g.successors(p))
        if (g.kind(o.next) == StateKind::target) t += o.prob;
    return t;
}

// flow rows over the layout's state-action variables, shared by the region and the oracle
std::vector<std::vector<Entry>> flow_rows(const OccupancyLayout& L, std::vector<int>& row_of_state) {
    const auto& g = *L.game;
    row_of_state.assign(g.num_states(), -1);
    int rows = 0;
    for (int s = 0; s < g.num_states(); ++s)
        if (L.flow_state[s]) row_of_state[s] = rows++;
    std::vector<std::vector<Entry>> entries(rows);
    for (int v = 0; v < L.num_state_action(); ++v) {
        int p = L.pairs[v];
        int s = g.pair_state(p);
        double self = 0.0;
        for (const auto& o : g.successors(p)) {
            if (o.next == s)
                self += o.prob;
            else if (row_of_state[o.next] >= 0)
                entries[row_of_state[o.next]].push_back(Entry{v, -o.prob});
        }
        entries[row_of_state[s]].push_back(Entry{v, 1.0 - self});
    }
    for (auto& e : entries)
        std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
    return entries;
}

}  // namespace

FeasibleRegion assemble_feasible_region(const CooperativeGame& g, double v_threshold, RegionLayout mode, double budget) {
    if (!g.augmented()) throw InputError("the stage-2 region is built on the sink-augmented game");
    if (v_threshold < 0.0 || v_threshold > 1.0) throw InputError("threshold must lie in [0, 1]");
    std::vector<char> decision;
    if (mode == RegionLayout::sparse) {
        decision = relevant_augmented(g);
    } else {
        decision.assign(g.num_states(), 0);
        for (int s = 0; s < g.num_states(); ++s) decision[s] = g.kind(s) == StateKind::normal;
    }
    FeasibleRegion R;
    R.mode = mode;
    R.v_threshold = v_threshold;
    R.budget = budget;
    R.layout = make_layout(g, decision);
    const auto& L = R.layout;

    for (int v = 0; v < L.num_state_action(); ++v) R.lp.add_variable();
    if (mode == RegionLayout::dense) {
        for (int s = 0; s < g.num_states(); ++s)
            if (L.flow_state[s])
                for (int a = 0; a < g.num_joint_actions(); ++a)
                    if (g.find_pair(s, a) < 0) R.lp.add_variable(0.0, true);
    }
    R.oc_column_offset = R.lp.num_variables();
    // dense: one slot per game observation, not only those of decision states
    std::vector<int> slot_obs = L.observations;
    if (mode == RegionLayout::dense) {
        slot_obs.resize(g.num_observations());
        for (int o = 0; o < g.num_observations(); ++o) slot_obs[o] = o;
    }
    const int C = g.num_coalitions();
    for (std::size_t k = 0; k < slot_obs.size() * C; ++k) R.lp.add_variable();

    std::vector<int> row_of_state;
    auto rows = flow_rows(L, row_of_state);
    for (int s = 0; s < g.num_states(); ++s)
        if (row_of_state[s] >= 0) R.lp.add_row(std::move(rows[row_of_state[s]]), RowSense::equal, s == g.init_state() ? 1.0 : 0.0);
    R.num_flow_rows = static_cast<int>(rows.size());

    std::vector<std::vector<Entry>> coupling(slot_obs.size());
    for (int v = 0; v < L.num_state_action(); ++v) {
        int obs = L.observations[L.var_slot[v]];
        auto it = std::find(slot_obs.begin(), slot_obs.end(), obs);
        coupling[it - slot_obs.begin()].push_back(Entry{v, -1.0});
    }
    for (std::size_t o = 0; o < slot_obs.size(); ++o) {
        for (int c = 0; c < C; ++c)
            coupling[o].push_back(Entry{R.oc_column_offset + static_cast<int>(o) * C + c, 1.0});
        R.lp.add_row(std::move(coupling[o]), RowSense::equal, 0.0);
    }
    R.num_coupling_rows = static_cast<int>(slot_obs.size());

    std::vector<Entry> value;
    for (int v = 0; v < L.num_state_action(); ++v) {
        double t = target_prob(g, L.pairs[v]);
        if (t > 0.0) value.push_back(Entry{v, t});
    }
    R.value_row = R.lp.add_row(std::move(value), RowSense::greater_equal, v_threshold);
    if (budget > 0.0) {
        std::vector<Entry> all;
        for (int v = 0; v < L.num_state_action(); ++v) all.push_back(Entry{v, 1.0});
        R.budget_row = R.lp.add_row(std::move(all), RowSense::less_equal, budget);
    }
    return R;
}

namespace {

// Linear-minimization oracle over the state-action part of the region.
struct Oracle {
    LinearProgram lp;
    SimplexSolver::BasisHint hint;
};

std::vector<double> max_values(const CooperativeGame& g) {
    const int n = g.num_states();
    std::vector<double> v(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (g.kind(s) == StateKind::target) v[s] = 1.0;
    for (int sweep = 0; sweep < 1000000; ++sweep) {
        double change = 0.0;
        for (int s = 0; s < n; ++s) {
            if (g.kind(s) != StateKind::normal) continue;
            double best = 0.0;
            for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
                double q = 0.0;
                for (const auto& o : g.successors(p)) q += o.prob * v[o.next];
                best = std::max(best, q);
            }
            change = std::max(change, std::abs(best - v[s]));
            v[s] = best;
        }
        if (change <= tol::kValueIteration) break;
    }
    return v;
}

Oracle build_oracle(const FeasibleRegion& R, const std::vector<char>& fixed, const std::vector<double>& warm) {
    const auto& L = R.layout;
    const auto& g = *L.game;
    Oracle O;
    for (int v = 0; v < L.num_state_action(); ++v) O.lp.add_variable(0.0, fixed[v] != 0);
    std::vector<int> row_of_state;
    auto rows = flow_rows(L, row_of_state);
    for (int s = 0; s < g.num_states(); ++s)
        if (row_of_state[s] >= 0) O.lp.add_row(std::move(rows[row_of_state[s]]), RowSense::equal, s == g.init_state() ? 1.0 : 0.0);
    std::vector<Entry> value;
    for (int v = 0; v < L.num_state_action(); ++v) {
        double t = target_prob(g, L.pairs[v]);
        if (t > 0.0) value.push_back(Entry{v, t});
    }
    O.lp.add_row(std::move(value), RowSense::greater_equal, std::max(0.0, R.v_threshold - tol::kThresholdSlack));
    if (R.budget > 0.0) {
        std::vector<Entry> all;
        for (int v = 0; v < L.num_state_action(); ++v) all.push_back(Entry{v, 1.0});
        O.lp.add_row(std::move(all), RowSense::less_equal, R.budget);
    }
    // basis hint: per flow state the unfixed pair carrying the most warm mass
    for (int s = 0; s < g.num_states(); ++s) {
        if (row_of_state[s] < 0) continue;
        int best = -1;
        double best_mass = -1.0;
        for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
            int v = L.var_of_pair[p];
            if (v < 0 || fixed[v]) continue;
            double m = warm.empty() ? 0.0 : warm[v];
            if (m > best_mass) {
                best_mass = m;
                best = v;
            }
        }
        if (best >= 0) {
            O.hint.columns.push_back(best);
            O.hint.rows.push_back(row_of_state[s]);
        }
    }
    return O;
}

struct Atom {
    OccupancyVector point;
    double weight = 0.0;
};

struct RestartOutcome {
    OccupancyVector x;
    double dbar = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool projected = false;
    bool failed = false;
    std::string start;
};

class Minimizer {
public:
    Minimizer(const FeasibleRegion& region, const std::vector<double>& warm, const SynthesisConfig& config, bool tc)
        : R_(region), L_(region.layout), warm_(warm), config_(config), tc_(tc), model_(region.layout, tc),
          comm_model_(region.layout, false) {
        fixed_.assign(L_.num_state_action(), 0);
        // with the threshold at the optimum, only value-optimal actions can carry mass
        const auto& g = *L_.game;
        auto V = max_values(g);
        if (R_.v_threshold >= V[g.init_state()] - 1e-7) {
            for (int v = 0; v < L_.num_state_action(); ++v) {
                int p = L_.pairs[v];
                double q = 0.0;
                for (const auto& o : g.successors(p)) q += o.prob * V[o.next];
                if (q < V[g.pair_state(p)] - 1e-9) fixed_[v] = 1;
            }
            presolved_ = true;
        }
        oracle_ = build_oracle(R_, fixed_, warm_);
    }

    bool presolved() const { return presolved_; }
    const std::vector<char>& fixed() const { return fixed_; }

    RestartOutcome run(int index) const;

private:
    OccupancyVector with_comm(const std::vector<double>& y, int coalition, std::mt19937_64* rng) const;
    OccupancyVector vertex(const std::vector<double>& y, const CostGradient& g) const;
    void consolidate(OccupancyVector& x) const;
    std::optional<OccupancyVector> project(const OccupancyVector& x) const;
    bool feasible_start(const std::vector<double>& y) const;

    const FeasibleRegion& R_;
    const OccupancyLayout& L_;
    const std::vector<double>& warm_;
    SynthesisConfig config_;
    bool tc_;
    CostModel model_;
    CostModel comm_model_;
    std::vector<char> fixed_;
    bool presolved_ = false;
    Oracle oracle_;
};

// coalition < 0: uniform; coalition == C: random per slot (needs rng)
OccupancyVector Minimizer::with_comm(const std::vector<double>& y, int coalition, std::mt19937_64* rng) const {
    OccupancyVector x{y, std::vector<double>(L_.num_obs_coalition(), 0.0)};
    auto mass = observation_mass(L_, x);
    const int C = L_.num_coalitions();
    for (int o = 0; o < L_.num_slots(); ++o) {
        if (coalition < 0) {
            for (int c = 0; c < C; ++c) x.oc[L_.oc_index(o, c)] = mass[o] / C;
        } else if (coalition < C) {
            x.oc[L_.oc_index(o, coalition)] = mass[o];
        } else {
            int c = std::uniform_int_distribution<int>(0, C - 1)(*rng);
            x.oc[L_.oc_index(o, c)] = mass[o];
        }
    }
    return x;
}

OccupancyVector Minimizer::vertex(const std::vector<double>& y, const CostGradient& grad) const {
    OccupancyVector s{y, std::vector<double>(L_.num_obs_coalition(), 0.0)};
    for (auto& v : s.sa) v = std::max(v, 0.0);
    auto mass = observation_mass(L_, s);
    const int C = L_.num_coalitions();
    for (int o = 0; o < L_.num_slots(); ++o) {
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (grad.oc[L_.oc_index(o, c)] < grad.oc[L_.oc_index(o, best)]) best = c;
        s.oc[L_.oc_index(o, best)] = mass[o];
    }
    return s;
}

// all comm mass of each slot on its cheapest coalition; never increases d-bar
void Minimizer::consolidate(OccupancyVector& x) const {
    if (tc_) return;
    auto Q = comm_model_.coalition_costs(x);
    const int C = L_.num_coalitions();
    auto mass = observation_mass(L_, x);
    for (int o = 0; o < L_.num_slots(); ++o) {
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (Q[static_cast<std::size_t>(o) * C + c] < Q[static_cast<std::size_t>(o) * C + best] - 1e-15) best = c;
        for (int c = 0; c < C; ++c) x.oc[L_.oc_index(o, c)] = c == best ? mass[o] : 0.0;
    }
}

// Executes the factor conditionals of x under the cheapest coalition per observation and returns
// the occupancy of that restricted policy when it keeps the value threshold. Such a policy
// factorizes exactly as its comm policy allows, so its d-bar is zero.
std::optional<OccupancyVector> Minimizer::project(const OccupancyVector& x) const {
    if (tc_) return std::nullopt;
    const auto& g = *L_.game;
    const int C = L_.num_coalitions();
    auto Q = comm_model_.coalition_costs(x);
    std::vector<int> choice(L_.num_slots(), 0);
    for (int o = 0; o < L_.num_slots(); ++o)
        for (int c = 1; c < C; ++c)
            if (Q[static_cast<std::size_t>(o) * C + c] < Q[static_cast<std::size_t>(o) * C + choice[o]] - 1e-15) choice[o] = c;
    auto cond = comm_model_.conditionals(x);

    InducedChain chain;
    chain.init = g.init_state();
    chain.rows.resize(g.num_states());
    chain.kind.resize(g.num_states());
    std::vector<double> var_prob(L_.num_state_action(), 0.0), probs;
    for (int s = 0; s < g.num_states(); ++s) {
        if (!L_.flow_state[s]) {
            chain.kind[s] = g.kind(s) == StateKind::target ? StateKind::target : StateKind::avoid;
            continue;
        }
        chain.kind[s] = StateKind::normal;
        restricted_action_probs(comm_model_, cond, s, choice[L_.slot_of_obs[g.obs_of(s)]], probs);
        auto& row = chain.rows[s];
        for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
            double q = probs[p - g.pair_begin(s)];
            var_prob[L_.var_of_pair[p]] = q;
            if (q <= 0.0) continue;
            for (const auto& o : g.successors(p)) row.push_back(Outcome{o.next, q * o.prob});
        }
    }
    std::optional<std::vector<double>> visits;
    try {
        visits = expected_visits(chain);
    } catch (const GuardExceeded&) {
        return std::nullopt;
    }
    if (!visits) return std::nullopt;
    OccupancyVector out{std::vector<double>(L_.num_state_action(), 0.0), std::vector<double>(L_.num_obs_coalition(), 0.0)};
    for (int v = 0; v < L_.num_state_action(); ++v) out.sa[v] = (*visits)[g.pair_state(L_.pairs[v])] * var_prob[v];
    for (int v = 0; v < L_.num_state_action(); ++v)
        if (fixed_[v] && out.sa[v] > 0.0) return std::nullopt;
    if (reach_value(L_, out) < R_.v_threshold - tol::kThresholdSlack) return std::nullopt;
    auto mass = observation_mass(L_, out);
    for (int o = 0; o < L_.num_slots(); ++o) out.oc[L_.oc_index(o, choice[o])] = mass[o];
    return out;
}

RestartOutcome Minimizer::run(int index) const {
    RestartOutcome res;
    const int C = L_.num_coalitions();
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    SimplexSolver solver(oracle_.lp);
    auto first = solver.solve(oracle_.hint);
    if (first.status == LpStatus::infeasible) throw InfeasibleThreshold("the value threshold exceeds the optimal value");
    if (first.status != LpStatus::optimal) {
        res.failed = true;
        return res;
    }
    const int nv = L_.num_state_action();
    auto oracle_call = [&](const std::vector<double>& costs) -> std::optional<std::vector<double>> {
        auto sol = solver.reoptimize(costs);
        if (sol.status != LpStatus::optimal) return std::nullopt;
        for (auto& v : sol.values) v = std::max(v, 0.0);
        return std::move(sol.values);
    };
    auto random_vertex = [&]() -> std::optional<std::vector<double>> {
        std::vector<double> costs(nv);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (auto& c : costs) c = U(rng);
        return oracle_call(costs);
    };

    // start schedule: stage-1 point with uniform comm, then one per coalition, then random
    std::vector<Atom> atoms;
    const int comm_starts = tc_ ? 0 : C;
    if (index == 0) {
        res.start = "stage1-uniform";
        atoms.push_back(Atom{with_comm(warm_, -1, nullptr), 1.0});
    } else if (index <= comm_starts) {
        res.start = "stage1-" + L_.game->coalitions()[index - 1].to_string();
        atoms.push_back(Atom{with_comm(warm_, index - 1, nullptr), 1.0});
    } else if ((index - comm_starts) % 2 == 1) {
        res.start = "random-vertex";
        auto y = random_vertex();
        if (!y) {
            res.failed = true;
            return res;
        }
        atoms.push_back(Atom{with_comm(*y, C, &rng), 1.0});
    } else {
        res.start = "random-mixture";
        int k = std::uniform_int_distribution<int>(2, 3)(rng);
        std::vector<double> w(k + 1);
        std::exponential_distribution<double> E(1.0);
        double total = 0.0;
        for (auto& wi : w) total += (wi = E(rng));
        atoms.push_back(Atom{with_comm(warm_, C, &rng), w[0] / total});
        for (int j = 1; j <= k; ++j) {
            auto y = random_vertex();
            if (!y) continue;
            atoms.push_back(Atom{with_comm(*y, C, &rng), w[j] / total});
        }
        double sum = 0.0;
        for (auto& a : atoms) sum += a.weight;
        for (auto& a : atoms) a.weight /= sum;
    }

    auto rebuild = [&]() {
        OccupancyVector x{std::vector<double>(nv, 0.0), std::vector<double>(L_.num_obs_coalition(), 0.0)};
        for (const auto& a : atoms) x.axpy(a.weight, a.point);
        return x;
    };
    OccupancyVector x = rebuild();
    CostGradient grad;
    std::vector<double> costs(nv);
    double f = model_.value(x);

    auto try_project = [&]() {
        auto p = project(x);
        if (!p) return false;
        double fp = model_.value(*p);
        if (fp <= tol::kZeroCost && fp < f) {
            x = std::move(*p);
            f = fp;
            res.projected = true;
            return true;
        }
        return false;
    };

    auto line_search = [&](const OccupancyVector& d, double gmax, double& best_gamma) {
        auto phi = [&](double gamma) {
            OccupancyVector t = x;
            t.axpy(gamma, d);
            return model_.value(t);
        };
        double best = f;
        best_gamma = 0.0;
        auto consider = [&](double gamma, double val) {
            if (val < best) {
                best = val;
                best_gamma = gamma;
            }
        };
        const double inv = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = 0.0, b = gmax;
        double c = b - inv * (b - a), e = a + inv * (b - a);
        double fc = phi(c), fe = phi(e);
        consider(c, fc);
        consider(e, fe);
        for (int k = 0; k < 40 && (b - a) > 1e-10 * gmax; ++k) {
            if (fc < fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - inv * (b - a);
                fc = phi(c);
                consider(c, fc);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + inv * (b - a);
                fe = phi(e);
                consider(e, fe);
            }
        }
        consider(gmax, phi(gmax));
        return best;
    };

    if (try_project()) {
        res.converged = true;
        res.gap = 0.0;
    }
    int it = 0;
    for (; !res.converged && it < config_.max_iterations; ++it) {
        f = model_.gradient(x, grad);
        if (f <= tol::kZeroCost) {
            res.converged = true;
            res.gap = 0.0;
            break;
        }
        for (int v = 0; v < nv; ++v) {
            double best = 0.0;
            if (!tc_) {
                best = std::numeric_limits<double>::infinity();
                int o = L_.var_slot[v];
                for (int c = 0; c < C; ++c) best = std::min(best, grad.oc[L_.oc_index(o, c)]);
            }
            costs[v] = fixed_[v] ? 0.0 : grad.sa[v] + best;
        }
        auto y = oracle_call(costs);
        if (!y) {
            res.failed = res.iterations == 0;
            break;
        }
        OccupancyVector s = vertex(*y, grad);
        double gx = 0.0, gs = 0.0;
        for (int v = 0; v < nv; ++v) {
            gx += grad.sa[v] * x.sa[v];
            gs += grad.sa[v] * s.sa[v];
        }
        for (std::size_t k = 0; k < x.oc.size(); ++k) {
            gx += grad.oc[k] * x.oc[k];
            gs += grad.oc[k] * s.oc[k];
        }
        res.gap = gx - gs;
        if (res.gap <= config_.convergence_tol) {
            res.converged = true;
            break;
        }

        if (config_.step_rule == StepRule::diminishing) {
            double gamma = 2.0 / (it + 2.0);
            for (auto& a : atoms) a.weight *= 1.0 - gamma;
            atoms.push_back(Atom{s, gamma});
            x = rebuild();
            f = model_.value(x);
        } else {
            // pairwise step toward s and away from the worst atom
            int away = 0;
            double worst = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < atoms.size(); ++k) {
                double ga = 0.0;
                const auto& a = atoms[k].point;
                for (int v = 0; v < nv; ++v) ga += grad.sa[v] * a.sa[v];
                for (std::size_t j = 0; j < a.oc.size(); ++j) ga += grad.oc[j] * a.oc[j];
                if (ga > worst) {
                    worst = ga;
                    away = static_cast<int>(k);
                }
            }
            bool moved = false;
            if (worst - gs > 1e-14) {
                OccupancyVector d = s - atoms[away].point;
                double gamma = 0.0;
                double fn = line_search(d, atoms[away].weight, gamma);
                if (gamma > 0.0 && fn < f) {
                    atoms[away].weight -= gamma;
                    atoms.push_back(Atom{std::move(s), gamma});
                    x.axpy(gamma, d);
                    f = fn;
                    moved = true;
                }
            }
            if (!moved) {
                OccupancyVector d = s - x;
                double gamma = 0.0;
                double fn = line_search(d, 1.0, gamma);
                if (gamma > 0.0 && fn < f) {
                    for (auto& a : atoms) a.weight *= 1.0 - gamma;
                    atoms.push_back(Atom{std::move(s), gamma});
                    x.axpy(gamma, d);
                    f = fn;
                    moved = true;
                }
            }
            if (!moved) break;  // no descent along either direction
            std::erase_if(atoms, [](const Atom& a) { return a.weight <= 1e-15; });
            if (atoms.size() > 64) {
                // merge the lightest atoms into the point they already contribute to
                std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.weight > b.weight; });
                OccupancyVector merged{std::vector<double>(nv, 0.0), std::vector<double>(L_.num_obs_coalition(), 0.0)};
                double w = 0.0;
                for (std::size_t k = 32; k < atoms.size(); ++k) {
                    merged.axpy(atoms[k].weight, atoms[k].point);
                    w += atoms[k].weight;
                }
                atoms.resize(32);
                for (auto& v : merged.sa) v /= w;
                for (auto& v : merged.oc) v /= w;
                atoms.push_back(Atom{std::move(merged), w});
            }
            if (it % 50 == 49) {
                x = rebuild();
                f = model_.value(x);
            }
        }
        if (it % 10 == 9 && try_project()) {
            res.converged = true;
            res.gap = 0.0;
            ++it;
            break;
        }
    }
    res.iterations = it;
    if (!res.projected && try_project()) {
        res.converged = true;
        res.gap = 0.0;
    }
    consolidate(x);
    res.dbar = model_.value(x);
    if (res.dbar <= tol::kZeroCost) res.converged = true;
    res.x = std::move(x);
    return res;
}

MinimizeResult run_minimizer(const FeasibleRegion& region, const std::vector<double>& warm, const SynthesisConfig& config,
                             bool tc) {
    auto t0 = Clock::now();
    if (config.restarts < 1) throw InputError("restarts must be at least 1");
    MinimizeResult out;
    auto& rep = out.report;
    rep.v_threshold = region.v_threshold;
    rep.num_variables = region.num_variables();
    rep.num_constraints = region.num_constraints();
    rep.budget = region.budget;
    const auto& L = region.layout;
    if (L.num_state_action() == 0) {
        out.x = OccupancyVector::zeros(L);
        rep.breakdown = CostModel(L, tc).breakdown(out.x);
        rep.wall_time = seconds_since(t0);
        return out;
    }

    Minimizer minimizer(region, warm, config, tc);
    std::vector<RestartOutcome> results(config.restarts);
    std::atomic<int> stop_after{config.restarts};
    std::vector<char> ran(config.restarts, 0);
    int workers = config.threads > 0 ? config.threads : worker_count();
    parallel_for(static_cast<std::size_t>(config.restarts), workers, [&](std::size_t k) {
        int i = static_cast<int>(k);
        if (i > stop_after.load()) return;
        results[i] = minimizer.run(i);
        ran[i] = 1;
        if (results[i].dbar <= tol::kZeroCost) {
            int cur = stop_after.load();
            while (i < cur && !stop_after.compare_exchange_weak(cur, i)) {
            }
        }
    });
    // restarts past the first zero-cost one may or may not have run; ignore them for determinism
    const int last = std::min(stop_after.load(), config.restarts - 1);
    int best = -1;
    for (int i = 0; i <= last; ++i) {
        const auto& r = results[i];
        RestartRecord rec;
        rec.index = i;
        rec.start = r.start;
        rec.dbar = r.dbar;
        rec.fw_gap = r.gap;
        rec.iterations = r.iterations;
        rec.converged = r.converged;
        rec.projected = r.projected;
        rep.restarts.push_back(rec);
        rep.iterations += r.iterations;
        if (r.failed || !std::isfinite(r.dbar)) continue;
        if (best < 0 || r.dbar < results[best].dbar) best = i;
    }
    rep.restarts_used = last + 1;
    if (best < 0) throw LpFailure("every restart failed in the linear oracle");
    out.x = std::move(results[best].x);
    rep.best_restart = best;
    rep.fw_gap = results[best].gap;
    rep.status = results[best].converged ? SynthesisStatus::converged : SynthesisStatus::iteration_limit;
    rep.breakdown = CostModel(L, tc).breakdown(out.x);
    rep.dbar_value = rep.breakdown.dbar;
    rep.flow_residual = flow_residual(L, out.x);
    rep.coupling_residual = coupling_residual(L, out.x);
    rep.wall_time = seconds_since(t0);
    return out;
}

}  // namespace

MinimizeResult minimize_dbar(const FeasibleRegion& region, const std::vector<double>& warm, const SynthesisConfig& config) {
    return run_minimizer(region, warm, config, false);
}

MinimizeResult minimize_total_correlation(const FeasibleRegion& region, const std::vector<double>& warm,
                                          const SynthesisConfig& config) {
    return run_minimizer(region, warm, config, true);
}

OccupancyVector with_cheapest_comm(const OccupancyLayout& L, const OccupancyVector& x) {
    CostModel model(L);
    auto Q = model.coalition_costs(x);
    auto mass = observation_mass(L, x);
    const int C = L.num_coalitions();
    OccupancyVector out = x;
    for (int o = 0; o < L.num_slots(); ++o) {
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (Q[static_cast<std::size_t>(o) * C + c] < Q[static_cast<std::size_t>(o) * C + best] - 1e-15) best = c;
        for (int c = 0; c < C; ++c) out.oc[L.oc_index(o, c)] = c == best ? mass[o] : 0.0;
    }
    return out;
}

PolicyPair extract_policies(const OccupancyLayout& L, const OccupancyVector& x) {
    const auto& g = *L.game;
    PolicyPair pair;
    pair.action_policy.resize(g.num_states());
    pair.zero_mass_state.assign(g.num_states(), 0);
    for (int s = 0; s < g.num_states(); ++s) {
        auto& row = pair.action_policy[s];
        if (g.kind(s) != StateKind::normal) {
            row.push_back(ActionProb{g.sink_action(), 1.0});
            continue;
        }
        double total = 0.0;
        if (L.flow_state[s])
            for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) total += std::max(x.sa[L.var_of_pair[p]], 0.0);
        if (total > tol::kZeroMass) {
            for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) {
                double y = std::max(x.sa[L.var_of_pair[p]], 0.0);
                if (y > 0.0) row.push_back(ActionProb{g.pair_action(p), y / total});
            }
        } else {
            pair.zero_mass_state[s] = 1;
            const int n = g.pair_end(s) - g.pair_begin(s);
            for (int p = g.pair_begin(s); p < g.pair_end(s); ++p) row.push_back(ActionProb{g.pair_action(p), 1.0 / n});
        }
    }
    const int C = g.num_coalitions();
    pair.comm_policy.assign(g.num_observations(), std::vector<double>(C, 1.0 / C));
    pair.zero_mass_obs.assign(g.num_observations(), 1);
    for (int o = 0; o < g.num_observations(); ++o) {
        int slot = L.slot_of_obs[o];
        if (slot < 0) continue;
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::max(x.oc[L.oc_index(slot, c)], 0.0);
        if (z <= tol::kZeroMass) continue;
        pair.zero_mass_obs[o] = 0;
        for (int c = 0; c < C; ++c) pair.comm_policy[o][c] = std::max(x.oc[L.oc_index(slot, c)], 0.0) / z;
    }
    return pair;
}

SynthesisResult synthesize(const CooperativeGame& game, const ReachAvoidSpec& spec, const SynthesisConfig& config) {
    auto t0 = Clock::now();
    SynthesisResult out;
    auto stage1 = optimal_reach_avoid_value(game, spec);
    double stage1_time = seconds_since(t0);
    double threshold = config.v_threshold.value_or(stage1.v_star);
    if (threshold < 0.0 || threshold > 1.0) throw InputError("threshold must lie in [0, 1]");
    if (threshold > stage1.v_star + tol::kThresholdSlack)
        throw InfeasibleThreshold(fmt::format("threshold {} exceeds the optimal value {}", threshold, stage1.v_star));

    auto aug = std::make_shared<CooperativeGame>(augment_with_sink(game, spec));
    out.game = aug;
    double warm_mass = 0.0;
    for (double y : stage1.occupancy) warm_mass += y;
    double budget = config.budget_scale * std::max(warm_mass, 1.0);
    auto region = std::make_shared<FeasibleRegion>(assemble_feasible_region(*aug, threshold, RegionLayout::sparse, budget));
    out.region = region;
    const auto& L = region->layout;
    std::vector<double> warm(L.num_state_action(), 0.0);
    for (int v = 0; v < L.num_state_action(); ++v) {
        int p = L.pairs[v];
        int raw = game.find_pair(aug->pair_state(p), aug->pair_action(p));
        if (raw >= 0) warm[v] = stage1.occupancy[raw];
    }
    auto result = config.total_correlation ? minimize_total_correlation(*region, warm, config)
                                           : minimize_dbar(*region, warm, config);
    out.x = std::move(result.x);
    out.report = std::move(result.report);
    out.report.v_star = stage1.v_star;
    out.report.stage1_time = stage1_time;
    out.policy = extract_policies(L, out.x);
    out.report.achieved_value = reach_avoid_probability(induce_full_chain(*aug, out.policy));
    out.report.wall_time = seconds_since(t0);
    return out;
}

}  // namespace commsynth
