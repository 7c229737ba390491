#include "commsynth/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "commsynth/error.hpp"
#include "commsynth/tolerances.hpp"

namespace commsynth {

double AgentModel::prob(int s, int a, int next) const {
    for (const auto& o : transitions[s][a])
        if (o.next == next) return o.prob;
    return 0.0;
}

double AgentModel::transition_entropy(int s, int a) const {
    double h = 0.0;
    for (const auto& o : transitions[s][a])
        if (o.prob > 0.0) h -= o.prob * std::log(o.prob);
    return h;
}

std::optional<int> AgentModel::find_state(int obs, int local) const {
    for (int s = 0; s < num_states(); ++s)
        if (states[s].obs == obs && states[s].local == local) return s;
    return std::nullopt;
}

void AgentModel::normalize() {
    for (auto& row : transitions) {
        for (auto& dist : row) {
            std::sort(dist.begin(), dist.end(), [](const Outcome& a, const Outcome& b) { return a.next < b.next; });
            Distribution merged;
            for (const auto& o : dist) {
                if (!merged.empty() && merged.back().next == o.next)
                    merged.back().prob += o.prob;
                else
                    merged.push_back(o);
            }
            std::erase_if(merged, [](const Outcome& o) { return o.prob == 0.0; });
            dist = std::move(merged);
        }
    }
    validate();
}

void AgentModel::validate() const {
    const int ns = num_states();
    if (ns == 0) throw InputError(fmt::format("agent {}: no states", name));
    if (init < 0 || init >= ns) throw InputError(fmt::format("agent {}: init out of range", name));
    if (static_cast<int>(transitions.size()) != ns)
        throw InputError(fmt::format("agent {}: transition table has wrong size", name));
    for (int s = 0; s < ns; ++s) {
        const auto& st = states[s];
        if (st.obs < 0 || st.obs >= static_cast<int>(obs_labels.size()) || st.local < 0 ||
            st.local >= static_cast<int>(local_labels.size()))
            throw InputError(fmt::format("agent {}: state {} has unknown labels", name, s));
        if (static_cast<int>(transitions[s].size()) != num_actions())
            throw InputError(fmt::format("agent {}: state {} action table has wrong size", name, s));
        bool any = false;
        for (int a = 0; a < num_actions(); ++a) {
            const auto& dist = transitions[s][a];
            if (dist.empty()) continue;
            any = true;
            double sum = 0.0;
            for (const auto& o : dist) {
                if (!(o.prob >= 0.0 && o.prob <= 1.0))
                    throw InputError(fmt::format("agent {}: probability {} outside [0,1]", name, o.prob));
                if (o.next < 0 || o.next >= ns)
                    throw InputError(fmt::format("agent {}: successor {} out of range", name, o.next));
                sum += o.prob;
            }
            if (std::abs(sum - 1.0) > tol::kAgentRowSum)
                throw InputError(fmt::format("agent {}: row (state {}, action {}) sums to {:.15g}", name,
                                             local_labels[st.local], actions[a], sum));
        }
        if (!any) throw InputError(fmt::format("agent {}: state {} has no enabled action", name, s));
    }
}

bool Coalition::contains(int agent) const {
    return std::binary_search(members.begin(), members.end(), agent);
}

std::string Coalition::to_string() const {
    std::string out = "{";
    for (std::size_t k = 0; k < members.size(); ++k) {
        if (k) out += ',';
        out += std::to_string(members[k] + 1);
    }
    return out + "}";
}

Coalition parse_coalition(const std::string& text) {
    Coalition c;
    std::string body = text;
    std::erase_if(body, [](char ch) { return ch == '{' || ch == '}' || ch == ' '; });
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        c.members.push_back(std::stoi(tok) - 1);
    }
    std::sort(c.members.begin(), c.members.end());
    return c;
}

std::vector<Coalition> enumerate_coalitions(int num_agents, int K, bool allow_smaller) {
    if (num_agents < 1) throw InputError("need at least one agent");
    if (K < 0 || K > num_agents) throw InputError(fmt::format("K={} outside [0,{}]", K, num_agents));
    std::vector<Coalition> out;
    // subsets in lexicographic order of their sorted member lists, by size
    const int lo = allow_smaller ? 0 : K;
    for (int size = lo; size <= K; ++size) {
        std::vector<int> pick(size);
        std::iota(pick.begin(), pick.end(), 0);
        while (true) {
            out.push_back(Coalition{pick});
            int k = size - 1;
            while (k >= 0 && pick[k] == num_agents - size + k) --k;
            if (k < 0) break;
            ++pick[k];
            for (int j = k + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
        }
    }
    std::sort(out.begin(), out.end(), [](const Coalition& a, const Coalition& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.members < b.members;
    });
    return out;
}

std::span<const int> CooperativeGame::agent_states(int s) const {
    return {state_agents_.data() + static_cast<std::size_t>(s) * agents_.size(), agents_.size()};
}

std::uint64_t CooperativeGame::key_of(std::span<const int> st) const {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < st.size(); ++i) k += static_cast<std::uint64_t>(st[i]) * key_mult_[i];
    return k;
}

std::optional<int> CooperativeGame::find_state(std::span<const int> st) const {
    if (st.size() != agents_.size()) return std::nullopt;
    for (std::size_t i = 0; i < st.size(); ++i)
        if (st[i] < 0 || st[i] >= agents_[i].num_states()) return std::nullopt;
    auto it = index_of_key_.find(key_of(st));
    if (it == index_of_key_.end()) return std::nullopt;
    return it->second;
}

std::span<const int> CooperativeGame::observation(int o) const {
    return {obs_tuples_.data() + static_cast<std::size_t>(o) * agents_.size(), agents_.size()};
}

int CooperativeGame::agent_action(int a, int agent) const {
    return (a / action_mult_[agent]) % agents_[agent].num_actions();
}

std::vector<int> CooperativeGame::decode_action(int a) const {
    std::vector<int> out(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) out[i] = agent_action(a, static_cast<int>(i));
    return out;
}

int CooperativeGame::encode_action(std::span<const int> acts) const {
    int a = 0;
    for (std::size_t i = 0; i < acts.size(); ++i) a += acts[i] * action_mult_[i];
    return a;
}

std::span<const Outcome> CooperativeGame::successors(int p) const {
    return {succ_.data() + succ_offset_[p], succ_offset_[p + 1] - succ_offset_[p]};
}

int CooperativeGame::find_pair(int s, int a) const {
    auto first = pair_action_.begin() + pair_offset_[s];
    auto last = pair_action_.begin() + pair_offset_[s + 1];
    auto it = std::lower_bound(first, last, a);
    if (it == last || *it != a) return -1;
    return static_cast<int>(it - pair_action_.begin());
}

namespace {

std::string join_labels(const std::vector<std::string>& parts) {
    std::string out = "(";
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (k) out += ',';
        out += parts[k];
    }
    return out + ")";
}

}  // namespace

std::string CooperativeGame::state_label(int s) const {
    if (s == sink_) return "sink";
    std::vector<std::string> os, ls;
    for (int i = 0; i < num_agents(); ++i) {
        const auto& st = agents_[i].states[agent_state(s, i)];
        os.push_back(agents_[i].obs_labels[st.obs]);
        ls.push_back(agents_[i].local_labels[st.local]);
    }
    return "(" + join_labels(os) + "," + join_labels(ls) + ")";
}

std::string CooperativeGame::observation_label(int o) const {
    std::vector<std::string> os;
    auto tup = observation(o);
    for (int i = 0; i < num_agents(); ++i) os.push_back(agents_[i].obs_labels[tup[i]]);
    return join_labels(os);
}

std::string CooperativeGame::action_label(int a) const {
    if (a == sink_action()) return "alpha";
    std::vector<std::string> parts;
    for (int i = 0; i < num_agents(); ++i) parts.push_back(agents_[i].actions[agent_action(a, i)]);
    return join_labels(parts);
}

std::optional<int> CooperativeGame::parse_state_label(const std::string& label) const {
    if (label == "sink") return sink_ >= 0 ? std::optional<int>(sink_) : std::nullopt;
    // "((o1,..),(l1,..))"
    std::string body = label;
    std::erase_if(body, [](char c) { return c == ' '; });
    if (body.size() < 4 || body.front() != '(' || body.back() != ')') return std::nullopt;
    body = body.substr(1, body.size() - 2);
    auto split_group = [](const std::string& g) {
        std::vector<std::string> out;
        std::stringstream ss(g.substr(1, g.size() - 2));
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(tok);
        return out;
    };
    auto mid = body.find("),(");
    if (mid == std::string::npos) return std::nullopt;
    auto os = split_group(body.substr(0, mid + 1));
    auto ls = split_group(body.substr(mid + 2));
    if (os.size() != agents_.size() || ls.size() != agents_.size()) return std::nullopt;
    std::vector<int> st(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        const auto& ag = agents_[i];
        auto oi = std::find(ag.obs_labels.begin(), ag.obs_labels.end(), os[i]);
        auto li = std::find(ag.local_labels.begin(), ag.local_labels.end(), ls[i]);
        if (oi == ag.obs_labels.end() || li == ag.local_labels.end()) return std::nullopt;
        auto found = ag.find_state(static_cast<int>(oi - ag.obs_labels.begin()),
                                   static_cast<int>(li - ag.local_labels.begin()));
        if (!found) return std::nullopt;
        st[i] = *found;
    }
    return find_state(st);
}

void CooperativeGame::check_invariants() const {
    for (int p = 0; p < num_pairs(); ++p) {
        double sum = 0.0;
        for (const auto& o : successors(p)) {
            if (o.next < 0 || o.next >= num_states()) throw InputError("transition leaves the enumerated set");
            sum += o.prob;
        }
        if (std::abs(sum - 1.0) > tol::kJointRowSum)
            throw InputError(fmt::format("joint row {} sums to {:.15g}", p, sum));
    }
    for (int s = 0; s < num_states(); ++s)
        if (pair_begin(s) == pair_end(s)) throw InputError(fmt::format("joint state {} has no action", s));
}

namespace {

// product distribution over joint keys; agent outcomes are sorted so keys come out sorted
void product_row(const std::vector<AgentModel>& agents, std::span<const int> st, std::span<const int> acts,
                 const std::vector<std::uint64_t>& mult, std::vector<std::pair<std::uint64_t, double>>& out) {
    out.assign(1, {0, 1.0});
    std::vector<std::pair<std::uint64_t, double>> next;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& dist = agents[i].transitions[st[i]][acts[i]];
        next.clear();
        next.reserve(out.size() * dist.size());
        for (const auto& [k, p] : out)
            for (const auto& o : dist) next.emplace_back(k + static_cast<std::uint64_t>(o.next) * mult[i], p * o.prob);
        out.swap(next);
    }
}

}  // namespace

CooperativeGame build_joint_game(std::vector<AgentModel> agents, int K, const GameOptions& options) {
    const int n = static_cast<int>(agents.size());
    if (n < 1) throw InputError("need at least one agent");
    if (K < 0 || K > n) throw InputError(fmt::format("K={} outside [0,{}]", K, n));
    for (auto& ag : agents) ag.normalize();

    CooperativeGame g;
    g.agents_ = std::move(agents);
    g.K_ = K;
    g.coalitions_ = enumerate_coalitions(n, K, options.allow_smaller_coalitions);

    g.key_mult_.assign(n, 1);
    g.action_mult_.assign(n, 1);
    for (int i = n - 2; i >= 0; --i) {
        g.key_mult_[i] = g.key_mult_[i + 1] * static_cast<std::uint64_t>(g.agents_[i + 1].num_states());
        g.action_mult_[i] = g.action_mult_[i + 1] * g.agents_[i + 1].num_actions();
    }
    g.num_joint_actions_ = g.action_mult_[0] * g.agents_[0].num_actions();

    auto decode_key = [&](std::uint64_t k, std::vector<int>& st) {
        st.resize(n);
        for (int i = 0; i < n; ++i) {
            st[i] = static_cast<int>(k / g.key_mult_[i]);
            k %= g.key_mult_[i];
        }
    };

    // enabled agent actions, per agent state
    std::vector<std::vector<std::vector<int>>> enabled(n);
    for (int i = 0; i < n; ++i) {
        const auto& ag = g.agents_[i];
        enabled[i].resize(ag.num_states());
        for (int s = 0; s < ag.num_states(); ++s)
            for (int a = 0; a < ag.num_actions(); ++a)
                if (ag.enabled(s, a)) enabled[i][s].push_back(a);
    }

    std::vector<std::uint64_t> keys;
    std::unordered_map<std::uint64_t, int> seen;
    std::vector<int> st;
    std::vector<int> init_st(n);
    for (int i = 0; i < n; ++i) init_st[i] = g.agents_[i].init;
    const std::uint64_t init_key = g.key_of(init_st);

    if (options.full_product) {
        std::uint64_t total = g.key_mult_[0] * static_cast<std::uint64_t>(g.agents_[0].num_states());
        for (std::uint64_t k = 0; k < total; ++k) {
            seen.emplace(k, static_cast<int>(keys.size()));
            keys.push_back(k);
        }
    } else {
        std::deque<std::uint64_t> queue{init_key};
        seen.emplace(init_key, 0);
        keys.push_back(init_key);
        std::vector<std::pair<std::uint64_t, double>> row;
        std::vector<int> acts(n);
        while (!queue.empty()) {
            std::uint64_t k = queue.front();
            queue.pop_front();
            decode_key(k, st);
            // odometer over enabled agent actions
            std::vector<std::size_t> pos(n, 0);
            while (true) {
                for (int i = 0; i < n; ++i) acts[i] = enabled[i][st[i]][pos[i]];
                product_row(g.agents_, st, acts, g.key_mult_, row);
                for (const auto& [nk, p] : row) {
                    if (seen.emplace(nk, static_cast<int>(keys.size())).second) {
                        keys.push_back(nk);
                        queue.push_back(nk);
                    }
                }
                int i = n - 1;
                while (i >= 0 && ++pos[i] == enabled[i][st[i]].size()) pos[i--] = 0;
                if (i < 0) break;
            }
        }
    }

    std::sort(keys.begin(), keys.end());
    const int ns = static_cast<int>(keys.size());
    g.index_of_key_.clear();
    g.index_of_key_.reserve(keys.size());
    g.state_agents_.resize(static_cast<std::size_t>(ns) * n);
    for (int s = 0; s < ns; ++s) {
        g.index_of_key_.emplace(keys[s], s);
        decode_key(keys[s], st);
        std::copy(st.begin(), st.end(), g.state_agents_.begin() + static_cast<std::size_t>(s) * n);
    }
    g.init_ = g.index_of_key_.at(init_key);
    g.kind_.assign(ns, StateKind::normal);

    // observations
    std::vector<std::vector<int>> tuples(ns, std::vector<int>(n));
    for (int s = 0; s < ns; ++s)
        for (int i = 0; i < n; ++i) tuples[s][i] = g.agents_[i].states[g.agent_state(s, i)].obs;
    std::vector<std::vector<int>> uniq = tuples;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) g.obs_tuples_.insert(g.obs_tuples_.end(), t.begin(), t.end());
    g.obs_of_state_.resize(ns);
    for (int s = 0; s < ns; ++s)
        g.obs_of_state_[s] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), tuples[s]) - uniq.begin());

    // transitions in CSR
    g.pair_offset_.assign(1, 0);
    g.succ_offset_.assign(1, 0);
    std::vector<std::pair<std::uint64_t, double>> row;
    std::vector<int> acts(n);
    for (int s = 0; s < ns; ++s) {
        auto sst = g.agent_states(s);
        std::vector<std::size_t> pos(n, 0);
        while (true) {
            for (int i = 0; i < n; ++i) acts[i] = enabled[i][sst[i]][pos[i]];
            product_row(g.agents_, sst, acts, g.key_mult_, row);
            g.pair_action_.push_back(g.encode_action(acts));
            g.pair_state_.push_back(s);
            for (const auto& [nk, p] : row) g.succ_.push_back(Outcome{g.index_of_key_.at(nk), p});
            g.succ_offset_.push_back(g.succ_.size());
            int i = n - 1;
            while (i >= 0 && ++pos[i] == enabled[i][sst[i]].size()) pos[i--] = 0;
            if (i < 0) break;
        }
        g.pair_offset_.push_back(static_cast<int>(g.pair_action_.size()));
    }
    return g;
}

void validate_spec(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    std::vector<char> mark(game.num_states(), 0);
    for (int t : spec.target) {
        if (t < 0 || t >= game.num_states() || t == game.sink_state())
            throw InputError(fmt::format("target state {} unknown", t));
        mark[t] = 1;
    }
    for (int a : spec.avoid) {
        if (a < 0 || a >= game.num_states() || a == game.sink_state())
            throw InputError(fmt::format("avoid state {} unknown", a));
        if (mark[a] == 1) throw InputError(fmt::format("state {} is both target and avoid", a));
    }
}

std::vector<StateKind> classify_states(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    std::vector<StateKind> kind(game.num_states(), StateKind::normal);
    for (int t : spec.target) kind[t] = StateKind::target;
    for (int a : spec.avoid) kind[a] = StateKind::avoid;
    if (game.sink_state() >= 0) kind[game.sink_state()] = StateKind::sink;
    return kind;
}

CooperativeGame augment_with_sink(const CooperativeGame& game, const ReachAvoidSpec& spec) {
    if (game.augmented()) throw InputError("game is already augmented");
    validate_spec(game, spec);
    CooperativeGame g = game;
    const int ns = game.num_states();
    const int n = game.num_agents();
    g.kind_ = classify_states(game, spec);
    g.sink_ = ns;
    g.kind_.push_back(StateKind::sink);
    g.state_agents_.insert(g.state_agents_.end(), n, -1);
    g.obs_of_state_.push_back(-1);

    g.pair_offset_.assign(1, 0);
    g.succ_offset_.assign(1, 0);
    g.pair_action_.clear();
    g.pair_state_.clear();
    g.succ_.clear();
    for (int s = 0; s <= ns; ++s) {
        if (s == ns || g.kind_[s] != StateKind::normal) {
            g.pair_action_.push_back(g.sink_action());
            g.pair_state_.push_back(s);
            g.succ_.push_back(Outcome{ns, 1.0});
            g.succ_offset_.push_back(g.succ_.size());
        } else {
            for (int p = game.pair_begin(s); p < game.pair_end(s); ++p) {
                g.pair_action_.push_back(game.pair_action(p));
                g.pair_state_.push_back(s);
                auto row = game.successors(p);
                g.succ_.insert(g.succ_.end(), row.begin(), row.end());
                g.succ_offset_.push_back(g.succ_.size());
            }
        }
        g.pair_offset_.push_back(static_cast<int>(g.pair_action_.size()));
    }
    return g;
}

}  // namespace commsynth
