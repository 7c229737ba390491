#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace commsynth {

struct Outcome {
    int next = 0;
    double prob = 0.0;
};
using Distribution = std::vector<Outcome>;

// One (public observation, local state) pair of an agent.
struct AgentState {
    int obs = 0;
    int local = 0;
};

struct AgentModel {
    std::string name;
    std::vector<std::string> obs_labels;
    std::vector<std::string> local_labels;
    std::vector<AgentState> states;
    std::vector<std::string> actions;
    // transitions[s][a] over agent state indices; empty means disabled
    std::vector<std::vector<Distribution>> transitions;
    int init = 0;

    int num_states() const { return static_cast<int>(states.size()); }
    int num_actions() const { return static_cast<int>(actions.size()); }
    bool enabled(int s, int a) const { return !transitions[s][a].empty(); }
    double prob(int s, int a, int next) const;
    double transition_entropy(int s, int a) const;
    std::optional<int> find_state(int obs, int local) const;

    // Sorts outcomes, merges duplicates, then checks the invariants. Throws InputError.
    void normalize();
    void validate() const;
};

struct Coalition {
    std::vector<int> members;  // sorted, 0-based agent indices

    bool contains(int agent) const;
    bool empty() const { return members.empty(); }
    std::string to_string() const;  // "{1,2}", 1-based
    auto operator<=>(const Coalition&) const = default;
};

std::vector<Coalition> enumerate_coalitions(int num_agents, int K, bool allow_smaller = false);
Coalition parse_coalition(const std::string& text);

enum class StateKind : std::uint8_t { normal, target, avoid, sink };

struct ReachAvoidSpec {
    std::vector<int> target;
    std::vector<int> avoid;
};

struct GameOptions {
    bool allow_smaller_coalitions = false;
    // enumerate every product state instead of the forward closure from the initial state
    bool full_product = false;
};

class CooperativeGame {
public:
    int num_agents() const { return static_cast<int>(agents_.size()); }
    const AgentModel& agent(int i) const { return agents_[i]; }
    const std::vector<AgentModel>& agents() const { return agents_; }
    int K() const { return K_; }
    const std::vector<Coalition>& coalitions() const { return coalitions_; }
    int num_coalitions() const { return static_cast<int>(coalitions_.size()); }

    // joint states, sink included once augmented
    int num_states() const { return static_cast<int>(kind_.size()); }
    int init_state() const { return init_; }
    int sink_state() const { return sink_; }
    bool augmented() const { return sink_ >= 0; }
    StateKind kind(int s) const { return kind_[s]; }
    bool is_terminal(int s) const { return kind_[s] != StateKind::normal; }
    std::span<const int> agent_states(int s) const;
    int agent_state(int s, int agent) const { return state_agents_[static_cast<std::size_t>(s) * agents_.size() + agent]; }
    std::optional<int> find_state(std::span<const int> agent_states) const;

    // joint public observations of non-sink states, lexicographic; the sink has obs -1
    int num_observations() const { return static_cast<int>(obs_tuples_.size() / agents_.size()); }
    int obs_of(int s) const { return obs_of_state_[s]; }
    std::span<const int> observation(int o) const;

    // joint actions are mixed-radix codes, agent 0 most significant; a_alpha is one past the end
    int num_joint_actions() const { return num_joint_actions_; }
    int sink_action() const { return num_joint_actions_; }
    int agent_action(int joint_action, int agent) const;
    std::vector<int> decode_action(int joint_action) const;
    int encode_action(std::span<const int> agent_actions) const;

    // enabled (state, action) pairs in CSR form
    int num_pairs() const { return static_cast<int>(pair_action_.size()); }
    int pair_begin(int s) const { return pair_offset_[s]; }
    int pair_end(int s) const { return pair_offset_[s + 1]; }
    int pair_action(int p) const { return pair_action_[p]; }
    int pair_state(int p) const { return pair_state_[p]; }
    std::span<const Outcome> successors(int p) const;
    int find_pair(int s, int joint_action) const;  // -1 when disabled
    std::size_t num_transitions() const { return succ_.size(); }

    std::string state_label(int s) const;        // "((o1,o2),(l1,l2))"
    std::string observation_label(int o) const;  // "(o1,o2)"
    std::string action_label(int joint_action) const;
    std::optional<int> parse_state_label(const std::string& label) const;

    void check_invariants() const;

private:
    friend CooperativeGame build_joint_game(std::vector<AgentModel>, int, const GameOptions&);
    friend CooperativeGame augment_with_sink(const CooperativeGame&, const ReachAvoidSpec&);

    std::uint64_t key_of(std::span<const int> agent_states) const;

    std::vector<AgentModel> agents_;
    int K_ = 0;
    std::vector<Coalition> coalitions_;
    std::vector<int> state_agents_;
    std::vector<StateKind> kind_;
    std::unordered_map<std::uint64_t, int> index_of_key_;
    std::vector<std::uint64_t> key_mult_;
    std::vector<int> obs_of_state_;
    std::vector<int> obs_tuples_;
    std::vector<int> action_mult_;
    int num_joint_actions_ = 0;
    std::vector<int> pair_offset_;
    std::vector<int> pair_action_;
    std::vector<int> pair_state_;
    std::vector<std::size_t> succ_offset_;
    std::vector<Outcome> succ_;
    int init_ = 0;
    int sink_ = -1;
};

CooperativeGame build_joint_game(std::vector<AgentModel> agents, int K, const GameOptions& options = {});
CooperativeGame augment_with_sink(const CooperativeGame& game, const ReachAvoidSpec& spec);

void validate_spec(const CooperativeGame& game, const ReachAvoidSpec& spec);
std::vector<StateKind> classify_states(const CooperativeGame& game, const ReachAvoidSpec& spec);

}  // namespace commsynth
