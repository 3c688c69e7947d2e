#pragma once

// Token-based process engine with BPMN-style gateways.
//
// A ProcessDefinition is an acyclic graph of event, action and gateway nodes.
// Running an instance moves tokens along edges; action nodes emit their
// action key for the host to execute, gateways split or synchronize tokens.
// Controllers re-run a fresh instance per stimulus, so graphs never loop.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mrs::workflow {

enum class GatewayKind { ExclusiveOr, InclusiveOr, ParallelAnd };
enum class Direction { Split, Merge };

std::string_view to_string(GatewayKind kind);
std::string_view to_string(Direction direction);

/// Start/end marker; passes a token through without side effects.
struct EventNode {
    bool operator==(const EventNode&) const = default;
};

struct ActionNode {
    std::string action_key;
    bool operator==(const ActionNode&) const = default;
};

struct GatewayNode {
    GatewayKind kind = GatewayKind::ExclusiveOr;
    Direction direction = Direction::Split;
    /// Inclusive-OR splits name the merge that synchronizes their branches.
    std::optional<std::string> pair;
    bool operator==(const GatewayNode&) const = default;
};

struct Node {
    std::string id;
    std::variant<EventNode, ActionNode, GatewayNode> kind;
    bool operator==(const Node&) const = default;
};

struct Edge {
    std::string from;
    std::string to;
    std::optional<std::string> condition;
    /// Exclusive-OR split only: taken when every condition is false.
    bool is_default = false;
    bool operator==(const Edge&) const = default;
};

using EdgeIndex = std::size_t;
using EdgeSet = std::set<EdgeIndex>;

class ProcessDefinition {
public:
    std::string id;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::string start_node;
    std::vector<std::string> end_nodes;

    bool operator==(const ProcessDefinition& other) const
    {
        return id == other.id && nodes == other.nodes && edges == other.edges &&
               start_node == other.start_node && end_nodes == other.end_nodes;
    }

    const Node* find_node(std::string_view node_id) const;
    std::vector<EdgeIndex> outgoing(std::string_view node_id) const;
    std::vector<EdgeIndex> incoming(std::string_view node_id) const;
    bool is_end(std::string_view node_id) const;

    /// For every inclusive-OR split: branch edge -> incoming edge of its merge.
    /// Only meaningful on a validated definition.
    const std::map<EdgeIndex, EdgeIndex>& branch_map() const { return branch_map_; }

private:
    friend std::vector<std::string> validate(ProcessDefinition& definition);
    std::map<EdgeIndex, EdgeIndex> branch_map_;
};

/// Checks every structural invariant and fills the OR split/merge bookkeeping.
/// Returns the complete list of violations.
std::vector<std::string> validate(ProcessDefinition& definition);

struct ParseResult {
    std::optional<ProcessDefinition> definition;
    std::vector<std::string> errors;

    bool ok() const { return definition.has_value(); }
};

ParseResult parse_process(std::string_view document);
std::string serialize(const ProcessDefinition& definition);

/// Raised when a gateway cannot route a token as its semantics require.
class GatewayFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BranchCondition {
    EdgeIndex edge = 0;
    bool value = false;
    bool is_default = false;
};

/// Edges a split gateway activates. Conditions are ignored for ParallelAnd.
EdgeSet split(GatewayKind kind, std::span<const BranchCondition> branches);

/// Whether a merge gateway releases a token given the arrivals so far.
/// `activated` is the set of incoming edges a token may still arrive on.
bool merge_fire(GatewayKind kind, const EdgeSet& arrived, const EdgeSet& activated,
                const EdgeSet& declared);

using ConditionEnv = std::map<std::string, bool, std::less<>>;

struct Token {
    std::string node;
    std::optional<EdgeIndex> via;
    auto operator<=>(const Token&) const = default;
};

struct MergeState {
    EdgeSet activated;
    EdgeSet arrived;
    bool operator==(const MergeState&) const = default;
};

enum class InstanceStatus { Running, Completed, Aborted };

struct ProcessInstance {
    std::string definition_id;
    std::vector<Token> tokens;
    std::map<std::string, MergeState> merge_state;
    ConditionEnv condition_env;
    InstanceStatus status = InstanceStatus::Running;
    std::string diagnostic;
};

struct StepResult {
    ProcessInstance instance;
    std::vector<std::string> emitted;
};

ProcessInstance start_instance(const ProcessDefinition& definition);

/// Advances every token by one node, in node-id order.
StepResult step_instance(const ProcessDefinition& definition, const ProcessInstance& instance,
                         const ConditionEnv& env);

using ActionHandler = std::function<void(const std::string& action_key, ConditionEnv& env)>;

/// Steps a fresh instance to completion, calling `handler` for each emitted
/// action before the next step so actions can bind later conditions.
ProcessInstance run_to_completion(const ProcessDefinition& definition, ConditionEnv env,
                                  const ActionHandler& handler);

}  // namespace mrs::workflow
