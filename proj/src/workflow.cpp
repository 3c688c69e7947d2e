#include "mrs/workflow.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>

namespace mrs::workflow {

using nlohmann::json;

std::string_view to_string(GatewayKind kind)
{
    switch (kind) {
    case GatewayKind::ExclusiveOr: return "xor";
    case GatewayKind::InclusiveOr: return "or";
    case GatewayKind::ParallelAnd: return "and";
    }
    return "?";
}

std::string_view to_string(Direction direction)
{
    return direction == Direction::Split ? "split" : "merge";
}

const Node* ProcessDefinition::find_node(std::string_view node_id) const
{
    auto it = std::find_if(nodes.begin(), nodes.end(),
                           [&](const Node& n) { return n.id == node_id; });
    return it == nodes.end() ? nullptr : &*it;
}

std::vector<EdgeIndex> ProcessDefinition::outgoing(std::string_view node_id) const
{
    std::vector<EdgeIndex> out;
    for (EdgeIndex i = 0; i < edges.size(); ++i) {
        if (edges[i].from == node_id) out.push_back(i);
    }
    return out;
}

std::vector<EdgeIndex> ProcessDefinition::incoming(std::string_view node_id) const
{
    std::vector<EdgeIndex> in;
    for (EdgeIndex i = 0; i < edges.size(); ++i) {
        if (edges[i].to == node_id) in.push_back(i);
    }
    return in;
}

bool ProcessDefinition::is_end(std::string_view node_id) const
{
    return std::find(end_nodes.begin(), end_nodes.end(), node_id) != end_nodes.end();
}

namespace {

const GatewayNode* as_gateway(const Node& node)
{
    return std::get_if<GatewayNode>(&node.kind);
}

bool has_cycle(const ProcessDefinition& def)
{
    // Kahn's algorithm over the declared nodes only.
    std::map<std::string, int> indegree;
    for (const auto& n : def.nodes) indegree[n.id] = 0;
    for (const auto& e : def.edges) {
        if (indegree.count(e.from) && indegree.count(e.to)) ++indegree[e.to];
    }
    std::deque<std::string> ready;
    for (const auto& [id, deg] : indegree) {
        if (deg == 0) ready.push_back(id);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        auto id = ready.front();
        ready.pop_front();
        ++visited;
        for (const auto& e : def.edges) {
            if (e.from == id && indegree.count(e.to) && --indegree[e.to] == 0) {
                ready.push_back(e.to);
            }
        }
    }
    return visited != indegree.size();
}

// Incoming edges of `merge` reachable by walking forward from `edge`.
std::set<EdgeIndex> merge_entries(const ProcessDefinition& def, EdgeIndex edge,
                                  const std::string& merge)
{
    std::set<EdgeIndex> entries;
    std::set<EdgeIndex> seen;
    std::deque<EdgeIndex> frontier{edge};
    while (!frontier.empty()) {
        EdgeIndex current = frontier.front();
        frontier.pop_front();
        if (!seen.insert(current).second) continue;
        const auto& target = def.edges[current].to;
        if (target == merge) {
            entries.insert(current);
            continue;
        }
        for (EdgeIndex next : def.outgoing(target)) frontier.push_back(next);
    }
    return entries;
}

}  // namespace

std::vector<std::string> validate(ProcessDefinition& def)
{
    std::vector<std::string> errors;
    def.branch_map_.clear();

    if (def.id.empty()) errors.emplace_back("process id is empty");

    std::set<std::string> ids;
    for (const auto& node : def.nodes) {
        if (node.id.empty()) errors.emplace_back("node with empty id");
        if (!ids.insert(node.id).second) errors.push_back("duplicate node id '" + node.id + "'");
    }

    bool dangling = false;
    for (const auto& edge : def.edges) {
        for (const auto* end : {&edge.from, &edge.to}) {
            if (!ids.count(*end)) {
                errors.push_back("dangling edge " + edge.from + " -> " + edge.to +
                                 ": undeclared node '" + *end + "'");
                dangling = true;
            }
        }
    }

    if (!ids.count(def.start_node)) {
        errors.push_back("start node '" + def.start_node + "' is not declared");
    }
    if (def.end_nodes.empty()) errors.emplace_back("no end nodes declared");
    for (const auto& end : def.end_nodes) {
        if (!ids.count(end)) errors.push_back("end node '" + end + "' is not declared");
        else if (!def.outgoing(end).empty()) {
            errors.push_back("end node '" + end + "' has outgoing edges");
        }
    }
    if (!def.start_node.empty() && !def.incoming(def.start_node).empty()) {
        errors.push_back("start node '" + def.start_node + "' has incoming edges");
    }

    // Reachability from start.
    if (ids.count(def.start_node)) {
        std::set<std::string> reached{def.start_node};
        std::deque<std::string> frontier{def.start_node};
        while (!frontier.empty()) {
            auto id = frontier.front();
            frontier.pop_front();
            for (EdgeIndex e : def.outgoing(id)) {
                const auto& to = def.edges[e].to;
                if (ids.count(to) && reached.insert(to).second) frontier.push_back(to);
            }
        }
        for (const auto& node : def.nodes) {
            if (!reached.count(node.id)) errors.push_back("unreachable node '" + node.id + "'");
        }
    }

    if (has_cycle(def)) errors.emplace_back("process graph has a cycle");

    for (const auto& node : def.nodes) {
        const auto out = def.outgoing(node.id);
        const auto in = def.incoming(node.id);
        const bool end = def.is_end(node.id);
        if (!end && out.empty()) {
            errors.push_back("node '" + node.id + "' has no outgoing edge");
        }

        if (std::holds_alternative<ActionNode>(node.kind)) {
            if (std::get<ActionNode>(node.kind).action_key.empty()) {
                errors.push_back("action node '" + node.id + "' has an empty action key");
            }
            if (out.size() > 1) {
                errors.push_back("action node '" + node.id + "' has more than one outgoing edge");
            }
        } else if (std::holds_alternative<EventNode>(node.kind)) {
            if (out.size() > 1) {
                errors.push_back("event node '" + node.id + "' has more than one outgoing edge");
            }
        }

        for (EdgeIndex e : out) {
            const auto& edge = def.edges[e];
            const auto* gw = as_gateway(node);
            const bool conditional_split = gw && gw->direction == Direction::Split &&
                                           gw->kind != GatewayKind::ParallelAnd;
            if (!conditional_split && (edge.condition || edge.is_default)) {
                errors.push_back("edge " + edge.from + " -> " + edge.to +
                                 " carries a condition outside a conditional split");
            }
        }

        const auto* gw = as_gateway(node);
        if (!gw) continue;
        if (end) {
            errors.push_back("gateway '" + node.id + "' cannot be an end node");
            continue;
        }
        if (gw->direction == Direction::Split) {
            if (out.size() < 2) {
                errors.push_back("split gateway '" + node.id + "' has " +
                                 std::to_string(out.size()) + " outgoing edge(s); needs at least 2");
            }
            if (gw->kind != GatewayKind::ParallelAnd) {
                std::size_t defaults = 0;
                for (EdgeIndex e : out) {
                    const auto& edge = def.edges[e];
                    if (edge.is_default) {
                        ++defaults;
                        if (gw->kind != GatewayKind::ExclusiveOr) {
                            errors.push_back("default edge on non-XOR split '" + node.id + "'");
                        }
                        if (edge.condition) {
                            errors.push_back("default edge " + edge.from + " -> " + edge.to +
                                             " also carries a condition");
                        }
                    } else if (!edge.condition || edge.condition->empty()) {
                        errors.push_back(std::string(to_string(gw->kind)) + " split edge " +
                                         edge.from + " -> " + edge.to + " is missing a condition key");
                    }
                }
                if (defaults > 1) {
                    errors.push_back("split gateway '" + node.id + "' has several default edges");
                }
            }
            if (gw->kind == GatewayKind::InclusiveOr) {
                if (!gw->pair) {
                    errors.push_back("OR split '" + node.id + "' does not name its merge");
                } else {
                    const Node* merge = def.find_node(*gw->pair);
                    const GatewayNode* mg = merge ? as_gateway(*merge) : nullptr;
                    if (!mg || mg->kind != GatewayKind::InclusiveOr ||
                        mg->direction != Direction::Merge) {
                        errors.push_back("OR split '" + node.id + "' pairs with '" + *gw->pair +
                                         "', which is not an OR merge");
                    } else if (!dangling) {
                        std::set<EdgeIndex> used;
                        for (EdgeIndex e : out) {
                            auto entries = merge_entries(def, e, *gw->pair);
                            if (entries.size() != 1) {
                                errors.push_back("branch " + def.edges[e].from + " -> " +
                                                 def.edges[e].to + " must reach OR merge '" +
                                                 *gw->pair + "' through exactly one incoming edge");
                                continue;
                            }
                            EdgeIndex entry = *entries.begin();
                            if (!used.insert(entry).second) {
                                errors.push_back("branches of OR split '" + node.id +
                                                 "' share a merge entry");
                            }
                            def.branch_map_[e] = entry;
                        }
                    }
                }
            } else if (gw->pair) {
                errors.push_back("only OR splits may name a merge ('" + node.id + "')");
            }
        } else {
            if (in.size() < 2) {
                errors.push_back("merge gateway '" + node.id + "' has " + std::to_string(in.size()) +
                                 " incoming edge(s); needs at least 2");
            }
            if (out.size() != 1) {
                errors.push_back("merge gateway '" + node.id + "' must have exactly one outgoing edge");
            }
            if (gw->pair) {
                errors.push_back("merge gateway '" + node.id + "' cannot name a pair");
            }
            if (gw->kind == GatewayKind::InclusiveOr) {
                const bool paired = std::any_of(def.nodes.begin(), def.nodes.end(), [&](const Node& n) {
                    const auto* s = as_gateway(n);
                    return s && s->direction == Direction::Split && s->pair == node.id;
                });
                if (!paired) errors.push_back("OR merge '" + node.id + "' has no paired OR split");
            }
        }
    }

    if (!errors.empty()) def.branch_map_.clear();
    return errors;
}

namespace {

std::optional<GatewayKind> gateway_kind_from(std::string_view text)
{
    if (text == "xor") return GatewayKind::ExclusiveOr;
    if (text == "or") return GatewayKind::InclusiveOr;
    if (text == "and") return GatewayKind::ParallelAnd;
    return std::nullopt;
}

}  // namespace

ParseResult parse_process(std::string_view document)
{
    ParseResult result;
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        result.errors.push_back(std::string("malformed document: ") + e.what());
        return result;
    }
    if (!doc.is_object()) {
        result.errors.emplace_back("document root must be an object");
        return result;
    }
    for (const char* key : {"id", "nodes", "edges", "start", "end"}) {
        if (!doc.contains(key)) result.errors.push_back(std::string("missing top-level key '") + key + "'");
    }
    if (!result.errors.empty()) return result;

    ProcessDefinition def;
    try {
        def.id = doc.at("id").get<std::string>();
        def.start_node = doc.at("start").get<std::string>();
        def.end_nodes = doc.at("end").get<std::vector<std::string>>();
        for (const auto& n : doc.at("nodes")) {
            Node node;
            node.id = n.at("id").get<std::string>();
            const auto type = n.at("type").get<std::string>();
            if (type == "event") {
                node.kind = EventNode{};
            } else if (type == "action") {
                node.kind = ActionNode{n.at("action").get<std::string>()};
            } else if (type == "gateway") {
                GatewayNode gw;
                auto kind = gateway_kind_from(n.at("gateway").get<std::string>());
                if (!kind) {
                    result.errors.push_back("node '" + node.id + "': unknown gateway kind");
                    continue;
                }
                gw.kind = *kind;
                const auto dir = n.at("direction").get<std::string>();
                if (dir != "split" && dir != "merge") {
                    result.errors.push_back("node '" + node.id + "': direction must be split or merge");
                    continue;
                }
                gw.direction = dir == "split" ? Direction::Split : Direction::Merge;
                if (n.contains("pair")) gw.pair = n.at("pair").get<std::string>();
                node.kind = gw;
            } else {
                result.errors.push_back("node '" + node.id + "': unknown type '" + type + "'");
                continue;
            }
            def.nodes.push_back(std::move(node));
        }
        for (const auto& e : doc.at("edges")) {
            Edge edge;
            edge.from = e.at("from").get<std::string>();
            edge.to = e.at("to").get<std::string>();
            if (e.contains("condition")) edge.condition = e.at("condition").get<std::string>();
            edge.is_default = e.value("default", false);
            def.edges.push_back(std::move(edge));
        }
    } catch (const json::exception& e) {
        result.errors.push_back(std::string("schema error: ") + e.what());
        return result;
    }
    if (!result.errors.empty()) return result;

    result.errors = validate(def);
    if (result.errors.empty()) result.definition = std::move(def);
    return result;
}

std::string serialize(const ProcessDefinition& def)
{
    json doc;
    doc["id"] = def.id;
    doc["start"] = def.start_node;
    doc["end"] = def.end_nodes;
    doc["nodes"] = json::array();
    for (const auto& node : def.nodes) {
        json n{{"id", node.id}};
        std::visit(
            [&](const auto& kind) {
                using K = std::decay_t<decltype(kind)>;
                if constexpr (std::is_same_v<K, EventNode>) {
                    n["type"] = "event";
                } else if constexpr (std::is_same_v<K, ActionNode>) {
                    n["type"] = "action";
                    n["action"] = kind.action_key;
                } else {
                    n["type"] = "gateway";
                    n["gateway"] = to_string(kind.kind);
                    n["direction"] = to_string(kind.direction);
                    if (kind.pair) n["pair"] = *kind.pair;
                }
            },
            node.kind);
        doc["nodes"].push_back(std::move(n));
    }
    doc["edges"] = json::array();
    for (const auto& edge : def.edges) {
        json e{{"from", edge.from}, {"to", edge.to}};
        if (edge.condition) e["condition"] = *edge.condition;
        if (edge.is_default) e["default"] = true;
        doc["edges"].push_back(std::move(e));
    }
    return doc.dump(2);
}

EdgeSet split(GatewayKind kind, std::span<const BranchCondition> branches)
{
    if (branches.size() < 2) throw GatewayFault("split needs at least two branches");
    EdgeSet active;
    if (kind == GatewayKind::ParallelAnd) {
        for (const auto& b : branches) active.insert(b.edge);
        return active;
    }
    std::optional<EdgeIndex> fallback;
    for (const auto& b : branches) {
        if (b.is_default) fallback = b.edge;
        else if (b.value) active.insert(b.edge);
    }
    if (kind == GatewayKind::ExclusiveOr) {
        if (active.size() > 1) {
            throw GatewayFault("XOR split: " + std::to_string(active.size()) + " conditions are true");
        }
        if (active.empty()) {
            if (!fallback) throw GatewayFault("XOR split: no condition is true and no default edge");
            active.insert(*fallback);
        }
        return active;
    }
    if (active.empty()) throw GatewayFault("OR split: no condition is true");
    return active;
}

bool merge_fire(GatewayKind kind, const EdgeSet& arrived, const EdgeSet& activated,
                const EdgeSet& declared)
{
    for (EdgeIndex e : arrived) {
        if (!activated.count(e)) {
            throw GatewayFault("merge: arrival on edge " + std::to_string(e) +
                               " that was not activated");
        }
    }
    switch (kind) {
    case GatewayKind::ExclusiveOr: return !arrived.empty();
    case GatewayKind::ParallelAnd: return arrived == declared;
    case GatewayKind::InclusiveOr: return !activated.empty() && arrived == activated;
    }
    return false;
}

ProcessInstance start_instance(const ProcessDefinition& definition)
{
    ProcessInstance instance;
    instance.definition_id = definition.id;
    instance.tokens.push_back(Token{definition.start_node, std::nullopt});
    return instance;
}

namespace {

void abort_instance(ProcessInstance& instance, std::string diagnostic)
{
    instance.status = InstanceStatus::Aborted;
    instance.diagnostic = std::move(diagnostic);
    instance.tokens.clear();
}

}  // namespace

StepResult step_instance(const ProcessDefinition& def, const ProcessInstance& current,
                         const ConditionEnv& env)
{
    StepResult result{current, {}};
    ProcessInstance& next = result.instance;
    next.condition_env = env;
    if (next.status != InstanceStatus::Running) return result;

    std::vector<Token> ready = current.tokens;
    std::sort(ready.begin(), ready.end());
    next.tokens.clear();

    try {
        for (const Token& token : ready) {
            const Node* node = def.find_node(token.node);
            if (!node) throw GatewayFault("token on undeclared node '" + token.node + "'");
            if (def.is_end(node->id)) continue;

            auto move_along = [&](EdgeIndex e) {
                next.tokens.push_back(Token{def.edges[e].to, e});
            };

            if (const auto* action = std::get_if<ActionNode>(&node->kind)) {
                result.emitted.push_back(action->action_key);
                move_along(def.outgoing(node->id).front());
                continue;
            }
            if (std::holds_alternative<EventNode>(node->kind)) {
                move_along(def.outgoing(node->id).front());
                continue;
            }

            const auto& gw = std::get<GatewayNode>(node->kind);
            const auto out = def.outgoing(node->id);
            if (gw.direction == Direction::Split) {
                std::vector<BranchCondition> branches;
                for (EdgeIndex e : out) {
                    const auto& edge = def.edges[e];
                    BranchCondition b{e, false, edge.is_default};
                    if (gw.kind != GatewayKind::ParallelAnd && edge.condition) {
                        auto it = env.find(*edge.condition);
                        if (it == env.end()) {
                            throw GatewayFault("gateway '" + node->id + "': condition '" +
                                               *edge.condition + "' is unbound");
                        }
                        b.value = it->second;
                    }
                    branches.push_back(b);
                }
                const EdgeSet active = split(gw.kind, branches);
                if (gw.kind == GatewayKind::InclusiveOr) {
                    auto& bookkeeping = next.merge_state[*gw.pair];
                    for (EdgeIndex e : active) bookkeeping.activated.insert(def.branch_map().at(e));
                }
                for (EdgeIndex e : active) move_along(e);
                continue;
            }

            // Merge.
            const auto in = def.incoming(node->id);
            const EdgeSet declared(in.begin(), in.end());
            auto& state = next.merge_state[node->id];
            const EdgeSet& activated = gw.kind == GatewayKind::InclusiveOr ? state.activated : declared;
            if (!token.via) throw GatewayFault("merge '" + node->id + "' reached without an edge");
            if (state.arrived.count(*token.via)) {
                throw GatewayFault("merge '" + node->id + "': second token on one incoming edge");
            }
            EdgeSet arrived = state.arrived;
            arrived.insert(*token.via);
            if (merge_fire(gw.kind, arrived, activated, declared)) {
                state.arrived.clear();
                if (gw.kind == GatewayKind::InclusiveOr) state.activated.clear();
                move_along(out.front());
            } else {
                state.arrived = std::move(arrived);
            }
        }
    } catch (const GatewayFault& fault) {
        abort_instance(next, fault.what());
        return result;
    }

    // Drop bookkeeping that has fully drained.
    for (auto it = next.merge_state.begin(); it != next.merge_state.end();) {
        if (it->second == MergeState{}) it = next.merge_state.erase(it);
        else ++it;
    }

    if (next.tokens.empty()) {
        if (!next.merge_state.empty()) {
            abort_instance(next, "deadlock: merge '" + next.merge_state.begin()->first +
                                     "' is waiting for tokens that cannot arrive");
        } else {
            next.status = InstanceStatus::Completed;
        }
    }
    return result;
}

ProcessInstance run_to_completion(const ProcessDefinition& definition, ConditionEnv env,
                                  const ActionHandler& handler)
{
    ProcessInstance instance = start_instance(definition);
    // An acyclic graph finishes within |nodes| + 1 steps.
    const std::size_t limit = definition.nodes.size() + 2;
    for (std::size_t i = 0; i < limit && instance.status == InstanceStatus::Running; ++i) {
        auto step = step_instance(definition, instance, env);
        instance = std::move(step.instance);
        for (const auto& key : step.emitted) handler(key, env);
    }
    if (instance.status == InstanceStatus::Running) {
        abort_instance(instance, "instance did not terminate");
    }
    return instance;
}

}  // namespace mrs::workflow
