#pragma once

// Reference gateway semantics written independently of the engine, plus
// builders for small split/merge processes used to exercise it.

#include "mrs/workflow.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using mrs::workflow::GatewayKind;

inline const char* kind_text(GatewayKind k)
{
    switch (k) {
    case GatewayKind::ExclusiveOr: return "xor";
    case GatewayKind::InclusiveOr: return "or";
    case GatewayKind::ParallelAnd: return "and";
    }
    return "?";
}

/// Branch indices a split activates, or nullopt for a fault.
inline std::optional<std::set<int>> split(GatewayKind k, const std::vector<bool>& values, std::optional<int> fallback)
{
    std::set<int> on;
    for (int i = 0; i < static_cast<int>(values.size()); ++i) {
        if (k == GatewayKind::ParallelAnd || (values[i] && i != fallback)) on.insert(i);
    }
    if (k == GatewayKind::ParallelAnd) return on;
    if (k == GatewayKind::ExclusiveOr) {
        if (on.size() == 1) return on;
        if (on.empty() && fallback) return std::set<int>{*fallback};
        return std::nullopt;
    }
    if (on.empty()) return std::nullopt;
    return on;
}

/// Whether a merge fires; nullopt when an arrival was never activated.
inline std::optional<bool> merge(GatewayKind k, const std::set<int>& arrived, const std::set<int>& activated, int n)
{
    if (!std::includes(activated.begin(), activated.end(), arrived.begin(), arrived.end())) return std::nullopt;
    switch (k) {
    case GatewayKind::ExclusiveOr: return !arrived.empty();
    case GatewayKind::ParallelAnd: return static_cast<int>(arrived.size()) == n;
    case GatewayKind::InclusiveOr: return !activated.empty() && arrived == activated;
    }
    return std::nullopt;
}

/// Token simulation of a split/merge diamond whose branch i is a chain of
/// lengths[i] actions. Tokens advance one node per tick. Returns the tick at
/// which a token leaves the merge, for each departure.
inline std::vector<int> diamond_departures(GatewayKind k, const std::set<int>& activated, const std::vector<int>& lengths)
{
    // Token on branch i reaches the merge after lengths[i] ticks.
    std::vector<std::pair<int, int>> arrivals;
    for (int i : activated) arrivals.push_back({lengths[i], i});
    std::sort(arrivals.begin(), arrivals.end());
    std::vector<int> departures;
    std::set<int> arrived;
    for (const auto& [tick, branch] : arrivals) {
        arrived.insert(branch);
        const bool fire = k == GatewayKind::ExclusiveOr
                              ? true
                              : (k == GatewayKind::ParallelAnd ? arrived.size() == lengths.size() : arrived == activated);
        if (fire) {
            departures.push_back(tick);
            if (k != GatewayKind::ExclusiveOr) arrived.clear();
        }
    }
    return departures;
}

/// start -> split -> n branch chains -> merge -> after -> end.
inline std::string diamond_document(GatewayKind k, const std::vector<int>& lengths, std::optional<int> fallback = {})
{
    using nlohmann::json;
    json nodes = json::array();
    json edges = json::array();
    nodes.push_back({{"id", "start"}, {"type", "event"}});
    json split{{"id", "split"}, {"type", "gateway"}, {"gateway", kind_text(k)}, {"direction", "split"}};
    if (k == GatewayKind::InclusiveOr) split["pair"] = "merge";
    nodes.push_back(split);
    nodes.push_back({{"id", "merge"}, {"type", "gateway"}, {"gateway", kind_text(k)}, {"direction", "merge"}});
    nodes.push_back({{"id", "after"}, {"type", "action"}, {"action", "after"}});
    nodes.push_back({{"id", "end"}, {"type", "event"}});
    edges.push_back({{"from", "start"}, {"to", "split"}});
    for (int i = 0; i < static_cast<int>(lengths.size()); ++i) {
        std::string prev = "split";
        for (int j = 1; j <= lengths[i]; ++j) {
            const std::string id = "b" + std::to_string(i) + "_" + std::to_string(j);
            nodes.push_back({{"id", id}, {"type", "action"}, {"action", id}});
            json e{{"from", prev}, {"to", id}};
            if (j == 1 && k != GatewayKind::ParallelAnd) {
                if (fallback == i) {
                    e["default"] = true;
                } else {
                    e["condition"] = "c" + std::to_string(i);
                }
            }
            edges.push_back(e);
            prev = id;
        }
        edges.push_back({{"from", prev}, {"to", "merge"}});
    }
    edges.push_back({{"from", "merge"}, {"to", "after"}});
    edges.push_back({{"from", "after"}, {"to", "end"}});
    return json{{"id", "diamond"}, {"start", "start"}, {"end", {"end"}}, {"nodes", nodes}, {"edges", edges}}.dump(2);
}

inline mrs::workflow::ConditionEnv env_for(const std::vector<bool>& values)
{
    mrs::workflow::ConditionEnv env;
    for (std::size_t i = 0; i < values.size(); ++i) env["c" + std::to_string(i)] = values[i];
    return env;
}

}  // namespace oracle
