#pragma once

// Planner: turns a plan blueprint into a verified plan by capability matching
// and history-balanced robot selection.

#include "mrs/bus.hpp"
#include "mrs/codec.hpp"
#include "mrs/domain.hpp"
#include "mrs/events.hpp"
#include "mrs/kb.hpp"
#include "mrs/processes.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mrs::pln {

/// Plans need at least this many registered robots.
inline constexpr std::size_t kMinRobots = 2;

struct PlanFailure {
    FailureReason reason = FailureReason::InsufficientRobots;
    std::optional<TaskId> task_id;  // set for CapabilityMismatch

    bool operator==(const PlanFailure&) const = default;
};

using PlanResult = std::variant<VerifiedPlan, PlanFailure>;

struct RobotView {
    RobotId id;
    CapabilitySet capabilities;
    std::uint64_t tasks_completed = 0;
};

/// Registered robots at planning time, ordered by robot id.
using RegistrySnapshot = std::vector<RobotView>;

RegistrySnapshot snapshot(const kb::KnowledgeBase& kb);

struct Candidate {
    RobotId robot_id;
    /// Completed tasks plus tentative assignments made earlier in this plan.
    std::uint64_t effective_history = 0;
};

/// One robot choice, kept for auditing the balancing rule.
struct Decision {
    TaskId task_id;
    std::vector<Candidate> candidates;
    RobotId chosen;
};

std::optional<PlanFailure> check_robot_count(const RegistrySnapshot& registry);

/// Capable robots per task, in blueprint order, or the first unmatched task.
std::variant<std::vector<std::vector<RobotId>>, PlanFailure>
match_capabilities(const PlanBlueprint& pb, const RegistrySnapshot& registry);

/// Least effective history wins; ties go to the smallest robot id.
RobotId select_robot(std::span<const Candidate> candidates);

VerifiedPlan balance_assignments(const PlanBlueprint& pb, const RequestId& request_id,
                                 const std::vector<std::vector<RobotId>>& capable,
                                 const RegistrySnapshot& registry,
                                 std::vector<Decision>* decisions = nullptr);

PlanResult build_verified_plan(const PlanBlueprint& pb, const RequestId& request_id,
                               const RegistrySnapshot& registry,
                               std::vector<Decision>* decisions = nullptr);

/// The planner agent. Runs pln.process once per received blueprint.
class Planner {
public:
    Planner(bus::Broker& broker, const kb::KnowledgeBase& kb,
            const workflow::ProcessDefinition& process, const events::Notifier& notifier);

    const bus::AgentId& id() const { return id_; }
    /// Every balancing decision made so far, in order.
    const std::vector<Decision>& decisions() const { return decisions_; }

private:
    struct Context {
        bus::AclMessage message;
        PlanRequest request;
        RegistrySnapshot registry;
        std::vector<std::vector<RobotId>> capable;
        std::optional<PlanFailure> failure;
        VerifiedPlan plan;
    };

    void handle(const bus::AclMessage& message);
    void bind_actions();
    void reply_failure(const PlanFailure& failure);

    bus::Broker& broker_;
    const kb::KnowledgeBase& kb_;
    const events::Notifier& notifier_;
    ProcessRunner runner_;
    bus::AgentId id_;
    Context ctx_;
    std::vector<Decision> decisions_;
};

}  // namespace mrs::pln
