#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mrs {

/// Logical simulation time. All scheduling happens in integer milliseconds.
using SimTime = std::chrono::milliseconds;

using CapabilityId = std::string;
using CapabilitySet = std::set<CapabilityId>;
using RobotId = std::string;
using TaskId = std::string;
using RequestId = std::string;
using RequestKind = std::string;

struct Task {
    TaskId id;
    CapabilitySet required;

    bool operator==(const Task&) const = default;
};

/// Ordered task sequence that fulfills one request kind.
struct PlanBlueprint {
    std::string id;
    RequestKind request_kind;
    std::vector<Task> tasks;

    bool operator==(const PlanBlueprint&) const = default;
};

struct Request {
    RequestId id;
    RequestKind kind;
    SimTime arrival_time{0};

    bool operator==(const Request&) const = default;
};

struct Assignment {
    TaskId task_id;
    RobotId robot_id;

    bool operator==(const Assignment&) const = default;
};

/// A blueprint instance with every task bound to a robot, in blueprint order.
struct VerifiedPlan {
    std::string blueprint_id;
    RequestId request_id;
    std::vector<Assignment> assignments;

    bool operator==(const VerifiedPlan&) const = default;
};

enum class OutcomeStatus { Success, Failed };

enum class FailureReason {
    NoBlueprint,
    InsufficientRobots,
    CapabilityMismatch,
    PlanTimeout,
    TaskTimeout,
    TaskFailed,
};

struct RequestOutcome {
    RequestId request_id;
    OutcomeStatus status = OutcomeStatus::Success;
    std::optional<FailureReason> failure_reason;
    SimTime completion_time{0};

    static RequestOutcome success(RequestId id, SimTime at);
    static RequestOutcome failure(RequestId id, FailureReason reason, SimTime at);

    bool operator==(const RequestOutcome&) const = default;
};

enum class Lifecycle { Unregistered, Uncontrolled, Controlled };

/// Time a robot has spent in each lifecycle state.
struct RobotTimes {
    SimTime controlled{0};
    SimTime uncontrolled{0};
    SimTime unregistered{0};

    SimTime registered() const { return controlled + uncontrolled; }
    SimTime overall() const { return registered() + unregistered; }
    bool operator==(const RobotTimes&) const = default;
};

std::string_view to_string(OutcomeStatus status);
std::string_view to_string(FailureReason reason);
std::string_view to_string(Lifecycle state);
std::optional<OutcomeStatus> outcome_status_from_string(std::string_view text);
std::optional<FailureReason> failure_reason_from_string(std::string_view text);
std::optional<Lifecycle> lifecycle_from_string(std::string_view text);

/// True iff every capability the task requires is owned.
bool robot_can_perform(const CapabilitySet& capabilities, const Task& task);

/// Every invariant violation of the blueprint; empty means valid.
std::vector<std::string> validate_blueprint(const PlanBlueprint& pb);

}  // namespace mrs
