#pragma once

// JSON forms of the domain types and message payloads. Shared by the message
// bus, the trace, scenario files and the service wire format.

#include "mrs/domain.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mrs {

/// RqM -> PLN: a blueprint to instantiate for one request.
struct PlanRequest {
    RequestId request_id;
    PlanBlueprint blueprint;
    bool operator==(const PlanRequest&) const = default;
};

/// PLN -> RbM: the verified plan plus the tasks it binds, so the robots
/// manager can build assignments without consulting the blueprint store.
struct PlanDispatch {
    VerifiedPlan plan;
    std::vector<Task> tasks;
    bool operator==(const PlanDispatch&) const = default;
};

/// RbM -> robot: one task of a verified plan.
struct TaskAssignment {
    RequestId request_id;
    Task task;
    RobotId robot_id;
    bool operator==(const TaskAssignment&) const = default;
};

/// Feedback between controllers and from robots. `subject` names what the
/// feedback is about: "plan", "execution" or "task".
struct Feedback {
    std::string subject;
    RequestId request_id;
    std::optional<FailureReason> reason;
    std::optional<TaskId> task_id;
    std::string detail;
    bool operator==(const Feedback&) const = default;
};

struct RegistryCommand {
    std::string action;  // "register" | "deregister"
    RobotId robot_id;
    CapabilitySet capabilities;
    bool operator==(const RegistryCommand&) const = default;
};

void to_json(nlohmann::json& j, const Task& v);
void from_json(const nlohmann::json& j, Task& v);
void to_json(nlohmann::json& j, const PlanBlueprint& v);
void from_json(const nlohmann::json& j, PlanBlueprint& v);
void to_json(nlohmann::json& j, const Request& v);
void from_json(const nlohmann::json& j, Request& v);
void to_json(nlohmann::json& j, const Assignment& v);
void from_json(const nlohmann::json& j, Assignment& v);
void to_json(nlohmann::json& j, const VerifiedPlan& v);
void from_json(const nlohmann::json& j, VerifiedPlan& v);
void to_json(nlohmann::json& j, const RequestOutcome& v);
void from_json(const nlohmann::json& j, RequestOutcome& v);
void to_json(nlohmann::json& j, const PlanRequest& v);
void from_json(const nlohmann::json& j, PlanRequest& v);
void to_json(nlohmann::json& j, const PlanDispatch& v);
void from_json(const nlohmann::json& j, PlanDispatch& v);
void to_json(nlohmann::json& j, const TaskAssignment& v);
void from_json(const nlohmann::json& j, TaskAssignment& v);
void to_json(nlohmann::json& j, const Feedback& v);
void from_json(const nlohmann::json& j, Feedback& v);
void to_json(nlohmann::json& j, const RegistryCommand& v);
void from_json(const nlohmann::json& j, RegistryCommand& v);

}  // namespace mrs
