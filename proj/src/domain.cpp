#include "mrs/domain.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace mrs {

namespace {

constexpr std::array kReasons{
    std::pair{FailureReason::NoBlueprint, std::string_view{"NoBlueprint"}},
    std::pair{FailureReason::InsufficientRobots, std::string_view{"InsufficientRobots"}},
    std::pair{FailureReason::CapabilityMismatch, std::string_view{"CapabilityMismatch"}},
    std::pair{FailureReason::PlanTimeout, std::string_view{"PlanTimeout"}},
    std::pair{FailureReason::TaskTimeout, std::string_view{"TaskTimeout"}},
    std::pair{FailureReason::TaskFailed, std::string_view{"TaskFailed"}},
};

constexpr std::array kLifecycles{
    std::pair{Lifecycle::Unregistered, std::string_view{"Unregistered"}},
    std::pair{Lifecycle::Uncontrolled, std::string_view{"Uncontrolled"}},
    std::pair{Lifecycle::Controlled, std::string_view{"Controlled"}},
};

}  // namespace

RequestOutcome RequestOutcome::success(RequestId id, SimTime at)
{
    return RequestOutcome{std::move(id), OutcomeStatus::Success, std::nullopt, at};
}

RequestOutcome RequestOutcome::failure(RequestId id, FailureReason reason, SimTime at)
{
    return RequestOutcome{std::move(id), OutcomeStatus::Failed, reason, at};
}

std::string_view to_string(OutcomeStatus status)
{
    return status == OutcomeStatus::Success ? "Success" : "Failed";
}

std::string_view to_string(FailureReason reason)
{
    for (const auto& [value, name] : kReasons) {
        if (value == reason) return name;
    }
    return "?";
}

std::string_view to_string(Lifecycle state)
{
    for (const auto& [value, name] : kLifecycles) {
        if (value == state) return name;
    }
    return "?";
}

std::optional<OutcomeStatus> outcome_status_from_string(std::string_view text)
{
    if (text == "Success") return OutcomeStatus::Success;
    if (text == "Failed") return OutcomeStatus::Failed;
    return std::nullopt;
}

std::optional<FailureReason> failure_reason_from_string(std::string_view text)
{
    for (const auto& [value, name] : kReasons) {
        if (name == text) return value;
    }
    return std::nullopt;
}

std::optional<Lifecycle> lifecycle_from_string(std::string_view text)
{
    for (const auto& [value, name] : kLifecycles) {
        if (name == text) return value;
    }
    return std::nullopt;
}

bool robot_can_perform(const CapabilitySet& capabilities, const Task& task)
{
    return std::includes(capabilities.begin(), capabilities.end(),
                         task.required.begin(), task.required.end());
}

std::vector<std::string> validate_blueprint(const PlanBlueprint& pb)
{
    std::vector<std::string> violations;
    if (pb.id.empty()) violations.emplace_back("empty blueprint id");
    if (pb.request_kind.empty()) violations.emplace_back("empty request kind");
    if (pb.tasks.empty()) violations.emplace_back("empty task list");

    std::set<TaskId> seen;
    for (const auto& task : pb.tasks) {
        if (task.id.empty()) violations.emplace_back("empty task id");
        if (!seen.insert(task.id).second) {
            violations.push_back("duplicate task id '" + task.id + "'");
        }
        if (task.required.empty()) {
            violations.push_back("empty required set for task '" + task.id + "'");
        }
        if (task.required.count(CapabilityId{}) != 0) {
            violations.push_back("empty capability id in task '" + task.id + "'");
        }
    }
    return violations;
}

}  // namespace mrs
