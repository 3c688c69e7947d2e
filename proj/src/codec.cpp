#include "mrs/codec.hpp"

namespace mrs {

using nlohmann::json;

namespace {

SimTime time_from(const json& j, const char* key)
{
    return SimTime{j.at(key).get<std::int64_t>()};
}

}  // namespace

void to_json(json& j, const Task& v)
{
    j = json{{"id", v.id}, {"required", v.required}};
}

void from_json(const json& j, Task& v)
{
    j.at("id").get_to(v.id);
    // Duplicates collapse here; validate_blueprint checks the rest.
    v.required = j.at("required").get<CapabilitySet>();
}

void to_json(json& j, const PlanBlueprint& v)
{
    j = json{{"id", v.id}, {"request_kind", v.request_kind}, {"tasks", v.tasks}};
}

void from_json(const json& j, PlanBlueprint& v)
{
    j.at("id").get_to(v.id);
    j.at("request_kind").get_to(v.request_kind);
    j.at("tasks").get_to(v.tasks);
}

void to_json(json& j, const Request& v)
{
    j = json{{"id", v.id}, {"kind", v.kind}, {"arrival_ms", v.arrival_time.count()}};
}

void from_json(const json& j, Request& v)
{
    j.at("id").get_to(v.id);
    j.at("kind").get_to(v.kind);
    v.arrival_time = j.contains("arrival_ms") ? time_from(j, "arrival_ms") : SimTime{0};
}

void to_json(json& j, const Assignment& v)
{
    j = json{{"task", v.task_id}, {"robot", v.robot_id}};
}

void from_json(const json& j, Assignment& v)
{
    j.at("task").get_to(v.task_id);
    j.at("robot").get_to(v.robot_id);
}

void to_json(json& j, const VerifiedPlan& v)
{
    j = json{{"blueprint_id", v.blueprint_id},
             {"request_id", v.request_id},
             {"assignments", v.assignments}};
}

void from_json(const json& j, VerifiedPlan& v)
{
    j.at("blueprint_id").get_to(v.blueprint_id);
    j.at("request_id").get_to(v.request_id);
    j.at("assignments").get_to(v.assignments);
}

void to_json(json& j, const RequestOutcome& v)
{
    j = json{{"request_id", v.request_id},
             {"status", to_string(v.status)},
             {"completion_ms", v.completion_time.count()}};
    if (v.failure_reason) j["reason"] = to_string(*v.failure_reason);
}

void from_json(const json& j, RequestOutcome& v)
{
    j.at("request_id").get_to(v.request_id);
    auto status = outcome_status_from_string(j.at("status").get<std::string>());
    if (!status) throw std::invalid_argument("unknown outcome status");
    v.status = *status;
    v.failure_reason.reset();
    if (j.contains("reason")) {
        auto reason = failure_reason_from_string(j.at("reason").get<std::string>());
        if (!reason) throw std::invalid_argument("unknown failure reason");
        v.failure_reason = reason;
    }
    v.completion_time = time_from(j, "completion_ms");
}

void to_json(json& j, const PlanRequest& v)
{
    j = json{{"request_id", v.request_id}, {"blueprint", v.blueprint}};
}

void from_json(const json& j, PlanRequest& v)
{
    j.at("request_id").get_to(v.request_id);
    j.at("blueprint").get_to(v.blueprint);
}

void to_json(json& j, const PlanDispatch& v)
{
    j = v.plan;
    j["tasks"] = v.tasks;
}

void from_json(const json& j, PlanDispatch& v)
{
    j.get_to(v.plan);
    j.at("tasks").get_to(v.tasks);
}

void to_json(json& j, const TaskAssignment& v)
{
    j = json{{"request_id", v.request_id}, {"task", v.task}, {"robot", v.robot_id}};
}

void from_json(const json& j, TaskAssignment& v)
{
    j.at("request_id").get_to(v.request_id);
    j.at("task").get_to(v.task);
    j.at("robot").get_to(v.robot_id);
}

void to_json(json& j, const Feedback& v)
{
    j = json{{"subject", v.subject}, {"request_id", v.request_id}};
    if (v.reason) j["reason"] = to_string(*v.reason);
    if (v.task_id) j["task"] = *v.task_id;
    if (!v.detail.empty()) j["detail"] = v.detail;
}

void from_json(const json& j, Feedback& v)
{
    j.at("subject").get_to(v.subject);
    j.at("request_id").get_to(v.request_id);
    v.reason.reset();
    v.task_id.reset();
    if (j.contains("reason")) {
        auto reason = failure_reason_from_string(j.at("reason").get<std::string>());
        if (!reason) throw std::invalid_argument("unknown failure reason");
        v.reason = reason;
    }
    if (j.contains("task")) v.task_id = j.at("task").get<std::string>();
    v.detail = j.value("detail", std::string{});
}

void to_json(json& j, const RegistryCommand& v)
{
    j = json{{"action", v.action}, {"robot", v.robot_id}, {"capabilities", v.capabilities}};
}

void from_json(const json& j, RegistryCommand& v)
{
    j.at("action").get_to(v.action);
    j.at("robot").get_to(v.robot_id);
    v.capabilities = j.value("capabilities", CapabilitySet{});
}

}  // namespace mrs
