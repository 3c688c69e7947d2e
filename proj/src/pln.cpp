#include "mrs/pln.hpp"

#include "mrs/codec.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>

namespace mrs::pln {

RegistrySnapshot snapshot(const kb::KnowledgeBase& kb)
{
    RegistrySnapshot registry;
    for (const auto& [id, record] : kb.robots()) {
        if (record.registered()) registry.push_back({id, record.capabilities, record.tasks_completed});
    }
    return registry;
}

std::optional<PlanFailure> check_robot_count(const RegistrySnapshot& registry)
{
    if (registry.size() < kMinRobots) return PlanFailure{FailureReason::InsufficientRobots, std::nullopt};
    return std::nullopt;
}

std::variant<std::vector<std::vector<RobotId>>, PlanFailure>
match_capabilities(const PlanBlueprint& pb, const RegistrySnapshot& registry)
{
    std::vector<std::vector<RobotId>> capable;
    capable.reserve(pb.tasks.size());
    for (const auto& task : pb.tasks) {
        std::vector<RobotId> robots;
        for (const auto& robot : registry) {
            if (robot_can_perform(robot.capabilities, task)) robots.push_back(robot.id);
        }
        if (robots.empty()) return PlanFailure{FailureReason::CapabilityMismatch, task.id};
        capable.push_back(std::move(robots));
    }
    return capable;
}

RobotId select_robot(std::span<const Candidate> candidates)
{
    if (candidates.empty()) throw std::invalid_argument("select_robot needs candidates");
    const auto best = std::min_element(candidates.begin(), candidates.end(),
                                       [](const Candidate& a, const Candidate& b) {
                                           if (a.effective_history != b.effective_history) {
                                               return a.effective_history < b.effective_history;
                                           }
                                           return a.robot_id < b.robot_id;
                                       });
    return best->robot_id;
}

VerifiedPlan balance_assignments(const PlanBlueprint& pb, const RequestId& request_id,
                                 const std::vector<std::vector<RobotId>>& capable,
                                 const RegistrySnapshot& registry, std::vector<Decision>* decisions)
{
    std::map<RobotId, std::uint64_t> effective;
    for (const auto& robot : registry) effective[robot.id] = robot.tasks_completed;

    VerifiedPlan plan{pb.id, request_id, {}};
    for (std::size_t i = 0; i < pb.tasks.size(); ++i) {
        std::vector<Candidate> candidates;
        for (const auto& robot : capable.at(i)) candidates.push_back({robot, effective.at(robot)});
        RobotId chosen = select_robot(candidates);
        ++effective[chosen];
        if (decisions) decisions->push_back({pb.tasks[i].id, candidates, chosen});
        plan.assignments.push_back({pb.tasks[i].id, std::move(chosen)});
    }
    return plan;
}

PlanResult build_verified_plan(const PlanBlueprint& pb, const RequestId& request_id,
                               const RegistrySnapshot& registry, std::vector<Decision>* decisions)
{
    if (auto failure = check_robot_count(registry)) return *failure;
    auto matched = match_capabilities(pb, registry);
    if (auto* failure = std::get_if<PlanFailure>(&matched)) return *failure;
    return balance_assignments(pb, request_id, std::get<0>(matched), registry, decisions);
}

Planner::Planner(bus::Broker& broker, const kb::KnowledgeBase& kb,
                 const workflow::ProcessDefinition& process, const events::Notifier& notifier)
    : broker_(broker), kb_(kb), notifier_(notifier), runner_(process),
      id_(broker.register_agent(std::string(bus::kPlanner)))
{
    bind_actions();
    broker_.on_message(id_, [this](const bus::AclMessage& m) { handle(m); });
}

void Planner::handle(const bus::AclMessage& message)
{
    if (message.performative != bus::Performative::Request ||
        message.content_kind != bus::ContentKind::Blueprint) {
        spdlog::warn("PLN: ignoring {} {} from {}", bus::to_string(message.performative),
                     bus::to_string(message.content_kind), message.sender.name);
        return;
    }
    ctx_ = Context{};
    ctx_.message = message;
    runner_.run("start", {});
}

void Planner::bind_actions()
{
    using workflow::ConditionEnv;
    runner_.bind("receive_blueprint", [this](ConditionEnv&) {
        ctx_.request = nlohmann::json::parse(ctx_.message.content).get<PlanRequest>();
    });
    runner_.bind("read_registered_robots", [this](ConditionEnv&) { ctx_.registry = snapshot(kb_); });
    // Capabilities and histories are part of the same registry snapshot.
    runner_.bind("read_capabilities", [](ConditionEnv&) {});
    runner_.bind("read_task_histories", [](ConditionEnv&) {});
    runner_.bind("check_robot_count", [this](ConditionEnv& env) {
        ctx_.failure = check_robot_count(ctx_.registry);
        env["enough_robots"] = !ctx_.failure;
        env["too_few_robots"] = ctx_.failure.has_value();
    });
    runner_.bind("match_capabilities", [this](ConditionEnv& env) {
        auto matched = match_capabilities(ctx_.request.blueprint, ctx_.registry);
        if (auto* failure = std::get_if<PlanFailure>(&matched)) {
            ctx_.failure = *failure;
        } else {
            ctx_.capable = std::move(std::get<0>(matched));
        }
        env["capabilities_match"] = !ctx_.failure;
        env["capability_mismatch"] = ctx_.failure.has_value();
    });
    runner_.bind("balance_assignments", [this](ConditionEnv&) {
        ctx_.plan = balance_assignments(ctx_.request.blueprint, ctx_.request.request_id, ctx_.capable,
                                        ctx_.registry, &decisions_);
    });
    runner_.bind("send_verified_plan", [this](ConditionEnv&) {
        const auto now = broker_.now();
        notifier_.publish(now, events::PlanCreated{ctx_.plan});
        Feedback accepted{"plan", ctx_.request.request_id, std::nullopt, std::nullopt, ""};
        broker_.send({bus::Performative::Agree, id_, ctx_.message.sender, ctx_.message.conversation_id,
                      bus::ContentKind::Feedback, nlohmann::json(accepted).dump()});
        auto rbm = broker_.find(bus::kRobotsManager);
        if (!rbm) {
            spdlog::error("PLN: no robots manager registered");
            return;
        }
        PlanDispatch dispatch{ctx_.plan, ctx_.request.blueprint.tasks};
        broker_.send({bus::Performative::Request, id_, *rbm, ctx_.message.conversation_id,
                      bus::ContentKind::VerifiedPlan, nlohmann::json(dispatch).dump()});
    });
    runner_.bind("report_insufficient_robots", [this](ConditionEnv&) { reply_failure(*ctx_.failure); });
    runner_.bind("report_capability_mismatch", [this](ConditionEnv&) { reply_failure(*ctx_.failure); });
}

void Planner::reply_failure(const PlanFailure& failure)
{
    notifier_.publish(broker_.now(),
                      events::PlanFailed{ctx_.request.request_id, failure.reason, failure.task_id});
    Feedback feedback{"plan", ctx_.request.request_id, failure.reason, failure.task_id, ""};
    broker_.send({bus::Performative::Failure, id_, ctx_.message.sender, ctx_.message.conversation_id,
                  bus::ContentKind::Feedback, nlohmann::json(feedback).dump()});
}

}  // namespace mrs::pln
