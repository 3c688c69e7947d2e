#include "mrs/rbm.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>

namespace mrs::rbm {

using workflow::ConditionEnv;

namespace {

constexpr std::array<std::string_view, 4> kStimuli{"ev_plan", "ev_resume", "ev_task_feedback",
                                                           "ev_task_timeout"};

std::string task_conversation(const RequestId& request, const TaskId& task)
{
    return request + "/" + task;
}

}  // namespace

RobotAgent::RobotAgent(RobotId id, CapabilitySet capabilities, SimTime created_at)
    : id_(std::move(id)), capabilities_(std::move(capabilities)), created_at_(created_at),
      since_(created_at)
{
}

RobotTimes RobotAgent::times(SimTime now) const
{
    RobotTimes t = closed_;
    const SimTime open = now - since_;
    switch (state_) {
    case Lifecycle::Controlled: t.controlled += open; break;
    case Lifecycle::Uncontrolled: t.uncontrolled += open; break;
    case Lifecycle::Unregistered: t.unregistered += open; break;
    }
    return t;
}

void RobotAgent::transition(Lifecycle to, SimTime now)
{
    closed_ = times(now);
    since_ = now;
    state_ = to;
}

RobotsManager::RobotsManager(bus::Broker& broker, kb::KnowledgeBase& kb,
                             const workflow::ProcessDefinition& process, const events::Notifier& notifier,
                             Config config, RandomStream jitter, RandomStream faults)
    : broker_(broker), kb_(kb), notifier_(notifier), config_(std::move(config)),
      jitter_(std::move(jitter)), faults_(std::move(faults)), runner_(process),
      id_(broker.register_agent(std::string(bus::kRobotsManager)))
{
    bind_actions();
    broker_.on_message(id_, [this](const bus::AclMessage& m) { handle(m); });
    broker_.on_bounce(id_, [this](const bus::AclMessage& m) {
        if (m.content_kind != bus::ContentKind::TaskAssignment) return;
        auto assignment = nlohmann::json::parse(m.content).get<TaskAssignment>();
        ctx_ = Context{};
        ctx_.request_id = assignment.request_id;
        ctx_.expected_task = assignment.task.id;
        ctx_.failure = FailureReason::TaskFailed;
        ctx_.detail = "robot '" + assignment.robot_id + "' left before the assignment arrived";
        run("ev_task_timeout");
    });
}

void RobotsManager::add_robot(const RobotId& id, CapabilitySet capabilities)
{
    if (robots_.count(id)) throw std::invalid_argument("robot '" + id + "' is already in the fleet");
    kb_.add_robot(id, capabilities);
    robots_.emplace(id, RobotAgent(id, std::move(capabilities), broker_.now()));
}

const RobotAgent* RobotsManager::robot(const RobotId& id) const
{
    auto it = robots_.find(id);
    return it == robots_.end() ? nullptr : &it->second;
}

RobotAgent& RobotsManager::require(const RobotId& id)
{
    auto it = robots_.find(id);
    if (it == robots_.end()) throw kb::KbError(kb::ErrorCode::UnknownRobot, "unknown robot '" + id + "'");
    return it->second;
}

void RobotsManager::set_state(RobotAgent& robot, Lifecycle to)
{
    const Lifecycle from = robot.state_;
    const SimTime now = broker_.now();
    robot.transition(to, now);
    if (kb_.robot(robot.id())) kb_.set_times(robot.id(), robot.times(now));
    notifier_.publish(now, events::RobotStateChanged{robot.id(), from, to, robot.capabilities(),
                                                     robot.deregistration_pending_});
}

void RobotsManager::handle_registration(const RobotId& id, CapabilitySet capabilities)
{
    // The registry decides first so a refused robot leaves no trace in the fleet.
    kb_.register_robot(id, capabilities);
    if (!robots_.count(id)) robots_.emplace(id, RobotAgent(id, capabilities, broker_.now()));
    auto& robot = robots_.at(id);
    robot.capabilities_ = std::move(capabilities);
    robot.deregistration_pending_ = false;
    robot.bus_id_ = broker_.register_agent(id);
    broker_.on_message(*robot.bus_id_, [this, id](const bus::AclMessage& m) {
        robot_receive(robots_.at(id), m);
    });
    for (const auto& capability : robot.capabilities()) {
        broker_.publish_service(*robot.bus_id_, "capability:" + capability);
    }
    set_state(robot, Lifecycle::Uncontrolled);
}

DeregistrationResult RobotsManager::handle_deregistration(const RobotId& id)
{
    auto& robot = require(id);
    if (robot.state() == Lifecycle::Unregistered) {
        throw kb::KbError(kb::ErrorCode::NotRegistered, "robot '" + id + "' is not registered");
    }
    const bool busy = robot.state() == Lifecycle::Controlled || robot.current_task_.has_value() ||
                      std::any_of(executions_.begin(), executions_.end(), [&](const auto& e) {
                          const auto& ex = e.second;
                          return ex.task_in_flight && ex.plan.assignments[ex.cursor].robot_id == id;
                      });
    if (!busy) {
        unregister(robot);
        drain_resumptions();
        return DeregistrationResult::Immediate;
    }

    robot.deregistration_pending_ = true;
    if (!config_.fail_fast_deregistration) {
        notifier_.publish(broker_.now(), events::RobotStateChanged{id, robot.state(), robot.state(),
                                                                   robot.capabilities(), true});
        return DeregistrationResult::Deferred;
    }

    // Fail fast: abandon the in-flight task through the timeout path.
    for (const auto& [request_id, ex] : executions_) {
        if (ex.task_in_flight && ex.plan.assignments[ex.cursor].robot_id == id) {
            ctx_ = Context{};
            ctx_.request_id = request_id;
            ctx_.expected_task = ex.plan.assignments[ex.cursor].task_id;
            ctx_.failure = FailureReason::TaskFailed;
            ctx_.detail = "robot '" + id + "' deregistered during its task";
            run("ev_task_timeout");
            return DeregistrationResult::Immediate;
        }
    }
    // Controlled without a tracked plan: just drop it.
    if (robot.completion_event_) broker_.queue().cancel(*robot.completion_event_);
    robot.current_task_.reset();
    unregister(robot);
    drain_resumptions();
    return DeregistrationResult::Immediate;
}

void RobotsManager::unregister(RobotAgent& robot)
{
    if (robot.state() == Lifecycle::Controlled) {
        kb_.set_lifecycle(robot.id(), Lifecycle::Uncontrolled);
    }
    kb_.deregister_robot(robot.id());
    if (robot.bus_id_) {
        broker_.deregister_agent(*robot.bus_id_);
        robot.bus_id_.reset();
    }
    robot.current_task_.reset();
    robot.deregistration_pending_ = false;
    set_state(robot, Lifecycle::Unregistered);
    if (auto it = waiting_.find(robot.id()); it != waiting_.end()) {
        resume_.insert(resume_.end(), it->second.begin(), it->second.end());
        waiting_.erase(it);
    }
}

void RobotsManager::release(RobotAgent& robot)
{
    robot.current_task_.reset();
    if (robot.completion_event_) {
        broker_.queue().cancel(*robot.completion_event_);
        robot.completion_event_.reset();
    }
    if (robot.state() == Lifecycle::Controlled) {
        kb_.set_lifecycle(robot.id(), Lifecycle::Uncontrolled);
        set_state(robot, Lifecycle::Uncontrolled);
    }
    if (auto it = waiting_.find(robot.id()); it != waiting_.end()) {
        resume_.insert(resume_.end(), it->second.begin(), it->second.end());
        waiting_.erase(it);
    }
}

void RobotsManager::run(std::string_view stimulus)
{
    if (running_) throw std::logic_error("robots manager process re-entered");
    running_ = true;
    try {
        runner_.run(stimulus, kStimuli);
    } catch (...) {
        running_ = false;
        throw;
    }
    running_ = false;
    drain_resumptions();
}

void RobotsManager::drain_resumptions()
{
    if (running_) return;
    while (!resume_.empty()) {
        const RequestId request_id = resume_.front();
        resume_.pop_front();
        auto it = executions_.find(request_id);
        if (it == executions_.end() || it->second.task_in_flight) continue;
        ctx_ = Context{};
        ctx_.request_id = request_id;
        run("ev_resume");
    }
}

void RobotsManager::handle(const bus::AclMessage& message)
{
    try {
        if (message.performative == bus::Performative::Request &&
            message.content_kind == bus::ContentKind::VerifiedPlan) {
            // Plan outcomes go to the requests manager, not back to the planner.
            auto rqm = broker_.find(bus::kRequestsManager);
            on_verified_plan(nlohmann::json::parse(message.content).get<PlanDispatch>(), rqm ? *rqm : message.sender);
            return;
        }
        if (message.content_kind == bus::ContentKind::Feedback) {
            on_task_feedback(message);
            return;
        }
    } catch (const nlohmann::json::exception& e) {
        spdlog::warn("RbM: malformed {} from {}: {}", bus::to_string(message.content_kind),
                     message.sender.name, e.what());
        return;
    } catch (const std::invalid_argument& e) {
        spdlog::warn("RbM: rejected verified plan from {}: {}", message.sender.name, e.what());
        return;
    }
    spdlog::warn("RbM: protocol fault, unexpected {} {} from {}", bus::to_string(message.performative),
                 bus::to_string(message.content_kind), message.sender.name);
}

void RobotsManager::on_verified_plan(const PlanDispatch& dispatch, const bus::AgentId& reply_to)
{
    const auto& plan = dispatch.plan;
    if (plan.assignments.empty()) throw std::invalid_argument("verified plan has no assignments");
    if (plan.assignments.size() != dispatch.tasks.size()) {
        throw std::invalid_argument("verified plan and task list differ in length");
    }
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
        if (plan.assignments[i].task_id != dispatch.tasks[i].id) {
            throw std::invalid_argument("verified plan does not follow blueprint task order");
        }
    }
    if (executions_.count(plan.request_id)) {
        throw std::invalid_argument("a plan for request '" + plan.request_id + "' is already executing");
    }
    executions_.emplace(plan.request_id, PlanExecution{plan, dispatch.tasks, 0, false, SimTime{0}, {}, reply_to});
    ctx_ = Context{};
    ctx_.request_id = plan.request_id;
    run("ev_plan");
}

void RobotsManager::on_task_feedback(const bus::AclMessage& message)
{
    auto feedback = nlohmann::json::parse(message.content).get<Feedback>();
    ctx_ = Context{};
    ctx_.request_id = feedback.request_id;
    ctx_.expected_task = feedback.task_id;
    ctx_.message = message;
    ctx_.feedback = feedback;
    ctx_.failure = FailureReason::TaskFailed;
    run("ev_task_feedback");
}

void RobotsManager::on_task_timeout(const RequestId& request_id, const TaskId& task_id)
{
    ctx_ = Context{};
    ctx_.request_id = request_id;
    ctx_.expected_task = task_id;
    ctx_.failure = FailureReason::TaskTimeout;
    run("ev_task_timeout");
}

void RobotsManager::robot_receive(RobotAgent& robot, const bus::AclMessage& message)
{
    if (message.content_kind != bus::ContentKind::TaskAssignment) {
        spdlog::warn("{}: ignoring {} from {}", robot.id(), bus::to_string(message.content_kind),
                     message.sender.name);
        return;
    }
    auto assignment = nlohmann::json::parse(message.content).get<TaskAssignment>();
    auto refuse = [&](const std::string& why) {
        Feedback refusal{"task", assignment.request_id, FailureReason::TaskFailed, assignment.task.id, why};
        broker_.send({bus::Performative::Refuse, *robot.bus_id_, message.sender, message.conversation_id,
                      bus::ContentKind::Feedback, nlohmann::json(refusal).dump()});
    };
    if (robot.state() != Lifecycle::Uncontrolled) {
        refuse("robot is busy");
        return;
    }
    if (!robot_can_perform(robot.capabilities(), assignment.task)) {
        refuse("robot lacks a required capability");
        return;
    }

    robot.current_task_ = assignment;
    kb_.set_lifecycle(robot.id(), Lifecycle::Controlled);
    set_state(robot, Lifecycle::Controlled);

    // One draw from each stream per assignment keeps the streams aligned.
    const double fault_draw = faults_.uniform01();
    const std::int64_t jitter_ms =
        jitter_.between(-config_.task_jitter.count(), config_.task_jitter.count());
    const FaultProfile profile =
        config_.faults.count(robot.id()) ? config_.faults.at(robot.id()) : FaultProfile{};
    if (fault_draw < profile.stall_probability) {
        spdlog::debug("{}: stalls on {}", robot.id(), message.conversation_id);
        return;
    }
    const bool success = fault_draw >= profile.stall_probability + profile.fail_probability;
    const SimTime duration = std::max(SimTime{1}, config_.task_duration + SimTime{jitter_ms});
    robot.completion_event_ = broker_.queue().schedule_in(
        duration, EventClass::Timer, [this, id = robot.id(), success] { robot_finish(id, success); });
}

void RobotsManager::robot_finish(const RobotId& robot_id, bool success)
{
    auto& robot = robots_.at(robot_id);
    robot.completion_event_.reset();
    if (!robot.current_task_ || !robot.bus_id_) return;
    const auto& task = *robot.current_task_;
    Feedback feedback{"task", task.request_id, std::nullopt, task.task.id, ""};
    if (!success) feedback.reason = FailureReason::TaskFailed;
    broker_.send({success ? bus::Performative::Inform : bus::Performative::Failure, *robot.bus_id_, id_,
                  task_conversation(task.request_id, task.task.id), bus::ContentKind::Feedback,
                  nlohmann::json(feedback).dump()});
}

void RobotsManager::bind_actions()
{
    runner_.bind("accept_plan", [](ConditionEnv&) {});

    runner_.bind("dispatch_task", [this](ConditionEnv& env) {
        auto& ex = executions_.at(ctx_.request_id);
        const auto& assignment = ex.plan.assignments[ex.cursor];
        const auto& task = ex.tasks[ex.cursor];
        auto robot_it = robots_.find(assignment.robot_id);
        const kb::RobotRecord* record = kb_.robot(assignment.robot_id);
        bool ok = true;
        if (robot_it == robots_.end() || !record || !record->registered() || !robot_it->second.bus_id_) {
            ok = false;
            ctx_.failure = FailureReason::TaskFailed;
            ctx_.detail = "robot '" + assignment.robot_id + "' is no longer registered";
        } else {
            auto& robot = robot_it->second;
            const bool busy = robot.state() == Lifecycle::Controlled || robot.deregistration_pending() ||
                              std::any_of(executions_.begin(), executions_.end(), [&](const auto& e) {
                                  const auto& other = e.second;
                                  return other.task_in_flight &&
                                         other.plan.assignments[other.cursor].robot_id == robot.id();
                              });
            if (busy) {
                waiting_[robot.id()].push_back(ctx_.request_id);
            } else {
                TaskAssignment content{ctx_.request_id, task, robot.id()};
                auto receipt = broker_.send({bus::Performative::Request, id_, *robot.bus_id_,
                                             task_conversation(ctx_.request_id, task.id),
                                             bus::ContentKind::TaskAssignment, nlohmann::json(content).dump()});
                if (!receipt) {
                    ok = false;
                    ctx_.failure = FailureReason::TaskFailed;
                    ctx_.detail = receipt.error;
                } else {
                    ex.task_in_flight = true;
                    ex.deadline = broker_.now() + config_.task_timeout;
                    ex.deadline_event = broker_.queue().schedule(
                        ex.deadline, EventClass::Deadline,
                        [this, request = ctx_.request_id, task_id = task.id] { on_task_timeout(request, task_id); });
                    notifier_.publish(broker_.now(), events::TaskAssigned{ctx_.request_id, task.id, robot.id()});
                }
            }
        }
        env["dispatch_ok"] = ok;
        env["dispatch_failed"] = !ok;
    });

    runner_.bind("match_task", [this](ConditionEnv& env) {
        auto it = executions_.find(ctx_.request_id);
        bool live = it != executions_.end() && it->second.task_in_flight && ctx_.expected_task &&
                    it->second.plan.assignments[it->second.cursor].task_id == *ctx_.expected_task;
        if (live && ctx_.message) {
            live = ctx_.message->sender.name == it->second.plan.assignments[it->second.cursor].robot_id;
        } else if (live && ctx_.failure == FailureReason::TaskTimeout) {
            live = it->second.deadline == broker_.now();
        }
        env["in_flight"] = live;
    });

    runner_.bind("read_task_result", [this](ConditionEnv& env) {
        auto& ex = executions_.at(ctx_.request_id);
        const auto& assignment = ex.plan.assignments[ex.cursor];
        auto& robot = robots_.at(assignment.robot_id);
        const bool succeeded = ctx_.message->performative == bus::Performative::Inform;
        const bool held = robot.state() == Lifecycle::Controlled && robot.current_task_ &&
                          robot.current_task_->request_id == ctx_.request_id &&
                          robot.current_task_->task.id == assignment.task_id;
        if (ex.deadline_event) broker_.queue().cancel(*ex.deadline_event);
        ex.deadline_event.reset();
        ex.task_in_flight = false;
        if (!succeeded) {
            ctx_.failure = FailureReason::TaskFailed;
            ctx_.detail = ctx_.feedback ? ctx_.feedback->detail : "";
        }
        env["succeeded"] = succeeded && held;
        env["robot_stays"] = held && !robot.deregistration_pending();
        env["deregistration_pending"] = held && robot.deregistration_pending();
        env["refused"] = !held;
        notifier_.publish(broker_.now(),
                          events::TaskCompleted{ctx_.request_id, assignment.task_id, assignment.robot_id,
                                                succeeded && held,
                                                succeeded && held ? std::nullopt
                                                                  : std::optional{FailureReason::TaskFailed}});
    });

    runner_.bind("increment_history", [this](ConditionEnv&) {
        const auto& ex = executions_.at(ctx_.request_id);
        const auto& robot_id = ex.plan.assignments[ex.cursor].robot_id;
        const auto count = kb_.increment_history(robot_id);
        notifier_.publish(broker_.now(), events::HistoryChanged{robot_id, count});
    });
    runner_.bind("release_robot", [this](ConditionEnv&) {
        const auto& ex = executions_.at(ctx_.request_id);
        release(robots_.at(ex.plan.assignments[ex.cursor].robot_id));
    });
    runner_.bind("apply_deferred_deregistration", [this](ConditionEnv&) {
        const auto& ex = executions_.at(ctx_.request_id);
        auto& robot = robots_.at(ex.plan.assignments[ex.cursor].robot_id);
        release(robot);
        unregister(robot);
    });
    runner_.bind("log_refusal", [this](ConditionEnv&) {
        spdlog::info("RbM: task of '{}' refused: {}", ctx_.request_id, ctx_.detail);
    });

    runner_.bind("advance_cursor", [this](ConditionEnv& env) {
        auto& ex = executions_.at(ctx_.request_id);
        ++ex.cursor;
        env["more_tasks"] = ex.cursor < ex.plan.assignments.size();
    });

    runner_.bind("report_plan_success", [this](ConditionEnv&) {
        auto node = executions_.extract(ctx_.request_id);
        ++plans_succeeded_;
        Feedback feedback{"execution", ctx_.request_id, std::nullopt, std::nullopt, ""};
        broker_.send({bus::Performative::Inform, id_, node.mapped().reply_to, ctx_.request_id,
                      bus::ContentKind::Feedback, nlohmann::json(feedback).dump()});
    });
    runner_.bind("report_plan_failure", [this](ConditionEnv&) {
        auto node = executions_.extract(ctx_.request_id);
        auto& ex = node.mapped();
        if (ex.deadline_event) broker_.queue().cancel(*ex.deadline_event);
        ++plans_failed_;
        const TaskId task_id = ex.plan.assignments[std::min(ex.cursor, ex.plan.assignments.size() - 1)].task_id;
        Feedback feedback{"execution", ctx_.request_id, ctx_.failure, task_id, ctx_.detail};
        broker_.send({bus::Performative::Failure, id_, ex.reply_to, ctx_.request_id,
                      bus::ContentKind::Feedback, nlohmann::json(feedback).dump()});
        for (auto& [robot, queue] : waiting_) std::erase(queue, ctx_.request_id);
    });

    runner_.bind("abandon_task", [this](ConditionEnv&) {
        auto& ex = executions_.at(ctx_.request_id);
        const auto& assignment = ex.plan.assignments[ex.cursor];
        if (ex.deadline_event) broker_.queue().cancel(*ex.deadline_event);
        ex.deadline_event.reset();
        ex.task_in_flight = false;
        notifier_.publish(broker_.now(), events::TaskCompleted{ctx_.request_id, assignment.task_id,
                                                               assignment.robot_id, false, ctx_.failure});
        auto robot_it = robots_.find(assignment.robot_id);
        if (robot_it == robots_.end()) return;
        auto& robot = robot_it->second;
        const bool held = robot.current_task_ && robot.current_task_->request_id == ctx_.request_id &&
                          robot.current_task_->task.id == assignment.task_id;
        if (!held) return;
        const bool leaving = robot.deregistration_pending();
        release(robot);
        if (leaving) unregister(robot);
    });

    runner_.bind("log_stale_feedback", [this](ConditionEnv&) {
        spdlog::info("RbM: stale task event for '{}' ignored", ctx_.request_id);
    });
}

}  // namespace mrs::rbm
