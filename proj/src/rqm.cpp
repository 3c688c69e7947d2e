#include "mrs/rqm.hpp"

#include "mrs/codec.hpp"

#include <spdlog/spdlog.h>

#include <array>

namespace mrs::rqm {

using workflow::ConditionEnv;

std::string_view to_string(EntryState state)
{
    switch (state) {
    case EntryState::Queued: return "Queued";
    case EntryState::AwaitingPlan: return "AwaitingPlan";
    case EntryState::AwaitingExecution: return "AwaitingExecution";
    case EntryState::Done: return "Done";
    }
    return "?";
}

namespace {

constexpr std::array<std::string_view, 5> kStimuli{
    "ev_request", "ev_dispatch", "ev_plan_feedback", "ev_exec_feedback", "ev_timeout"};

}  // namespace

RequestsManager::RequestsManager(bus::Broker& broker, const kb::KnowledgeBase& kb,
                                 const workflow::ProcessDefinition& process,
                                 const events::Notifier& notifier, Config config)
    : broker_(broker), kb_(kb), notifier_(notifier), config_(config), runner_(process),
      id_(broker.register_agent(std::string(bus::kRequestsManager)))
{
    if (config_.max_in_flight == 0) throw std::invalid_argument("max_in_flight must be positive");
    bind_actions();
    broker_.on_message(id_, [this](const bus::AclMessage& m) { handle(m); });
}

void RequestsManager::handle(const bus::AclMessage& message)
{
    try {
        if (message.content_kind == bus::ContentKind::Submission &&
            message.performative == bus::Performative::Request) {
            auto request = nlohmann::json::parse(message.content).get<Request>();
            request.arrival_time = broker_.now();
            if (on_request(request, message)) dispatch_next();
            return;
        }
        if (message.content_kind == bus::ContentKind::Feedback) {
            auto feedback = nlohmann::json::parse(message.content).get<Feedback>();
            if (feedback.subject == "plan") {
                on_planner_feedback(message);
                return;
            }
            if (feedback.subject == "execution") {
                on_execution_feedback(message);
                return;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        spdlog::warn("RqM: malformed {} content from {}: {}", bus::to_string(message.content_kind),
                     message.sender.name, e.what());
        return;
    }
    spdlog::warn("RqM: protocol fault, unexpected {} {} from {}", bus::to_string(message.performative),
                 bus::to_string(message.content_kind), message.sender.name);
}

void RequestsManager::run(std::string_view stimulus)
{
    runner_.run(stimulus, kStimuli);
}

bool RequestsManager::on_request(const Request& request, std::optional<bus::AclMessage> origin)
{
    ctx_ = Context{};
    ctx_.message = std::move(origin);
    ctx_.incoming = request;
    ctx_.request_id = request.id;
    accepted_ = false;
    run("ev_request");
    return accepted_;
}

void RequestsManager::dispatch_next()
{
    ctx_ = Context{};
    do {
        dispatched_ = false;
        run("ev_dispatch");
    } while (dispatched_);
}

void RequestsManager::on_planner_feedback(const bus::AclMessage& message)
{
    ctx_ = Context{};
    ctx_.message = message;
    ctx_.feedback = nlohmann::json::parse(message.content).get<Feedback>();
    ctx_.request_id = ctx_.feedback->request_id;
    ctx_.phase = Phase::Plan;
    run("ev_plan_feedback");
    dispatch_next();
}

void RequestsManager::on_execution_feedback(const bus::AclMessage& message)
{
    ctx_ = Context{};
    ctx_.message = message;
    ctx_.feedback = nlohmann::json::parse(message.content).get<Feedback>();
    ctx_.request_id = ctx_.feedback->request_id;
    ctx_.phase = Phase::Execution;
    run("ev_exec_feedback");
    dispatch_next();
}

void RequestsManager::on_timeout(const RequestId& request_id, Phase phase)
{
    ctx_ = Context{};
    ctx_.request_id = request_id;
    ctx_.phase = phase;
    run("ev_timeout");
    dispatch_next();
}

std::size_t RequestsManager::in_flight() const
{
    std::size_t n = 0;
    for (const auto& [id, entry] : entries_) {
        n += entry.state == EntryState::AwaitingPlan || entry.state == EntryState::AwaitingExecution;
    }
    return n;
}

const RequestQueueEntry* RequestsManager::entry(const RequestId& id) const
{
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

void RequestsManager::arm_deadline(RequestQueueEntry& entry, Phase phase)
{
    auto& queue = broker_.queue();
    if (entry.deadline_event) queue.cancel(*entry.deadline_event);
    const SimTime limit = phase == Phase::Plan ? config_.plan_timeout : config_.exec_timeout;
    entry.deadline = queue.now() + limit;
    entry.deadline_event = queue.schedule(entry.deadline, EventClass::Deadline,
                                          [this, id = entry.request.id, phase] { on_timeout(id, phase); });
}

void RequestsManager::finish(RequestQueueEntry& entry, RequestOutcome outcome)
{
    if (entry.deadline_event) broker_.queue().cancel(*entry.deadline_event);
    entry.deadline_event.reset();
    entry.state = EntryState::Done;
    entry.outcome = outcome;
    if (outcome.status == OutcomeStatus::Success) ++succeeded_;
    else ++failed_;

    notifier_.publish(broker_.now(), events::RequestFinished{outcome, entry.request.kind,
                                                             entry.request.arrival_time});
    if (auto requestor = broker_.find(bus::kRequestor)) {
        const auto performative = outcome.status == OutcomeStatus::Success ? bus::Performative::Inform
                                                                            : bus::Performative::Failure;
        broker_.send({performative, id_, *requestor, entry.request.id, bus::ContentKind::Outcome,
                      nlohmann::json(outcome).dump()});
    }
}

void RequestsManager::bind_actions()
{
    // Request arrival.
    runner_.bind("accept_request", [this](ConditionEnv& env) {
        env["fresh"] = !entries_.count(ctx_.incoming->id);
    });
    runner_.bind("enqueue_request", [this](ConditionEnv&) {
        const Request& request = *ctx_.incoming;
        entries_.emplace(request.id, RequestQueueEntry{request, EntryState::Queued, SimTime{0}, {}, {}});
        queue_.push_back(request.id);
        ++received_;
        accepted_ = true;
        notifier_.publish(broker_.now(), events::RequestArrived{request});
    });
    runner_.bind("reject_duplicate", [this](ConditionEnv&) {
        ++duplicates_;
        spdlog::warn("RqM: duplicate request id '{}' rejected", ctx_.incoming->id);
        if (ctx_.message) {
            Feedback refusal{"request", ctx_.incoming->id, std::nullopt, std::nullopt, "duplicate request id"};
            broker_.send({bus::Performative::Refuse, id_, ctx_.message->sender, ctx_.incoming->id,
                          bus::ContentKind::Feedback, nlohmann::json(refusal).dump()});
        }
    });

    // FCFS dispatch.
    runner_.bind("check_capacity", [this](ConditionEnv& env) {
        env["can_dispatch"] = !queue_.empty() && in_flight() < config_.max_in_flight;
    });
    runner_.bind("dequeue_head", [this](ConditionEnv&) {
        ctx_.request_id = queue_.front();
        queue_.pop_front();
        dispatched_ = true;
    });
    runner_.bind("lookup_blueprint", [this](ConditionEnv& env) {
        const auto& entry = entries_.at(ctx_.request_id);
        ctx_.blueprint = kb_.find_blueprint(entry.request.kind);
        env["blueprint_found"] = ctx_.blueprint.has_value();
        env["no_blueprint"] = !ctx_.blueprint.has_value();
    });
    runner_.bind("forward_to_planner", [this](ConditionEnv&) {
        auto& entry = entries_.at(ctx_.request_id);
        entry.state = EntryState::AwaitingPlan;
        forwarded_.push_back(entry.request.id);
        arm_deadline(entry, Phase::Plan);
        auto planner = broker_.find(bus::kPlanner);
        if (!planner) {
            spdlog::error("RqM: no planner registered; request '{}' will time out", entry.request.id);
            return;
        }
        PlanRequest content{entry.request.id, *ctx_.blueprint};
        auto receipt = broker_.send({bus::Performative::Request, id_, *planner, entry.request.id,
                                     bus::ContentKind::Blueprint, nlohmann::json(content).dump()});
        if (!receipt) spdlog::error("RqM: {}", receipt.error);
    });
    runner_.bind("report_no_blueprint", [this](ConditionEnv&) {
        ++no_blueprint_;
        finish(entries_.at(ctx_.request_id),
               RequestOutcome::failure(ctx_.request_id, FailureReason::NoBlueprint, broker_.now()));
    });

    // Feedback from planner and robots manager.
    runner_.bind("match_conversation", [this](ConditionEnv& env) {
        auto it = entries_.find(ctx_.request_id);
        const EntryState expected =
            ctx_.phase == Phase::Plan ? EntryState::AwaitingPlan : EntryState::AwaitingExecution;
        env["pending"] = it != entries_.end() && it->second.state == expected;
    });
    runner_.bind("read_plan_feedback", [this](ConditionEnv& env) {
        const bool ok = ctx_.message->performative == bus::Performative::Agree;
        env["plan_ok"] = ok;
        env["plan_failed"] = !ok;
    });
    runner_.bind("await_execution", [this](ConditionEnv&) {
        auto& entry = entries_.at(ctx_.request_id);
        entry.state = EntryState::AwaitingExecution;
        arm_deadline(entry, Phase::Execution);
    });
    runner_.bind("read_execution_feedback", [this](ConditionEnv& env) {
        const bool ok = ctx_.message->performative == bus::Performative::Inform;
        env["exec_ok"] = ok;
        env["exec_failed"] = !ok;
    });
    runner_.bind("report_success", [this](ConditionEnv&) {
        finish(entries_.at(ctx_.request_id), RequestOutcome::success(ctx_.request_id, broker_.now()));
    });
    runner_.bind("report_failure", [this](ConditionEnv&) {
        const FailureReason reason = ctx_.feedback && ctx_.feedback->reason ? *ctx_.feedback->reason
                                                                            : FailureReason::TaskFailed;
        finish(entries_.at(ctx_.request_id), RequestOutcome::failure(ctx_.request_id, reason, broker_.now()));
    });
    runner_.bind("log_stale_feedback", [this](ConditionEnv&) {
        ++stale_;
        spdlog::info("RqM: stale feedback for '{}' ignored", ctx_.request_id);
    });

    // Deadlines.
    runner_.bind("match_deadline", [this](ConditionEnv& env) {
        auto it = entries_.find(ctx_.request_id);
        const EntryState expected =
            ctx_.phase == Phase::Plan ? EntryState::AwaitingPlan : EntryState::AwaitingExecution;
        env["deadline_live"] = it != entries_.end() && it->second.state == expected &&
                               it->second.deadline == broker_.now();
    });
    runner_.bind("report_timeout", [this](ConditionEnv&) {
        auto& entry = entries_.at(ctx_.request_id);
        entry.deadline_event.reset();
        const FailureReason reason =
            ctx_.phase == Phase::Plan ? FailureReason::PlanTimeout : FailureReason::TaskTimeout;
        spdlog::info("RqM: request '{}' timed out ({})", ctx_.request_id, to_string(reason));
        finish(entry, RequestOutcome::failure(ctx_.request_id, reason, broker_.now()));
    });
    runner_.bind("ignore_deadline", [](ConditionEnv&) {});
}

}  // namespace mrs::rqm
