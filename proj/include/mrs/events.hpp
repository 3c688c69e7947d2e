#pragma once

// Observable happenings inside a run. Controllers publish them; the metrics
// recorder, trace writer and service event stream subscribe.

#include "mrs/domain.hpp"

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace mrs::events {

struct RequestArrived {
    Request request;
};

struct RequestFinished {
    RequestOutcome outcome;
    RequestKind kind;
    SimTime arrival_time{0};
};

struct PlanCreated {
    VerifiedPlan plan;
};

struct PlanFailed {
    RequestId request_id;
    FailureReason reason = FailureReason::TaskFailed;
    std::optional<TaskId> task_id;
};

struct TaskAssigned {
    RequestId request_id;
    TaskId task_id;
    RobotId robot_id;
};

struct TaskCompleted {
    RequestId request_id;
    TaskId task_id;
    RobotId robot_id;
    bool success = false;
    std::optional<FailureReason> reason;
};

struct RobotStateChanged {
    RobotId robot_id;
    Lifecycle from = Lifecycle::Unregistered;
    Lifecycle to = Lifecycle::Unregistered;
    CapabilitySet capabilities;
    /// Deregistration requested while busy; applied when the task ends.
    bool deregistration_deferred = false;
};

struct HistoryChanged {
    RobotId robot_id;
    std::uint64_t tasks_completed = 0;
};

using Event = std::variant<RequestArrived, RequestFinished, PlanCreated, PlanFailed, TaskAssigned,
                           TaskCompleted, RobotStateChanged, HistoryChanged>;

const char* kind_name(const Event& event);

using Sink = std::function<void(SimTime, const Event&)>;

/// Fan-out to every subscribed sink, in subscription order.
class Notifier {
public:
    void subscribe(Sink sink) { sinks_.push_back(std::move(sink)); }
    void publish(SimTime t, const Event& event) const
    {
        for (const auto& sink : sinks_) sink(t, event);
    }

private:
    std::vector<Sink> sinks_;
};

}  // namespace mrs::events
