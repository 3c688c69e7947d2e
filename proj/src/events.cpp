#include "mrs/events.hpp"

namespace mrs::events {

namespace {

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

}  // namespace

const char* kind_name(const Event& event)
{
    return std::visit(overloaded{
                          [](const RequestArrived&) { return "RequestArrived"; },
                          [](const RequestFinished&) { return "RequestFinished"; },
                          [](const PlanCreated&) { return "PlanCreated"; },
                          [](const PlanFailed&) { return "PlanFailed"; },
                          [](const TaskAssigned&) { return "TaskAssigned"; },
                          [](const TaskCompleted&) { return "TaskCompleted"; },
                          [](const RobotStateChanged&) { return "RobotStateChanged"; },
                          [](const HistoryChanged&) { return "HistoryChanged"; },
                      },
                      event);
}

}  // namespace mrs::events
