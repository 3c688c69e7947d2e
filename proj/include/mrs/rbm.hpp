#pragma once

// Robots manager and the simulated robots it controls: robot lifecycle and
// time accounting, sequential dispatch of verified plans, task deadlines and
// plan-level feedback to the requests manager.

#include "mrs/bus.hpp"
#include "mrs/codec.hpp"
#include "mrs/domain.hpp"
#include "mrs/events.hpp"
#include "mrs/kb.hpp"
#include "mrs/processes.hpp"
#include "mrs/rng.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace mrs::rbm {

using namespace std::chrono_literals;

struct FaultProfile {
    /// Robot never answers the assignment.
    double stall_probability = 0.0;
    /// Robot answers with a failure when the task would have finished.
    double fail_probability = 0.0;
};

struct Config {
    SimTime task_duration = 20s;
    /// Uniform jitter in [-task_jitter, +task_jitter] around task_duration.
    SimTime task_jitter = 0s;
    SimTime task_timeout = 60s;
    /// Deregistering a busy robot abandons its task instead of waiting for it.
    bool fail_fast_deregistration = false;
    std::map<RobotId, FaultProfile> faults;
};

/// A simulated robot and its lifecycle clock.
class RobotAgent {
public:
    RobotAgent(RobotId id, CapabilitySet capabilities, SimTime created_at);

    const RobotId& id() const { return id_; }
    const CapabilitySet& capabilities() const { return capabilities_; }
    Lifecycle state() const { return state_; }
    SimTime created_at() const { return created_at_; }
    bool deregistration_pending() const { return deregistration_pending_; }
    const std::optional<TaskAssignment>& current_task() const { return current_task_; }

    /// Accumulated times including the still-open interval up to `now`.
    RobotTimes times(SimTime now) const;

private:
    friend class RobotsManager;

    void transition(Lifecycle to, SimTime now);

    RobotId id_;
    CapabilitySet capabilities_;
    Lifecycle state_ = Lifecycle::Unregistered;
    SimTime created_at_;
    SimTime since_;
    RobotTimes closed_;
    std::optional<TaskAssignment> current_task_;
    std::optional<EventId> completion_event_;
    std::optional<bus::AgentId> bus_id_;
    bool deregistration_pending_ = false;
};

struct PlanExecution {
    VerifiedPlan plan;
    std::vector<Task> tasks;
    std::size_t cursor = 0;
    bool task_in_flight = false;
    SimTime deadline{0};
    std::optional<EventId> deadline_event;
    bus::AgentId reply_to;
};

enum class DeregistrationResult { Immediate, Deferred };

class RobotsManager {
public:
    RobotsManager(bus::Broker& broker, kb::KnowledgeBase& kb, const workflow::ProcessDefinition& process,
                  const events::Notifier& notifier, Config config, RandomStream jitter, RandomStream faults);

    const bus::AgentId& id() const { return id_; }

    /// Adds a robot to the fleet in the Unregistered state.
    void add_robot(const RobotId& id, CapabilitySet capabilities);

    /// Registers an unregistered robot, recording the given capability set. Errors from the
    /// knowledge base propagate as kb::KbError.
    void handle_registration(const RobotId& id, CapabilitySet capabilities);
    DeregistrationResult handle_deregistration(const RobotId& id);

    void on_verified_plan(const PlanDispatch& dispatch, const bus::AgentId& reply_to);
    void on_task_feedback(const bus::AclMessage& message);
    void on_task_timeout(const RequestId& request_id, const TaskId& task_id);

    const RobotAgent* robot(const RobotId& id) const;
    const std::map<RobotId, RobotAgent>& robots() const { return robots_; }
    const std::map<RequestId, PlanExecution>& executions() const { return executions_; }

    std::uint64_t plans_succeeded() const { return plans_succeeded_; }
    std::uint64_t plans_failed() const { return plans_failed_; }

private:
    struct Context {
        RequestId request_id;
        std::optional<bus::AclMessage> message;
        std::optional<Feedback> feedback;
        std::optional<TaskId> expected_task;
        FailureReason failure = FailureReason::TaskFailed;
        std::string detail;
    };

    void bind_actions();
    void run(std::string_view stimulus);
    void drain_resumptions();

    void robot_receive(RobotAgent& robot, const bus::AclMessage& message);
    void robot_finish(const RobotId& robot_id, bool success);
    void handle(const bus::AclMessage& message);

    void set_state(RobotAgent& robot, Lifecycle to);
    void release(RobotAgent& robot);
    void unregister(RobotAgent& robot);
    RobotAgent& require(const RobotId& id);

    bus::Broker& broker_;
    kb::KnowledgeBase& kb_;
    const events::Notifier& notifier_;
    Config config_;
    RandomStream jitter_;
    RandomStream faults_;
    ProcessRunner runner_;
    bus::AgentId id_;

    std::map<RobotId, RobotAgent> robots_;
    std::map<RequestId, PlanExecution> executions_;
    /// Plans whose next task waits for a busy robot, FIFO per robot.
    std::map<RobotId, std::deque<RequestId>> waiting_;
    std::deque<RequestId> resume_;
    Context ctx_;
    bool running_ = false;

    std::uint64_t plans_succeeded_ = 0;
    std::uint64_t plans_failed_ = 0;
};

}  // namespace mrs::rbm
