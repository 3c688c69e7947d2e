#pragma once

// Requests manager: FCFS scheduling of incoming requests, blueprint lookup,
// planner handoff, deadline policing and requestor feedback.

#include "mrs/bus.hpp"
#include "mrs/codec.hpp"
#include "mrs/domain.hpp"
#include "mrs/events.hpp"
#include "mrs/kb.hpp"
#include "mrs/processes.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <optional>
#include <vector>

namespace mrs::rqm {

using namespace std::chrono_literals;

enum class EntryState { Queued, AwaitingPlan, AwaitingExecution, Done };

std::string_view to_string(EntryState state);

struct RequestQueueEntry {
    Request request;
    EntryState state = EntryState::Queued;
    SimTime deadline{0};
    std::optional<EventId> deadline_event;
    std::optional<RequestOutcome> outcome;
};

struct Config {
    SimTime plan_timeout = 30s;
    SimTime exec_timeout = 5min;
    /// Requests handed to the planner but not yet finished. 1 serves the queue
    /// strictly one request at a time.
    std::size_t max_in_flight = 1;
};

enum class Phase { Plan, Execution };

class RequestsManager {
public:
    RequestsManager(bus::Broker& broker, const kb::KnowledgeBase& kb,
                    const workflow::ProcessDefinition& process, const events::Notifier& notifier,
                    Config config = {});

    const bus::AgentId& id() const { return id_; }

    /// Accepts a request into the FCFS queue. False for a duplicate id.
    bool on_request(const Request& request, std::optional<bus::AclMessage> origin = std::nullopt);
    /// Hands queued requests to the planner while capacity allows.
    void dispatch_next();
    void on_planner_feedback(const bus::AclMessage& message);
    void on_execution_feedback(const bus::AclMessage& message);
    void on_timeout(const RequestId& request_id, Phase phase);

    std::size_t queue_length() const { return queue_.size(); }
    std::size_t in_flight() const;
    const RequestQueueEntry* entry(const RequestId& id) const;
    const std::map<RequestId, RequestQueueEntry>& entries() const { return entries_; }
    /// Request ids in the order they were handed to the planner.
    const std::vector<RequestId>& forwarded() const { return forwarded_; }

    std::uint64_t received() const { return received_; }
    std::uint64_t duplicates() const { return duplicates_; }
    std::uint64_t succeeded() const { return succeeded_; }
    std::uint64_t failed() const { return failed_; }
    std::uint64_t rejected_no_blueprint() const { return no_blueprint_; }
    std::uint64_t stale_feedback() const { return stale_; }
    std::uint64_t processed() const { return succeeded_ + failed_; }
    std::uint64_t unprocessed() const { return received_ - processed(); }

private:
    struct Context {
        std::optional<Request> incoming;
        std::optional<bus::AclMessage> message;
        std::optional<Feedback> feedback;
        RequestId request_id;
        std::optional<PlanBlueprint> blueprint;
        Phase phase = Phase::Plan;
    };

    void handle(const bus::AclMessage& message);
    void bind_actions();
    void run(std::string_view stimulus);
    void arm_deadline(RequestQueueEntry& entry, Phase phase);
    void finish(RequestQueueEntry& entry, RequestOutcome outcome);

    bus::Broker& broker_;
    const kb::KnowledgeBase& kb_;
    const events::Notifier& notifier_;
    Config config_;
    ProcessRunner runner_;
    bus::AgentId id_;

    std::deque<RequestId> queue_;
    std::map<RequestId, RequestQueueEntry> entries_;
    std::vector<RequestId> forwarded_;
    Context ctx_;
    bool dispatched_ = false;
    bool accepted_ = false;

    std::uint64_t received_ = 0;
    std::uint64_t duplicates_ = 0;
    std::uint64_t succeeded_ = 0;
    std::uint64_t failed_ = 0;
    std::uint64_t no_blueprint_ = 0;
    std::uint64_t stale_ = 0;
};

}  // namespace mrs::rqm
