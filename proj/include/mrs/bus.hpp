#pragma once

// In-process agent runtime: unique agent ids, a service directory and typed
// ACL-style messages delivered through the simulation event queue.

#include "mrs/domain.hpp"
#include "mrs/event_queue.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mrs::bus {

/// Well-known agent names.
inline constexpr std::string_view kRequestor = "Requestor";
inline constexpr std::string_view kRequestsManager = "RqM";
inline constexpr std::string_view kPlanner = "PLN";
inline constexpr std::string_view kRobotsManager = "RbM";

enum class Performative { Request, Agree, Refuse, Inform, Failure };

enum class ContentKind {
    Blueprint,        // PlanRequest
    VerifiedPlan,     // VerifiedPlan
    TaskAssignment,   // TaskAssignment
    Feedback,         // Feedback
    RegistryCommand,  // RegistryCommand
    Submission,       // Request
    Outcome,          // RequestOutcome
};

std::string_view to_string(Performative p);
std::string_view to_string(ContentKind k);
std::optional<Performative> performative_from_string(std::string_view text);
std::optional<ContentKind> content_kind_from_string(std::string_view text);

/// Whether a content kind may travel under a performative.
bool content_allowed(Performative p, ContentKind k);

struct AgentId {
    std::string name;
    std::uint64_t address = 0;

    bool operator==(const AgentId&) const = default;
};

struct AclMessage {
    Performative performative = Performative::Inform;
    AgentId sender;
    AgentId receiver;
    std::string conversation_id;
    ContentKind content_kind = ContentKind::Feedback;
    std::string content;  // serialized JSON payload
};

struct ServiceEntry {
    std::string service_name;
    AgentId provider;
};

class RegistrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DeliveryReceipt {
    bool accepted = false;
    std::uint64_t sequence = 0;
    std::string error;

    explicit operator bool() const { return accepted; }
};

enum class HandlerStyle {
    OneShot,  // handles a single message, then is removed
    Cyclic,   // handles every message
};

class Broker {
public:
    using Handler = std::function<void(const AclMessage&)>;
    using Observer = std::function<void(SimTime, const AclMessage&)>;

    explicit Broker(EventQueue& queue, SimTime latency = SimTime{0});

    AgentId register_agent(std::string name);
    void deregister_agent(const AgentId& agent);
    bool is_registered(const AgentId& agent) const;
    std::optional<AgentId> find(std::string_view name) const;

    void publish_service(const AgentId& provider, std::string service_name);
    void withdraw_service(const AgentId& provider, std::string_view service_name);
    /// Providers ordered by when they published; unknown services yield [].
    std::vector<AgentId> lookup_service(std::string_view service_name) const;

    DeliveryReceipt send(AclMessage message);
    DeliveryReceipt send(AclMessage message, SimTime latency);

    /// Installs the agent's behaviour. Without a handler, messages stay queued
    /// in the mailbox until receive() pulls them.
    void on_message(const AgentId& agent, Handler handler, HandlerStyle style = HandlerStyle::Cyclic);
    /// Called on the sender when a message it sent is dropped at delivery time.
    void on_bounce(const AgentId& agent, Handler handler);
    std::optional<AclMessage> receive(const AgentId& agent);
    std::size_t mailbox_size(const AgentId& agent) const;

    /// Sees every delivered message in delivery order.
    void set_observer(Observer observer) { observer_ = std::move(observer); }
    void set_latency(SimTime latency) { latency_ = latency; }
    SimTime now() const { return queue_.now(); }
    EventQueue& queue() { return queue_; }

    std::uint64_t sent() const { return sent_; }
    std::uint64_t delivered() const { return delivered_; }
    std::uint64_t undeliverable() const { return undeliverable_; }

private:
    struct Agent {
        AgentId id;
        std::deque<AclMessage> mailbox;
        std::vector<std::pair<Handler, HandlerStyle>> handlers;
        Handler bounce;
    };

    void deliver(const AclMessage& message);
    void dispatch(Agent& agent);

    EventQueue& queue_;
    SimTime latency_;
    std::map<std::string, Agent, std::less<>> agents_;
    std::uint64_t next_address_ = 1;
    std::uint64_t publish_seq_ = 0;
    std::map<std::string, std::vector<std::pair<std::uint64_t, AgentId>>, std::less<>> directory_;
    std::map<std::pair<std::string, std::string>, SimTime> last_delivery_;
    Observer observer_;
    std::uint64_t sent_ = 0;
    std::uint64_t delivered_ = 0;
    std::uint64_t undeliverable_ = 0;
};

}  // namespace mrs::bus
