#include "mrs/bus.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace mrs::bus {

namespace {

constexpr std::array kPerformatives{
    std::pair{Performative::Request, std::string_view{"Request"}},
    std::pair{Performative::Agree, std::string_view{"Agree"}},
    std::pair{Performative::Refuse, std::string_view{"Refuse"}},
    std::pair{Performative::Inform, std::string_view{"Inform"}},
    std::pair{Performative::Failure, std::string_view{"Failure"}},
};

constexpr std::array kContentKinds{
    std::pair{ContentKind::Blueprint, std::string_view{"blueprint"}},
    std::pair{ContentKind::VerifiedPlan, std::string_view{"verified-plan"}},
    std::pair{ContentKind::TaskAssignment, std::string_view{"task-assignment"}},
    std::pair{ContentKind::Feedback, std::string_view{"feedback"}},
    std::pair{ContentKind::RegistryCommand, std::string_view{"registry-command"}},
    std::pair{ContentKind::Submission, std::string_view{"submission"}},
    std::pair{ContentKind::Outcome, std::string_view{"outcome"}},
};

}  // namespace

std::string_view to_string(Performative p)
{
    for (const auto& [value, name] : kPerformatives) {
        if (value == p) return name;
    }
    return "?";
}

std::string_view to_string(ContentKind k)
{
    for (const auto& [value, name] : kContentKinds) {
        if (value == k) return name;
    }
    return "?";
}

std::optional<Performative> performative_from_string(std::string_view text)
{
    for (const auto& [value, name] : kPerformatives) {
        if (name == text) return value;
    }
    return std::nullopt;
}

std::optional<ContentKind> content_kind_from_string(std::string_view text)
{
    for (const auto& [value, name] : kContentKinds) {
        if (name == text) return value;
    }
    return std::nullopt;
}

bool content_allowed(Performative p, ContentKind k)
{
    switch (p) {
    case Performative::Request:
        return k == ContentKind::Blueprint || k == ContentKind::VerifiedPlan ||
               k == ContentKind::TaskAssignment || k == ContentKind::RegistryCommand ||
               k == ContentKind::Submission;
    case Performative::Agree:
    case Performative::Refuse:
        return k == ContentKind::Feedback || k == ContentKind::RegistryCommand;
    case Performative::Inform:
    case Performative::Failure:
        return k == ContentKind::Feedback || k == ContentKind::Outcome;
    }
    return false;
}

Broker::Broker(EventQueue& queue, SimTime latency) : queue_(queue), latency_(latency) {}

AgentId Broker::register_agent(std::string name)
{
    if (name.empty()) throw RegistrationError("agent name must not be empty");
    if (agents_.count(name)) throw RegistrationError("agent name '" + name + "' is already in use");
    AgentId id{name, next_address_++};
    agents_.emplace(std::move(name), Agent{id, {}, {}, {}});
    return id;
}

void Broker::deregister_agent(const AgentId& agent)
{
    auto it = agents_.find(agent.name);
    if (it == agents_.end() || it->second.id != agent) {
        throw RegistrationError("agent '" + agent.name + "' is not registered");
    }
    agents_.erase(it);
    for (auto& [service, providers] : directory_) {
        std::erase_if(providers, [&](const auto& entry) { return entry.second == agent; });
    }
    std::erase_if(directory_, [](const auto& entry) { return entry.second.empty(); });
}

bool Broker::is_registered(const AgentId& agent) const
{
    auto it = agents_.find(agent.name);
    return it != agents_.end() && it->second.id == agent;
}

std::optional<AgentId> Broker::find(std::string_view name) const
{
    auto it = agents_.find(name);
    if (it == agents_.end()) return std::nullopt;
    return it->second.id;
}

void Broker::publish_service(const AgentId& provider, std::string service_name)
{
    if (!is_registered(provider)) {
        throw RegistrationError("agent '" + provider.name + "' is not registered");
    }
    auto& providers = directory_[std::move(service_name)];
    const bool present = std::any_of(providers.begin(), providers.end(),
                                     [&](const auto& entry) { return entry.second == provider; });
    if (!present) providers.emplace_back(publish_seq_++, provider);
}

void Broker::withdraw_service(const AgentId& provider, std::string_view service_name)
{
    auto it = directory_.find(service_name);
    if (it == directory_.end()) return;
    std::erase_if(it->second, [&](const auto& entry) { return entry.second == provider; });
    if (it->second.empty()) directory_.erase(it);
}

std::vector<AgentId> Broker::lookup_service(std::string_view service_name) const
{
    std::vector<AgentId> result;
    auto it = directory_.find(service_name);
    if (it == directory_.end()) return result;
    for (const auto& [seq, provider] : it->second) result.push_back(provider);
    return result;
}

DeliveryReceipt Broker::send(AclMessage message)
{
    return send(std::move(message), latency_);
}

DeliveryReceipt Broker::send(AclMessage message, SimTime latency)
{
    DeliveryReceipt receipt;
    if (message.conversation_id.empty()) {
        receipt.error = "conversation id must not be empty";
        return receipt;
    }
    if (!content_allowed(message.performative, message.content_kind)) {
        receipt.error = std::string("content '") + std::string(to_string(message.content_kind)) +
                        "' is not allowed under " + std::string(to_string(message.performative));
        return receipt;
    }
    if (!is_registered(message.sender)) {
        receipt.error = "sender '" + message.sender.name + "' is not registered";
        return receipt;
    }
    if (!is_registered(message.receiver)) {
        ++undeliverable_;
        receipt.error = "receiver '" + message.receiver.name + "' is not registered";
        return receipt;
    }

    // Per-pair FIFO: never deliver before an earlier message of the same pair.
    auto& last = last_delivery_[{message.sender.name, message.receiver.name}];
    const SimTime at = std::max(queue_.now() + latency, last);
    last = at;

    receipt.accepted = true;
    receipt.sequence = sent_++;
    queue_.schedule(at, EventClass::Message,
                    [this, message = std::move(message)] { deliver(message); });
    return receipt;
}

void Broker::deliver(const AclMessage& message)
{
    auto it = agents_.find(message.receiver.name);
    if (it == agents_.end() || it->second.id != message.receiver) {
        ++undeliverable_;
        auto sender = agents_.find(message.sender.name);
        if (sender != agents_.end() && sender->second.id == message.sender && sender->second.bounce) {
            sender->second.bounce(message);
        }
        return;
    }
    ++delivered_;
    if (observer_) observer_(queue_.now(), message);
    it->second.mailbox.push_back(message);
    dispatch(it->second);
}

void Broker::dispatch(Agent& agent)
{
    const std::string name = agent.id.name;
    while (true) {
        auto it = agents_.find(name);
        if (it == agents_.end()) return;
        Agent& current = it->second;
        if (current.mailbox.empty() || current.handlers.empty()) return;
        AclMessage message = std::move(current.mailbox.front());
        current.mailbox.pop_front();
        // Handlers may re-enter the broker; copy before invoking.
        auto handlers = current.handlers;
        std::erase_if(current.handlers,
                      [](const auto& h) { return h.second == HandlerStyle::OneShot; });
        for (const auto& [handler, style] : handlers) handler(message);
    }
}

void Broker::on_message(const AgentId& agent, Handler handler, HandlerStyle style)
{
    auto it = agents_.find(agent.name);
    if (it == agents_.end() || it->second.id != agent) {
        throw RegistrationError("agent '" + agent.name + "' is not registered");
    }
    it->second.handlers.emplace_back(std::move(handler), style);
    dispatch(it->second);
}

void Broker::on_bounce(const AgentId& agent, Handler handler)
{
    auto it = agents_.find(agent.name);
    if (it == agents_.end() || it->second.id != agent) {
        throw RegistrationError("agent '" + agent.name + "' is not registered");
    }
    it->second.bounce = std::move(handler);
}

std::optional<AclMessage> Broker::receive(const AgentId& agent)
{
    auto it = agents_.find(agent.name);
    if (it == agents_.end() || it->second.mailbox.empty()) return std::nullopt;
    AclMessage message = std::move(it->second.mailbox.front());
    it->second.mailbox.pop_front();
    return message;
}

std::size_t Broker::mailbox_size(const AgentId& agent) const
{
    auto it = agents_.find(agent.name);
    return it == agents_.end() ? 0 : it->second.mailbox.size();
}

}  // namespace mrs::bus
