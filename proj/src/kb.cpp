#include "mrs/kb.hpp"

namespace mrs::kb {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidBlueprint: return "invalid-blueprint";
    case ErrorCode::CapacityExceeded: return "capacity-exceeded";
    case ErrorCode::AlreadyRegistered: return "already-registered";
    case ErrorCode::UnknownRobot: return "unknown-robot";
    case ErrorCode::NotRegistered: return "not-registered";
    case ErrorCode::RobotBusy: return "robot-busy";
    }
    return "?";
}

KnowledgeBase::KnowledgeBase(std::size_t max_robots) : max_robots_(max_robots)
{
    if (max_robots_ == 0) throw std::invalid_argument("max_robots must be positive");
}

std::optional<PlanBlueprint> KnowledgeBase::find_blueprint(const RequestKind& kind) const
{
    auto it = blueprints_.find(kind);
    if (it == blueprints_.end()) return std::nullopt;
    return it->second;
}

void KnowledgeBase::upsert_blueprint(PlanBlueprint pb)
{
    auto violations = validate_blueprint(pb);
    if (!violations.empty()) {
        std::string message = "invalid blueprint '" + pb.id + "':";
        for (const auto& v : violations) message += " " + v + ";";
        throw KbError(ErrorCode::InvalidBlueprint, message);
    }
    auto kind = pb.request_kind;
    blueprints_.insert_or_assign(std::move(kind), std::move(pb));
}

bool KnowledgeBase::remove_blueprint(const RequestKind& kind)
{
    return blueprints_.erase(kind) > 0;
}

std::vector<PlanBlueprint> KnowledgeBase::blueprints() const
{
    std::vector<PlanBlueprint> out;
    out.reserve(blueprints_.size());
    for (const auto& [kind, pb] : blueprints_) out.push_back(pb);
    return out;
}

void KnowledgeBase::add_robot(const RobotId& id, CapabilitySet capabilities)
{
    if (id.empty()) throw KbError(ErrorCode::UnknownRobot, "robot id must not be empty");
    robots_.try_emplace(id, RobotRecord{id, std::move(capabilities), Lifecycle::Unregistered, 0, {}});
}

void KnowledgeBase::register_robot(const RobotId& id, CapabilitySet capabilities)
{
    if (id.empty()) throw KbError(ErrorCode::UnknownRobot, "robot id must not be empty");
    auto it = robots_.find(id);
    if (it != robots_.end() && it->second.registered()) {
        throw KbError(ErrorCode::AlreadyRegistered, "robot '" + id + "' is already registered");
    }
    if (registered_count() >= max_robots_) {
        throw KbError(ErrorCode::CapacityExceeded,
                      "cannot register '" + id + "': fleet is at its limit of " +
                          std::to_string(max_robots_) + " robots");
    }
    if (it == robots_.end()) it = robots_.emplace(id, RobotRecord{id, {}, {}, 0, {}}).first;
    it->second.capabilities = std::move(capabilities);
    it->second.lifecycle = Lifecycle::Uncontrolled;
}

void KnowledgeBase::deregister_robot(const RobotId& id)
{
    auto it = robots_.find(id);
    if (it == robots_.end()) throw KbError(ErrorCode::UnknownRobot, "unknown robot '" + id + "'");
    auto& record = it->second;
    if (!record.registered()) {
        throw KbError(ErrorCode::NotRegistered, "robot '" + id + "' is not registered");
    }
    if (record.lifecycle == Lifecycle::Controlled) {
        throw KbError(ErrorCode::RobotBusy, "robot '" + id + "' is executing a task");
    }
    record.lifecycle = Lifecycle::Unregistered;
}

void KnowledgeBase::set_lifecycle(const RobotId& id, Lifecycle state)
{
    auto& record = require(id);
    if (!record.registered() || state == Lifecycle::Unregistered) {
        throw KbError(ErrorCode::NotRegistered,
                      "robot '" + id + "' lifecycle changes go through register/deregister");
    }
    record.lifecycle = state;
}

void KnowledgeBase::set_times(const RobotId& id, const RobotTimes& times)
{
    require(id).times = times;
}

std::vector<RobotId> KnowledgeBase::capable_robots(const Task& task) const
{
    std::vector<RobotId> out;
    for (const auto& [id, record] : robots_) {
        if (record.registered() && robot_can_perform(record.capabilities, task)) out.push_back(id);
    }
    return out;
}

std::uint64_t KnowledgeBase::increment_history(const RobotId& id)
{
    return ++require(id).tasks_completed;
}

void KnowledgeBase::set_history(const RobotId& id, std::uint64_t tasks_completed)
{
    require(id).tasks_completed = tasks_completed;
}

const RobotRecord* KnowledgeBase::robot(const RobotId& id) const
{
    auto it = robots_.find(id);
    return it == robots_.end() ? nullptr : &it->second;
}

std::vector<RobotId> KnowledgeBase::registered_robots() const
{
    std::vector<RobotId> out;
    for (const auto& [id, record] : robots_) {
        if (record.registered()) out.push_back(id);
    }
    return out;
}

std::size_t KnowledgeBase::registered_count() const
{
    std::size_t n = 0;
    for (const auto& [id, record] : robots_) n += record.registered() ? 1 : 0;
    return n;
}

RobotRecord& KnowledgeBase::require(const RobotId& id)
{
    auto it = robots_.find(id);
    if (it == robots_.end()) throw KbError(ErrorCode::UnknownRobot, "unknown robot '" + id + "'");
    return it->second;
}

}  // namespace mrs::kb
