#pragma once

#include "mrs/domain.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrs::kb {

enum class ErrorCode {
    InvalidBlueprint,
    CapacityExceeded,
    AlreadyRegistered,
    UnknownRobot,
    NotRegistered,
    RobotBusy,
};

std::string_view to_string(ErrorCode code);

class KbError : public std::runtime_error {
public:
    KbError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct RobotRecord {
    RobotId id;
    CapabilitySet capabilities;
    Lifecycle lifecycle = Lifecycle::Unregistered;
    std::uint64_t tasks_completed = 0;
    /// Mirror of the robot manager's accumulators, refreshed on state changes.
    RobotTimes times;

    bool registered() const { return lifecycle != Lifecycle::Unregistered; }
};

/// Blueprint store plus robot registry. Robots keep their record (and task
/// history) while unregistered.
class KnowledgeBase {
public:
    static constexpr std::size_t kDefaultMaxRobots = 3;

    explicit KnowledgeBase(std::size_t max_robots = kDefaultMaxRobots);

    std::optional<PlanBlueprint> find_blueprint(const RequestKind& kind) const;
    /// Throws KbError(InvalidBlueprint) listing every violation.
    void upsert_blueprint(PlanBlueprint pb);
    /// False when no blueprint serves the kind (nothing changes).
    bool remove_blueprint(const RequestKind& kind);
    std::vector<PlanBlueprint> blueprints() const;

    /// Creates an unregistered record if the robot is unknown.
    void add_robot(const RobotId& id, CapabilitySet capabilities);
    void register_robot(const RobotId& id, CapabilitySet capabilities);
    void deregister_robot(const RobotId& id);
    void set_lifecycle(const RobotId& id, Lifecycle state);
    void set_times(const RobotId& id, const RobotTimes& times);

    /// Registered robots able to perform the task, ordered by robot id.
    std::vector<RobotId> capable_robots(const Task& task) const;
    std::uint64_t increment_history(const RobotId& id);
    /// Seeds a robot's completed-task counter (scenario setup only).
    void set_history(const RobotId& id, std::uint64_t tasks_completed);

    const RobotRecord* robot(const RobotId& id) const;
    const std::map<RobotId, RobotRecord>& robots() const { return robots_; }
    std::vector<RobotId> registered_robots() const;
    std::size_t registered_count() const;
    std::size_t max_robots() const { return max_robots_; }

private:
    RobotRecord& require(const RobotId& id);

    std::size_t max_robots_;
    std::map<RequestKind, PlanBlueprint> blueprints_;
    std::map<RobotId, RobotRecord> robots_;
};

}  // namespace mrs::kb
