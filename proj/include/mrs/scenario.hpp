#pragma once

// Scenario configuration: fleet, blueprints, request mix, timing and faults.

#include "mrs/domain.hpp"
#include "mrs/rbm.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrs::sim {

using namespace std::chrono_literals;

struct RobotSpec {
    RobotId id;
    CapabilitySet capabilities;
    /// Registered at time 0.
    bool registered = false;
    /// Completed-task count the robot starts with.
    std::uint64_t history = 0;
    bool operator==(const RobotSpec&) const = default;
};

struct ScenarioConfig {
    SimTime duration = 30min;
    /// 0 disables generated requests (interactive sessions).
    SimTime request_period = 60s;
    /// Time of the first request.
    SimTime request_offset = 0s;
    /// 0 disables churn. The first churn tick is at one period.
    SimTime churn_period = 60s;
    SimTime sample_interval = 60s;
    std::vector<RobotSpec> robots;
    std::vector<PlanBlueprint> blueprints;
    std::map<RequestKind, double> request_kind_weights;
    std::uint64_t seed = 1;
    SimTime plan_timeout = 30s;
    SimTime exec_timeout = 5min;
    SimTime task_timeout = 60s;
    SimTime task_duration = 20s;
    SimTime task_jitter = 0s;
    std::size_t max_robots = 3;
    std::map<RobotId, rbm::FaultProfile> faults;
    bool fail_fast_deregistration = false;
    std::size_t max_in_flight = 1;
    SimTime latency = 0s;
    bool check_invariants = true;
};

/// Fleet, blueprints and request mix used by the bundled default scenario.
ScenarioConfig default_scenario();

/// Every violated constraint; empty when the configuration is usable.
std::vector<std::string> validate(const ScenarioConfig& config);

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Parses and validates. Throws ConfigError listing every problem found.
ScenarioConfig parse_scenario(const nlohmann::json& document);
ScenarioConfig parse_scenario_text(std::string_view text);
/// Throws std::system_error when the file cannot be read, ConfigError otherwise.
ScenarioConfig load_scenario(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioConfig& config);

}  // namespace mrs::sim
