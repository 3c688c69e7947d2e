#pragma once

#include "mrs/workflow.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <map>
#include <string>
#include <string_view>

namespace mrs {

/// Text of the process documents shipped in processes/, compiled in.
std::string_view builtin_process_text(std::string_view name);

/// Parsed and validated controller definitions (rqm, pln, rbm).
struct ControllerProcesses {
    workflow::ProcessDefinition rqm;
    workflow::ProcessDefinition pln;
    workflow::ProcessDefinition rbm;

    /// The shipped definitions. Throws if any fails validation.
    static const ControllerProcesses& builtin();
    /// Loads <dir>/{rqm,pln,rbm}.process. Throws with every parse error.
    static ControllerProcesses load(const std::filesystem::path& dir);
};

/// Runs controller process instances and binds action keys to host callbacks.
class ProcessRunner {
public:
    using Action = std::function<void(workflow::ConditionEnv&)>;

    explicit ProcessRunner(const workflow::ProcessDefinition& definition) : definition_(&definition) {}

    void bind(std::string action_key, Action action);
    /// Runs one instance with `stimulus` set true and the other stimuli false.
    /// Throws std::runtime_error if the instance aborts or hits an unbound action.
    void run(std::string_view stimulus, std::span<const std::string_view> all_stimuli);

    const workflow::ProcessDefinition& definition() const { return *definition_; }
    std::uint64_t instances_run() const { return instances_; }

private:
    const workflow::ProcessDefinition* definition_;
    std::map<std::string, Action, std::less<>> actions_;
    std::uint64_t instances_ = 0;
};

}  // namespace mrs
