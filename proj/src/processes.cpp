#include "mrs/processes.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mrs {

namespace {

workflow::ProcessDefinition parse_or_throw(std::string_view text, const std::string& origin)
{
    auto parsed = workflow::parse_process(text);
    if (!parsed.ok()) {
        std::string message = "invalid process definition " + origin + ":";
        for (const auto& error : parsed.errors) message += "\n  " + error;
        throw std::runtime_error(message);
    }
    return std::move(*parsed.definition);
}

}  // namespace

const ControllerProcesses& ControllerProcesses::builtin()
{
    static const ControllerProcesses processes{
        parse_or_throw(builtin_process_text("rqm"), "rqm.process"),
        parse_or_throw(builtin_process_text("pln"), "pln.process"),
        parse_or_throw(builtin_process_text("rbm"), "rbm.process"),
    };
    return processes;
}

ControllerProcesses ControllerProcesses::load(const std::filesystem::path& dir)
{
    auto read = [&](const char* name) {
        const auto path = dir / (std::string(name) + ".process");
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path.string());
        std::ostringstream text;
        text << in.rdbuf();
        return parse_or_throw(text.str(), path.string());
    };
    return ControllerProcesses{read("rqm"), read("pln"), read("rbm")};
}

void ProcessRunner::bind(std::string action_key, Action action)
{
    actions_.insert_or_assign(std::move(action_key), std::move(action));
}

void ProcessRunner::run(std::string_view stimulus, std::span<const std::string_view> all_stimuli)
{
    workflow::ConditionEnv env;
    for (auto s : all_stimuli) env.emplace(std::string(s), s == stimulus);
    ++instances_;
    auto instance = workflow::run_to_completion(
        *definition_, std::move(env), [&](const std::string& key, workflow::ConditionEnv& bound) {
            auto it = actions_.find(key);
            if (it == actions_.end()) {
                throw std::runtime_error("process '" + definition_->id + "': action '" + key +
                                         "' is not bound");
            }
            it->second(bound);
        });
    if (instance.status != workflow::InstanceStatus::Completed) {
        throw std::runtime_error("process '" + definition_->id + "' aborted: " + instance.diagnostic);
    }
}

}  // namespace mrs
