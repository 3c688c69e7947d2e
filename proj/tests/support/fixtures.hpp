#pragma once

#include "mrs/sim.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fixtures {

using namespace std::chrono_literals;

inline mrs::PlanBlueprint pb2()
{
    return {"Pb2", "Rq2", {{"T1", {"C1", "C3", "C4"}}, {"T2", {"C2"}}, {"T3", {"C2", "C5"}}}};
}

/// Worked-example fleet, nothing registered, no generated traffic or churn.
inline mrs::sim::ScenarioConfig quiet()
{
    auto c = mrs::sim::default_scenario();
    c.duration = 60min;
    c.request_period = 0s;
    c.churn_period = 0s;
    c.request_kind_weights.clear();
    c.robots = {{"R1", {"C1", "C2", "C3", "C4"}, false, 9},
                {"R2", {"C2", "C4"}, false, 0},
                {"R3", {"C2", "C5"}, false, 11}};
    c.blueprints = {pb2()};
    return c;
}

struct Recorded {
    mrs::SimTime t;
    mrs::events::Event event;
};

/// Collects every published event.
struct Log {
    std::vector<Recorded> items;

    void attach(mrs::sim::Simulation& s)
    {
        s.subscribe([this](mrs::SimTime t, const mrs::events::Event& e) { items.push_back({t, e}); });
    }

    template <class T>
    std::vector<std::pair<mrs::SimTime, T>> of() const
    {
        std::vector<std::pair<mrs::SimTime, T>> out;
        for (const auto& r : items) {
            if (const auto* e = std::get_if<T>(&r.event)) out.push_back({r.t, *e});
        }
        return out;
    }
};

inline std::vector<std::pair<std::string, std::string>> assignments(const Log& log)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [t, a] : log.of<mrs::events::TaskAssigned>()) out.push_back({a.task_id, a.robot_id});
    return out;
}

}  // namespace fixtures
