#pragma once

// Seeded discrete-event run of the whole system: request generation, robot
// churn, controllers on the bus, metric sampling, trace and invariant checks.

#include "mrs/bus.hpp"
#include "mrs/event_queue.hpp"
#include "mrs/events.hpp"
#include "mrs/kb.hpp"
#include "mrs/metrics.hpp"
#include "mrs/pln.hpp"
#include "mrs/processes.hpp"
#include "mrs/rbm.hpp"
#include "mrs/rng.hpp"
#include "mrs/rqm.hpp"
#include "mrs/scenario.hpp"
#include "mrs/trace.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mrs::sim {

struct SimulationOutput {
    std::vector<metrics::SystemSeriesRow> series;
    std::vector<metrics::RobotReport> robots;
    std::string trace;
    std::vector<events::RequestFinished> outcomes;
    std::vector<std::string> violations;
};

/// One JSON object per finished request.
std::string outcomes_log(const std::vector<events::RequestFinished>& outcomes);

class Simulation {
public:
    using SampleListener = std::function<void(const metrics::SystemSeriesRow&)>;

    /// Throws ConfigError when the configuration is invalid; nothing runs then.
    explicit Simulation(ScenarioConfig config,
                        const ControllerProcesses& processes = ControllerProcesses::builtin());
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Runs the next event if it is due no later than the configured duration.
    bool step();
    /// Runs every event up to `limit` (capped at the duration), then advances the clock.
    void run_until(SimTime limit);
    SimulationOutput run();
    /// Closes the trace and collects outputs. Further stepping is an error.
    SimulationOutput finish();

    SimTime now() const { return queue_.now(); }
    SimTime duration() const { return config_.duration; }
    bool done() const;
    std::optional<SimTime> next_event_time() const { return queue_.next_time(); }

    // Commands applied at the current logical time.
    RequestId submit_request(const RequestKind& kind);
    void register_robot(const RobotId& id, CapabilitySet capabilities);
    rbm::DeregistrationResult deregister_robot(const RobotId& id);
    void upsert_blueprint(PlanBlueprint pb);
    bool remove_blueprint(const RequestKind& kind);

    void subscribe(events::Sink sink) { notifier_.subscribe(std::move(sink)); }
    void on_sample(SampleListener listener) { sample_listeners_.push_back(std::move(listener)); }

    const ScenarioConfig& config() const { return config_; }
    const kb::KnowledgeBase& kb() const { return kb_; }
    const bus::Broker& broker() const { return broker_; }
    const rqm::RequestsManager& rqm() const { return *rqm_; }
    const pln::Planner& planner() const { return *planner_; }
    const rbm::RobotsManager& rbm() const { return *rbm_; }
    const metrics::Recorder& recorder() const { return recorder_; }
    const std::vector<metrics::SystemSeriesRow>& series() const { return series_; }
    const std::vector<events::RequestFinished>& outcomes() const { return outcomes_; }
    const std::vector<std::string>& violations() const { return violations_; }

private:
    void generate_request();
    void churn();
    void sample();
    void check_invariants();
    void schedule_sample(SimTime at);

    ScenarioConfig config_;
    EventQueue queue_;
    bus::Broker broker_;
    kb::KnowledgeBase kb_;
    events::Notifier notifier_;
    metrics::Recorder recorder_;
    std::ostringstream trace_text_;
    trace::TraceWriter trace_;
    RandomStream arrivals_;
    RandomStream churn_;
    std::unique_ptr<rqm::RequestsManager> rqm_;
    std::unique_ptr<pln::Planner> planner_;
    std::unique_ptr<rbm::RobotsManager> rbm_;
    bus::AgentId requestor_;

    std::vector<metrics::SystemSeriesRow> series_;
    std::vector<events::RequestFinished> outcomes_;
    std::vector<std::string> violations_;
    std::vector<SampleListener> sample_listeners_;
    std::uint64_t next_request_ = 1;
    bool finished_ = false;
};

/// Validates, runs to the configured duration and returns every output.
SimulationOutput run(const ScenarioConfig& config);

}  // namespace mrs::sim
