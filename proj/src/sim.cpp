#include "mrs/sim.hpp"

#include "mrs/codec.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace mrs::sim {

using nlohmann::json;

std::string outcomes_log(const std::vector<events::RequestFinished>& outcomes)
{
    std::string out;
    for (const auto& f : outcomes) {
        json line = f.outcome;
        line["kind"] = f.kind;
        line["arrival_ms"] = f.arrival_time.count();
        out += line.dump();
        out += '\n';
    }
    return out;
}

namespace {

ScenarioConfig checked(ScenarioConfig config)
{
    auto errors = validate(config);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return config;
}

}  // namespace

Simulation::Simulation(ScenarioConfig config, const ControllerProcesses& processes)
    : config_(checked(std::move(config))), broker_(queue_, config_.latency), kb_(config_.max_robots),
      trace_(trace_text_), arrivals_(config_.seed, Stream::Arrivals), churn_(config_.seed, Stream::Churn)
{
    trace::Header header{config_.seed, config_.duration, config_.sample_interval, {}, to_json(config_)};
    for (const auto& r : config_.robots) header.fleet.push_back({r.id, SimTime{0}});
    trace_.header(header);

    broker_.set_observer([this](SimTime t, const bus::AclMessage& m) { trace_.message(t, m); });
    notifier_.subscribe([this](SimTime t, const events::Event& e) {
        recorder_.on_event(t, e);
        trace_.event(t, e);
        if (const auto* finished = std::get_if<events::RequestFinished>(&e)) outcomes_.push_back(*finished);
    });

    for (const auto& pb : config_.blueprints) kb_.upsert_blueprint(pb);

    requestor_ = broker_.register_agent(std::string(bus::kRequestor));
    broker_.on_message(requestor_, [](const bus::AclMessage& m) {
        spdlog::debug("Requestor: {} {} for {}", bus::to_string(m.performative), bus::to_string(m.content_kind),
                      m.conversation_id);
    });

    rqm_ = std::make_unique<rqm::RequestsManager>(
        broker_, kb_, processes.rqm, notifier_,
        rqm::Config{config_.plan_timeout, config_.exec_timeout, config_.max_in_flight});
    planner_ = std::make_unique<pln::Planner>(broker_, kb_, processes.pln, notifier_);
    rbm_ = std::make_unique<rbm::RobotsManager>(
        broker_, kb_, processes.rbm, notifier_,
        rbm::Config{config_.task_duration, config_.task_jitter, config_.task_timeout,
                    config_.fail_fast_deregistration, config_.faults},
        RandomStream(config_.seed, Stream::Jitter), RandomStream(config_.seed, Stream::Faults));

    for (const auto& r : config_.robots) {
        rbm_->add_robot(r.id, r.capabilities);
        recorder_.add_robot(r.id, SimTime{0});
        if (r.history > 0) {
            kb_.set_history(r.id, r.history);
            notifier_.publish(now(), events::HistoryChanged{r.id, r.history});
        }
    }
    for (const auto& r : config_.robots) {
        if (r.registered) rbm_->handle_registration(r.id, r.capabilities);
    }

    if (config_.request_period > SimTime{0} && config_.request_offset < config_.duration) {
        queue_.schedule(config_.request_offset, EventClass::Timer, [this] { generate_request(); });
    }
    if (config_.churn_period > SimTime{0} && config_.churn_period < config_.duration) {
        queue_.schedule(config_.churn_period, EventClass::Timer, [this] { churn(); });
    }
    schedule_sample(config_.sample_interval);
    if (config_.check_invariants) check_invariants();
}

void Simulation::schedule_sample(SimTime at)
{
    if (at <= config_.duration) queue_.schedule(at, EventClass::Sample, [this] { sample(); });
}

bool Simulation::done() const
{
    auto next = queue_.next_time();
    return finished_ || !next || *next > config_.duration;
}

bool Simulation::step()
{
    if (finished_) throw std::logic_error("simulation already finished");
    if (done()) return false;
    queue_.run_next();
    if (config_.check_invariants) check_invariants();
    return true;
}

void Simulation::run_until(SimTime limit)
{
    if (finished_) throw std::logic_error("simulation already finished");
    limit = std::min(limit, config_.duration);
    while (true) {
        auto next = queue_.next_time();
        if (!next || *next > limit) break;
        step();
    }
    if (limit > now()) queue_.run_until(limit);
}

SimulationOutput Simulation::run()
{
    run_until(config_.duration);
    return finish();
}

SimulationOutput Simulation::finish()
{
    if (finished_) throw std::logic_error("simulation already finished");
    finished_ = true;
    trace_.end(now());
    return SimulationOutput{series_, recorder_.robot_reports(now()), trace_text_.str(), outcomes_, violations_};
}

RequestId Simulation::submit_request(const RequestKind& kind)
{
    const RequestId id = fmt::format("rq-{:04}", next_request_++);
    Request request{id, kind, now()};
    auto rqm_id = broker_.find(bus::kRequestsManager);
    auto receipt = broker_.send({bus::Performative::Request, requestor_, *rqm_id, id, bus::ContentKind::Submission,
                                 json(request).dump()});
    if (!receipt.accepted) throw std::runtime_error("request submission rejected: " + receipt.error);
    return id;
}

void Simulation::register_robot(const RobotId& id, CapabilitySet capabilities)
{
    rbm_->handle_registration(id, std::move(capabilities));
    if (config_.check_invariants) check_invariants();
}

rbm::DeregistrationResult Simulation::deregister_robot(const RobotId& id)
{
    auto result = rbm_->handle_deregistration(id);
    if (config_.check_invariants) check_invariants();
    return result;
}

void Simulation::upsert_blueprint(PlanBlueprint pb)
{
    kb_.upsert_blueprint(std::move(pb));
}

bool Simulation::remove_blueprint(const RequestKind& kind)
{
    return kb_.remove_blueprint(kind);
}

void Simulation::generate_request()
{
    double total = 0;
    for (const auto& [kind, weight] : config_.request_kind_weights) total += weight;
    const double u = arrivals_.uniform01() * total;
    const RequestKind* chosen = nullptr;
    double cumulative = 0;
    for (const auto& [kind, weight] : config_.request_kind_weights) {
        if (weight <= 0) continue;
        chosen = &kind;
        cumulative += weight;
        if (u < cumulative) break;
    }
    submit_request(*chosen);
    const SimTime next = now() + config_.request_period;
    if (next < config_.duration) queue_.schedule(next, EventClass::Timer, [this] { generate_request(); });
}

void Simulation::churn()
{
    // Pools are fixed before either half runs, so one robot never leaves and rejoins in one tick.
    std::vector<RobotId> registered;
    std::vector<RobotId> unregistered;
    for (const auto& [id, robot] : rbm_->robots()) {
        if (robot.state() == Lifecycle::Unregistered) {
            unregistered.push_back(id);
        } else if (!robot.deregistration_pending()) {
            registered.push_back(id);
        }
    }
    if (!registered.empty()) {
        const auto& leaving = registered[churn_.below(registered.size())];
        spdlog::debug("churn: {} leaves", leaving);
        rbm_->handle_deregistration(leaving);
    }
    if (!unregistered.empty()) {
        const auto& joining = unregistered[churn_.below(unregistered.size())];
        try {
            rbm_->handle_registration(joining, rbm_->robot(joining)->capabilities());
            spdlog::debug("churn: {} joins", joining);
        } catch (const kb::KbError& e) {
            spdlog::debug("churn: {} cannot join: {}", joining, e.what());
        }
    }
    const SimTime next = now() + config_.churn_period;
    if (next < config_.duration) queue_.schedule(next, EventClass::Timer, [this] { churn(); });
}

void Simulation::sample()
{
    auto row = recorder_.system_snapshot(now());
    if (config_.check_invariants) {
        for (auto& e : metrics::check_row(row)) violations_.push_back(std::move(e));
    }
    series_.push_back(row);
    for (const auto& listener : sample_listeners_) listener(row);
    schedule_sample(now() + config_.sample_interval);
}

void Simulation::check_invariants()
{
    const SimTime t = now();
    auto violate = [&](std::string message) {
        spdlog::error("invariant violated at {} ms: {}", t.count(), message);
        violations_.push_back(fmt::format("t={}ms {}", t.count(), message));
    };
    if (kb_.registered_count() > kb_.max_robots()) {
        violate(fmt::format("{} robots registered, limit {}", kb_.registered_count(), kb_.max_robots()));
    }
    for (const auto& [id, robot] : rbm_->robots()) {
        const auto times = robot.times(t);
        for (auto& e : metrics::check_times(id, times, robot.created_at(), t)) violate(std::move(e));
        if ((robot.state() == Lifecycle::Controlled) != robot.current_task().has_value()) {
            violate(id + ": Controlled state and current task disagree");
        }
        if (recorder_.robot_times(id, t) != times) violate(id + ": recorder and robot clocks disagree");
        const auto* record = kb_.robot(id);
        if (!record || record->lifecycle != robot.state()) violate(id + ": knowledge base lifecycle is stale");
    }
}

SimulationOutput run(const ScenarioConfig& config)
{
    Simulation simulation(config);
    return simulation.run();
}

}  // namespace mrs::sim
