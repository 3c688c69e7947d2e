#include "mrs/service.hpp"

#include "mrs/codec.hpp"
#include "mrs/kb.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>

namespace mrs::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

json optional_json(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

Reply error(int status, std::string_view code, const std::string& message)
{
    return Reply{status, json{{"error", {{"code", code}, {"message", message}}}}};
}

Reply kb_error(const kb::KbError& e)
{
    const int status = e.code() == kb::ErrorCode::UnknownRobot ? 404 : 409;
    return error(status, kb::to_string(e.code()), e.what());
}

json robot_json(const sim::Simulation& sim, const rbm::RobotAgent& robot)
{
    const auto times = robot.times(sim.now());
    const auto* record = sim.kb().robot(robot.id());
    return json{{"id", robot.id()},
                {"state", to_string(robot.state())},
                {"capabilities", robot.capabilities()},
                {"tasks_completed", record ? record->tasks_completed : 0},
                {"deregistration_pending", robot.deregistration_pending()},
                {"current_task", robot.current_task() ? json(*robot.current_task()) : json(nullptr)},
                {"times_ms",
                 {{"T_c", times.controlled.count()},
                  {"T_unc", times.uncontrolled.count()},
                  {"T_r", times.registered().count()},
                  {"T_unr", times.unregistered.count()},
                  {"T_ov", times.overall().count()}}}};
}

json report_json(const metrics::RobotReport& r)
{
    return json{{"robot_id", r.robot_id},         {"T_c", r.T_c},
                {"T_unc", r.T_unc},               {"T_r", r.T_r},
                {"T_unr", r.T_unr},               {"T_ov", r.T_ov},
                {"availability", r.availability}, {"utilization", r.utilization},
                {"effectiveness", optional_json(r.effectiveness)}};
}

}  // namespace

json event_payload(const events::Event& event)
{
    return std::visit(
        overloaded{
            [](const events::RequestArrived& e) { return json(e.request); },
            [](const events::RequestFinished& e) {
                return json{{"outcome", e.outcome}, {"kind", e.kind}, {"arrival_ms", e.arrival_time.count()}};
            },
            [](const events::PlanCreated& e) { return json(e.plan); },
            [](const events::PlanFailed& e) {
                json j{{"request_id", e.request_id}, {"reason", to_string(e.reason)}};
                if (e.task_id) j["task"] = *e.task_id;
                return j;
            },
            [](const events::TaskAssigned& e) {
                return json{{"request_id", e.request_id}, {"task", e.task_id}, {"robot", e.robot_id}};
            },
            [](const events::TaskCompleted& e) {
                json j{{"request_id", e.request_id}, {"task", e.task_id}, {"robot", e.robot_id}, {"success", e.success}};
                if (e.reason) j["reason"] = to_string(*e.reason);
                return j;
            },
            [](const events::RobotStateChanged& e) {
                return json{{"robot", e.robot_id},
                            {"from", to_string(e.from)},
                            {"to", to_string(e.to)},
                            {"capabilities", e.capabilities},
                            {"deferred", e.deregistration_deferred}};
            },
            [](const events::HistoryChanged& e) {
                return json{{"robot", e.robot_id}, {"tasks_completed", e.tasks_completed}};
            },
        },
        event);
}

json row_payload(const metrics::SystemSeriesRow& r)
{
    return json{{"t_min", r.t_min},         {"received", r.received}, {"processed", r.processed},
                {"unprocessed", r.unprocessed}, {"success", r.success}, {"failed", r.failed},
                {"latency_s", r.latency_s}, {"efficiency", optional_json(r.efficiency)}};
}

// ---------------------------------------------------------------- EventHub

std::uint64_t EventHub::subscribe()
{
    std::lock_guard lock(mutex_);
    const auto id = next_client_++;
    clients_.emplace(id, Client{});
    return id;
}

void EventHub::unsubscribe(std::uint64_t client)
{
    std::lock_guard lock(mutex_);
    clients_.erase(client);
    ready_.notify_all();
}

void EventHub::publish(SimTime t, std::string kind, json payload)
{
    std::lock_guard lock(mutex_);
    json frame{{"seq", ++sequence_}, {"t_ms", t.count()}, {"kind", std::move(kind)}, {"payload", std::move(payload)}};
    for (auto& [id, client] : clients_) {
        if (client.frames.size() >= capacity_) {
            client.frames.pop_front();
            ++client.dropped;
        }
        client.frames.push_back(frame);
    }
    ready_.notify_all();
}

std::optional<std::vector<json>> EventHub::next(std::uint64_t client, std::chrono::milliseconds timeout)
{
    std::unique_lock lock(mutex_);
    auto has_data = [&] {
        auto it = clients_.find(client);
        return closed_ || it == clients_.end() || !it->second.frames.empty();
    };
    ready_.wait_for(lock, timeout, has_data);
    auto it = clients_.find(client);
    if (closed_ || it == clients_.end()) return std::nullopt;
    std::vector<json> out;
    if (it->second.dropped > 0) {
        out.push_back({{"kind", "Gap"}, {"payload", {{"dropped", it->second.dropped}}}});
        it->second.dropped = 0;
    }
    out.insert(out.end(), std::make_move_iterator(it->second.frames.begin()),
               std::make_move_iterator(it->second.frames.end()));
    it->second.frames.clear();
    return out;
}

void EventHub::close()
{
    std::lock_guard lock(mutex_);
    closed_ = true;
    ready_.notify_all();
}

std::uint64_t EventHub::published() const
{
    std::lock_guard lock(mutex_);
    return sequence_;
}

// ---------------------------------------------------------------- Session

Session::Session(sim::ScenarioConfig config, SessionOptions options)
    : hub_(options.client_buffer), sim_(std::make_unique<sim::Simulation>(std::move(config))),
      paused_(options.start_paused), speed_(options.speed), anchor_wall_(Clock::now())
{
    if (!(speed_ > 0)) throw std::invalid_argument("speed must be positive");
    sim_->subscribe([this](SimTime t, const events::Event& e) { hub_.publish(t, events::kind_name(e), event_payload(e)); });
    sim_->on_sample([this](const metrics::SystemSeriesRow& row) {
        hub_.publish(SimTime{std::llround(row.t_min * 60000.0)}, "MetricRow", row_payload(row));
    });
    thread_ = std::thread([this] { loop(); });
}

Session::~Session()
{
    stop();
}

void Session::stop()
{
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    wake_.notify_all();
    if (thread_.joinable()) thread_.join();
    hub_.close();
}

std::future<Reply> Session::submit(Command command)
{
    std::packaged_task<Reply(sim::Simulation&)> task(std::move(command));
    auto future = task.get_future();
    {
        std::lock_guard lock(mutex_);
        if (stopping_) throw std::runtime_error("session is stopping");
        commands_.push_back(std::move(task));
    }
    wake_.notify_all();
    return future;
}

Reply Session::call(Command command)
{
    return submit(std::move(command)).get();
}

SimTime Session::logical_now_locked(Clock::time_point wall) const
{
    if (paused_) return anchor_sim_;
    const double elapsed_ms = std::chrono::duration<double, std::milli>(wall - anchor_wall_).count();
    return anchor_sim_ + SimTime{std::llround(elapsed_ms * speed_)};
}

void Session::reanchor_locked()
{
    const auto wall = Clock::now();
    anchor_sim_ = logical_now_locked(wall);
    anchor_wall_ = wall;
}

void Session::pause()
{
    {
        std::lock_guard lock(mutex_);
        if (paused_) return;
        reanchor_locked();
        paused_ = true;
        control_changed_ = true;
    }
    wake_.notify_all();
}

void Session::resume()
{
    {
        std::lock_guard lock(mutex_);
        if (!paused_) return;
        paused_ = false;
        anchor_wall_ = Clock::now();
        control_changed_ = true;
    }
    wake_.notify_all();
}

void Session::set_speed(double speed)
{
    if (!(speed > 0) || !std::isfinite(speed)) throw std::invalid_argument("speed must be a positive number");
    {
        std::lock_guard lock(mutex_);
        reanchor_locked();
        speed_ = speed;
        control_changed_ = true;
    }
    wake_.notify_all();
}

bool Session::paused() const
{
    std::lock_guard lock(mutex_);
    return paused_;
}

double Session::speed() const
{
    std::lock_guard lock(mutex_);
    return speed_;
}

void Session::loop()
{
    std::unique_lock lock(mutex_);
    auto interrupted = [&] { return stopping_ || !commands_.empty() || control_changed_; };
    while (!stopping_) {
        while (!commands_.empty()) {
            auto task = std::move(commands_.front());
            commands_.pop_front();
            // Commands apply at the paced logical time reached so far.
            const SimTime target = logical_now_locked(Clock::now());
            lock.unlock();
            try {
                sim_->run_until(target);
            } catch (const std::exception& e) {
                spdlog::error("simulation step failed: {}", e.what());
            }
            task(*sim_);
            lock.lock();
        }
        control_changed_ = false;
        if (stopping_) break;

        if (paused_ || sim_->done()) {
            wake_.wait(lock, interrupted);
            continue;
        }
        const SimTime next = *sim_->next_event_time();
        const auto wait = std::chrono::duration<double, std::milli>(static_cast<double>((next - anchor_sim_).count()) / speed_);
        const auto deadline = anchor_wall_ + std::chrono::duration_cast<Clock::duration>(wait);
        if (wake_.wait_until(lock, deadline, interrupted)) continue;
        lock.unlock();
        try {
            sim_->run_until(next);
        } catch (const std::exception& e) {
            spdlog::error("simulation step failed: {}", e.what());
        }
        lock.lock();
    }
}

// ---------------------------------------------------------------- Server

namespace {

void send(httplib::Response& res, const Reply& reply)
{
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
}

json parse_body(const httplib::Request& req, bool required)
{
    if (req.body.empty()) {
        if (required) throw std::invalid_argument("request body is required");
        return json::object();
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw std::invalid_argument("body must be a JSON object");
    return body;
}

}  // namespace

Server::Server(Session& session) : session_(session), http_(std::make_unique<httplib::Server>())
{
    routes();
}

Server::~Server()
{
    stop();
}

int Server::bind_any_port(const std::string& host)
{
    return http_->bind_to_any_port(host);
}

bool Server::bind(const std::string& host, int port)
{
    return http_->bind_to_port(host, port);
}

bool Server::listen()
{
    return http_->listen_after_bind();
}

void Server::stop()
{
    session_.hub().close();
    if (http_) http_->stop();
}

void Server::routes()
{
    auto& http = *http_;
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, PUT, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    // Runs a command on the simulation thread and maps errors to statuses.
    auto handle = [this](httplib::Response& res, const std::function<Session::Command()>& make) {
        Reply reply;
        try {
            reply = session_.call(make());
        } catch (const kb::KbError& e) {
            reply = kb_error(e);
        } catch (const json::exception& e) {
            reply = error(400, "SchemaError", e.what());
        } catch (const std::invalid_argument& e) {
            reply = error(400, "SchemaError", e.what());
        } catch (const std::exception& e) {
            reply = error(500, "InternalError", e.what());
        }
        send(res, reply);
    };

    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send(res, Reply{200, {{"status", "ok"}}});
    });

    http.Get("/blueprints", [handle](const httplib::Request&, httplib::Response& res) {
        handle(res, [] {
            return [](sim::Simulation& sim) { return Reply{200, json(sim.kb().blueprints())}; };
        });
    });
    http.Get(R"(/blueprints/([^/]+))", [handle](const httplib::Request& req, httplib::Response& res) {
        const std::string kind = req.matches[1];
        handle(res, [kind] {
            return [kind](sim::Simulation& sim) {
                auto pb = sim.kb().find_blueprint(kind);
                if (!pb) return error(404, "UnknownBlueprint", "no blueprint for request kind '" + kind + "'");
                return Reply{200, json(*pb)};
            };
        });
    });
    http.Put(R"(/blueprints/([^/]+))", [handle](const httplib::Request& req, httplib::Response& res) {
        const std::string kind = req.matches[1];
        handle(res, [&req, kind] {
            json body = parse_body(req, true);
            if (!body.contains("request_kind")) body["request_kind"] = kind;
            if (body.at("request_kind") != kind) {
                throw std::invalid_argument("request_kind in the body does not match the path");
            }
            if (!body.contains("id")) body["id"] = "Pb-" + kind;
            auto pb = body.get<PlanBlueprint>();
            return [pb](sim::Simulation& sim) {
                sim.upsert_blueprint(pb);
                return Reply{200, {{"blueprint", pb}, {"applied_at_ms", sim.now().count()}}};
            };
        });
    });
    http.Delete(R"(/blueprints/([^/]+))", [handle](const httplib::Request& req, httplib::Response& res) {
        const std::string kind = req.matches[1];
        handle(res, [kind] {
            return [kind](sim::Simulation& sim) {
                if (!sim.remove_blueprint(kind)) {
                    return error(404, "UnknownBlueprint", "no blueprint for request kind '" + kind + "'");
                }
                return Reply{200, {{"removed", kind}, {"applied_at_ms", sim.now().count()}}};
            };
        });
    });

    http.Get("/robots", [handle](const httplib::Request&, httplib::Response& res) {
        handle(res, [] {
            return [](sim::Simulation& sim) {
                json robots = json::array();
                for (const auto& [id, robot] : sim.rbm().robots()) robots.push_back(robot_json(sim, robot));
                return Reply{200, {{"robots", robots}, {"max_robots", sim.kb().max_robots()}, {"t_ms", sim.now().count()}}};
            };
        });
    });
    http.Post(R"(/robots/([^/]+)/register)", [handle](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        handle(res, [&req, id] {
            const json body = parse_body(req, false);
            std::optional<CapabilitySet> caps;
            if (body.contains("capabilities")) caps = body.at("capabilities").get<CapabilitySet>();
            return [id, caps](sim::Simulation& sim) {
                const auto* robot = sim.rbm().robot(id);
                if (!caps && !robot) {
                    return error(400, "SchemaError", "capabilities are required for a new robot '" + id + "'");
                }
                sim.register_robot(id, caps ? *caps : robot->capabilities());
                return Reply{200, {{"robot", robot_json(sim, *sim.rbm().robot(id))}, {"applied_at_ms", sim.now().count()}}};
            };
        });
    });
    http.Post(R"(/robots/([^/]+)/deregister)", [handle](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        handle(res, [id] {
            return [id](sim::Simulation& sim) {
                const auto result = sim.deregister_robot(id);
                return Reply{200,
                             {{"robot", robot_json(sim, *sim.rbm().robot(id))},
                              {"result", result == rbm::DeregistrationResult::Deferred ? "deferred" : "immediate"},
                              {"applied_at_ms", sim.now().count()}}};
            };
        });
    });

    http.Post("/requests", [handle](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&req] {
            const json body = parse_body(req, true);
            const auto kind = body.at("kind").get<std::string>();
            if (kind.empty()) throw std::invalid_argument("kind must not be empty");
            return [kind](sim::Simulation& sim) {
                const auto id = sim.submit_request(kind);
                return Reply{202, {{"request_id", id}, {"kind", kind}, {"applied_at_ms", sim.now().count()}}};
            };
        });
    });

    http.Get("/plans", [handle](const httplib::Request&, httplib::Response& res) {
        handle(res, [] {
            return [](sim::Simulation& sim) {
                json plans = json::array();
                for (const auto& [id, ex] : sim.rbm().executions()) {
                    plans.push_back({{"request_id", id},
                                     {"plan", ex.plan},
                                     {"cursor", ex.cursor},
                                     {"task_in_flight", ex.task_in_flight}});
                }
                return Reply{200, {{"plans", plans}, {"t_ms", sim.now().count()}}};
            };
        });
    });

    http.Get("/metrics/system", [handle](const httplib::Request&, httplib::Response& res) {
        handle(res, [] {
            return [](sim::Simulation& sim) {
                json rows = json::array();
                for (const auto& row : sim.series()) rows.push_back(row_payload(row));
                return Reply{200, {{"rows", rows},
                                   {"current", row_payload(sim.recorder().system_snapshot(sim.now()))},
                                   {"t_ms", sim.now().count()}}};
            };
        });
    });
    http.Get("/metrics/robots", [handle](const httplib::Request&, httplib::Response& res) {
        handle(res, [] {
            return [](sim::Simulation& sim) {
                json robots = json::array();
                for (const auto& r : sim.recorder().robot_reports(sim.now())) robots.push_back(report_json(r));
                return Reply{200, {{"robots", robots}, {"t_ms", sim.now().count()}}};
            };
        });
    });

    auto control_state = [this] { return json{{"paused", session_.paused()}, {"speed", session_.speed()}}; };
    http.Post("/control/pause", [this, control_state](const httplib::Request&, httplib::Response& res) {
        session_.pause();
        send(res, Reply{200, control_state()});
    });
    http.Post("/control/resume", [this, control_state](const httplib::Request&, httplib::Response& res) {
        session_.resume();
        send(res, Reply{200, control_state()});
    });
    http.Post("/control/speed", [this, control_state](const httplib::Request& req, httplib::Response& res) {
        try {
            const json body = parse_body(req, true);
            const auto& speed = body.at("speed");
            if (!speed.is_number()) throw std::invalid_argument("speed must be a number");
            session_.set_speed(speed.get<double>());
            send(res, Reply{200, control_state()});
        } catch (const std::exception& e) {
            send(res, error(400, "SchemaError", e.what()));
        }
    });

    http.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
        auto& hub = session_.hub();
        const auto client = hub.subscribe();
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [&hub, client](std::size_t, httplib::DataSink& sink) {
                auto frames = hub.next(client, std::chrono::milliseconds(500));
                if (!frames) {
                    sink.done();
                    return false;
                }
                std::string chunk;
                for (const auto& frame : *frames) {
                    if (frame.contains("seq")) chunk += "id: " + frame.at("seq").dump() + "\n";
                    chunk += "event: " + frame.at("kind").get<std::string>() + "\ndata: " + frame.dump() + "\n\n";
                }
                if (chunk.empty()) chunk = ": keepalive\n\n";
                return sink.write(chunk.data(), chunk.size());
            },
            [&hub, client](bool) { hub.unsubscribe(client); });
    });
}

}  // namespace mrs::service
