#pragma once

// HTTP facade over a paced simulation. Handlers never touch the simulation:
// every command and query runs on the simulation thread through a serialized
// queue, and events fan out to per-client stream buffers.

#include "mrs/events.hpp"
#include "mrs/metrics.hpp"
#include "mrs/scenario.hpp"
#include "mrs/sim.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace mrs::service {

/// JSON payload of a simulation event as sent on the stream.
nlohmann::json event_payload(const events::Event& event);
nlohmann::json row_payload(const metrics::SystemSeriesRow& row);

/// Frame buffers per subscriber. A full buffer drops its oldest frame; the
/// next read then starts with a Gap frame carrying the number dropped.
class EventHub {
public:
    explicit EventHub(std::size_t capacity = 1024) : capacity_(capacity) {}

    std::uint64_t subscribe();
    void unsubscribe(std::uint64_t client);
    void publish(SimTime t, std::string kind, nlohmann::json payload);
    /// Waits up to `timeout` for frames. nullopt once the hub is closed or the
    /// client is gone; an empty vector on timeout.
    std::optional<std::vector<nlohmann::json>> next(std::uint64_t client, std::chrono::milliseconds timeout);
    void close();

    std::uint64_t published() const;

private:
    struct Client {
        std::deque<nlohmann::json> frames;
        std::uint64_t dropped = 0;
    };

    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::map<std::uint64_t, Client> clients_;
    std::uint64_t next_client_ = 1;
    std::uint64_t sequence_ = 0;
    bool closed_ = false;
};

struct Reply {
    int status = 200;
    nlohmann::json body;
};

struct SessionOptions {
    /// Logical milliseconds per wall-clock millisecond.
    double speed = 1.0;
    bool start_paused = false;
    std::size_t client_buffer = 1024;
};

/// Owns the simulation and the only thread that touches it.
class Session {
public:
    using Command = std::function<Reply(sim::Simulation&)>;

    Session(sim::ScenarioConfig config, SessionOptions options = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Queues a command; it runs at the next event-loop boundary. Exceptions
    /// thrown by the command surface through the future.
    std::future<Reply> submit(Command command);
    /// submit() and wait.
    Reply call(Command command);

    void pause();
    void resume();
    void set_speed(double speed);
    bool paused() const;
    double speed() const;

    EventHub& hub() { return hub_; }
    void stop();

private:
    void loop();
    SimTime logical_now_locked(std::chrono::steady_clock::time_point wall) const;
    void reanchor_locked();

    EventHub hub_;
    std::unique_ptr<sim::Simulation> sim_;

    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::deque<std::packaged_task<Reply(sim::Simulation&)>> commands_;
    bool paused_;
    double speed_;
    bool stopping_ = false;
    bool control_changed_ = false;
    SimTime anchor_sim_{0};
    std::chrono::steady_clock::time_point anchor_wall_;
    std::thread thread_;
};

class Server {
public:
    explicit Server(Session& session);
    ~Server();

    /// Binds to a free port on `host` and returns it.
    int bind_any_port(const std::string& host = "127.0.0.1");
    bool bind(const std::string& host, int port);
    /// Serves until stop(); call after binding.
    bool listen();
    void stop();

private:
    void routes();

    Session& session_;
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace mrs::service
