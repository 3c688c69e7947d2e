#pragma once

#include "mrs/domain.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>

namespace mrs {

/// Ordering class of events that share a timestamp; lower runs first.
/// Samples see the state strictly before their instant, and a message
/// delivered exactly at a deadline is handled before the deadline fires.
enum class EventClass : std::uint8_t {
    Sample = 0,
    Message = 1,
    Timer = 2,
    Deadline = 3,
};

using EventId = std::uint64_t;

/// Time-ordered event queue; events dequeue in (time, class, sequence) order.
class EventQueue {
public:
    using Action = std::function<void()>;

    EventId schedule(SimTime at, EventClass cls, Action action);
    EventId schedule_in(SimTime delay, EventClass cls, Action action)
    {
        return schedule(now_ + delay, cls, std::move(action));
    }
    void cancel(EventId id);

    SimTime now() const { return now_; }
    bool empty() const { return events_.empty(); }
    std::size_t size() const { return events_.size(); }
    std::optional<SimTime> next_time() const;

    /// Runs the earliest event. Returns false when the queue is empty.
    bool run_next();

    /// Runs every event with time <= limit, then sets now to limit.
    void run_until(SimTime limit);

    std::uint64_t executed() const { return executed_; }

private:
    using Key = std::tuple<SimTime, EventClass, EventId>;
    std::map<Key, Action> events_;
    std::map<EventId, Key> index_;
    SimTime now_{0};
    EventId next_id_ = 0;
    std::uint64_t executed_ = 0;
};

}  // namespace mrs
