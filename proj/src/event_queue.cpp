#include "mrs/event_queue.hpp"

#include <stdexcept>

namespace mrs {

EventId EventQueue::schedule(SimTime at, EventClass cls, Action action)
{
    if (at < now_) throw std::logic_error("event scheduled in the past");
    const EventId id = next_id_++;
    Key key{at, cls, id};
    events_.emplace(key, std::move(action));
    index_.emplace(id, key);
    return id;
}

void EventQueue::cancel(EventId id)
{
    auto it = index_.find(id);
    if (it == index_.end()) return;
    events_.erase(it->second);
    index_.erase(it);
}

std::optional<SimTime> EventQueue::next_time() const
{
    if (events_.empty()) return std::nullopt;
    return std::get<0>(events_.begin()->first);
}

bool EventQueue::run_next()
{
    if (events_.empty()) return false;
    auto node = events_.extract(events_.begin());
    index_.erase(std::get<2>(node.key()));
    now_ = std::get<0>(node.key());
    ++executed_;
    node.mapped()();
    return true;
}

void EventQueue::run_until(SimTime limit)
{
    while (!events_.empty() && std::get<0>(events_.begin()->first) <= limit) run_next();
    if (limit > now_) now_ = limit;
}

}  // namespace mrs
