#include "mrs/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace mrs::metrics {

namespace {

double seconds(SimTime t)
{
    return static_cast<double>(t.count()) / 1000.0;
}

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

}  // namespace

RobotReport make_report(const RobotId& robot_id, const RobotTimes& times)
{
    RobotReport r;
    r.robot_id = robot_id;
    r.T_c = seconds(times.controlled);
    r.T_unc = seconds(times.uncontrolled);
    r.T_r = seconds(times.registered());
    r.T_unr = seconds(times.unregistered);
    r.T_ov = seconds(times.overall());
    if (r.T_ov > 0) {
        r.availability = r.T_r / r.T_ov;
        r.utilization = r.T_c / r.T_ov;
    }
    if (r.T_unc > 0) r.effectiveness = r.T_c / r.T_unc;
    return r;
}

std::vector<std::string> check_row(const SystemSeriesRow& row)
{
    std::vector<std::string> errors;
    if (row.processed + row.unprocessed != row.received) {
        errors.push_back(fmt::format("t={} processed+unprocessed={} != received={}", row.t_min,
                                     row.processed + row.unprocessed, row.received));
    }
    if (row.success + row.failed != row.processed) {
        errors.push_back(fmt::format("t={} success+failed={} != processed={}", row.t_min,
                                     row.success + row.failed, row.processed));
    }
    if ((row.latency_s == 0.0) != (row.unprocessed == 0)) {
        errors.push_back(fmt::format("t={} latency_s={} with unprocessed={}", row.t_min, row.latency_s,
                                     row.unprocessed));
    }
    if (row.failed > 0 && row.efficiency != static_cast<double>(row.success) / row.failed) {
        errors.push_back(fmt::format("t={} efficiency does not equal success/failed", row.t_min));
    }
    return errors;
}

std::vector<std::string> check_times(const RobotId& robot_id, const RobotTimes& times, SimTime created_at,
                                     SimTime now)
{
    std::vector<std::string> errors;
    if (times.controlled.count() < 0 || times.uncontrolled.count() < 0 || times.unregistered.count() < 0) {
        errors.push_back(fmt::format("{}: negative time accumulator", robot_id));
    }
    if (times.controlled + times.uncontrolled != times.registered()) {
        errors.push_back(fmt::format("{}: T_c + T_unc != T_r", robot_id));
    }
    if (times.registered() + times.unregistered != now - created_at) {
        errors.push_back(fmt::format("{}: T_r + T_unr = {} ms but T_ov = {} ms", robot_id,
                                     (times.registered() + times.unregistered).count(),
                                     (now - created_at).count()));
    }
    return errors;
}

RobotTimes Recorder::RobotClock::at(SimTime t) const
{
    RobotTimes times = closed;
    const SimTime open = t - since;
    switch (state) {
    case Lifecycle::Controlled: times.controlled += open; break;
    case Lifecycle::Uncontrolled: times.uncontrolled += open; break;
    case Lifecycle::Unregistered: times.unregistered += open; break;
    }
    return times;
}

void Recorder::add_robot(const RobotId& robot_id, SimTime created_at)
{
    if (robots_.count(robot_id)) return;
    RobotClock clock;
    clock.created_at = created_at;
    clock.since = created_at;
    robots_.emplace(robot_id, clock);
}

void Recorder::advance(SimTime t)
{
    if (t < last_) {
        throw std::logic_error(fmt::format("metrics event at {} ms after {} ms", t.count(), last_.count()));
    }
    last_ = t;
}

void Recorder::on_event(SimTime t, const events::Event& event)
{
    std::visit(overloaded{
                   [&](const events::RequestArrived& e) {
                       advance(t);
                       if (!pending_.emplace(e.request.id, t).second) {
                           throw std::logic_error("request '" + e.request.id + "' arrived twice");
                       }
                       pending_arrivals_.insert(t);
                       ++received_;
                   },
                   [&](const events::RequestFinished& e) {
                       advance(t);
                       auto it = pending_.find(e.outcome.request_id);
                       if (it == pending_.end()) {
                           throw std::logic_error("outcome for unknown request '" + e.outcome.request_id + "'");
                       }
                       pending_arrivals_.erase(pending_arrivals_.find(it->second));
                       completed_.emplace_back(it->first, t - it->second);
                       pending_.erase(it);
                       if (e.outcome.status == OutcomeStatus::Success) {
                           ++success_;
                       } else {
                           ++failed_;
                       }
                   },
                   [&](const events::RobotStateChanged& e) {
                       advance(t);
                       add_robot(e.robot_id, t);
                       auto& clock = robots_.at(e.robot_id);
                       if (e.from == e.to) return;
                       clock.closed = clock.at(t);
                       clock.since = t;
                       clock.state = e.to;
                   },
                   [](const auto&) {},
               },
               event);
}

SystemSeriesRow Recorder::system_snapshot(SimTime t) const
{
    SystemSeriesRow row;
    row.t_min = static_cast<double>(t.count()) / 60000.0;
    row.received = received_;
    row.success = success_;
    row.failed = failed_;
    row.processed = success_ + failed_;
    row.unprocessed = pending_.size();
    if (!pending_arrivals_.empty()) row.latency_s = seconds(t - *pending_arrivals_.begin());
    if (failed_ > 0) row.efficiency = static_cast<double>(success_) / static_cast<double>(failed_);
    return row;
}

RobotTimes Recorder::robot_times(const RobotId& robot_id, SimTime t) const
{
    auto it = robots_.find(robot_id);
    if (it == robots_.end()) throw std::out_of_range("unknown robot '" + robot_id + "'");
    return it->second.at(t);
}

RobotReport Recorder::robot_report(const RobotId& robot_id, SimTime t) const
{
    return make_report(robot_id, robot_times(robot_id, t));
}

std::vector<RobotReport> Recorder::robot_reports(SimTime t) const
{
    std::vector<RobotReport> reports;
    for (const auto& [id, clock] : robots_) reports.push_back(make_report(id, clock.at(t)));
    return reports;
}

std::vector<RobotId> Recorder::robots() const
{
    std::vector<RobotId> ids;
    for (const auto& [id, clock] : robots_) ids.push_back(id);
    return ids;
}

std::string format_number(double value)
{
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    return fmt::format("{}", value);
}

std::string series_csv(const std::vector<SystemSeriesRow>& rows)
{
    std::string out = "t_min,received,processed,unprocessed,success,failed,latency_s,efficiency\n";
    for (const auto& r : rows) {
        std::string efficiency;
        if (r.efficiency) {
            efficiency = format_number(*r.efficiency);
        } else if (r.success > 0) {
            efficiency = "inf";
        }
        out += fmt::format("{},{},{},{},{},{},{},{}\n", format_number(r.t_min), r.received, r.processed,
                           r.unprocessed, r.success, r.failed, format_number(r.latency_s), efficiency);
    }
    return out;
}

std::string robot_report_csv(const std::vector<RobotReport>& reports)
{
    std::string out = "robot_id,T_c,T_unc,T_r,T_unr,T_ov,availability,utilization,effectiveness\n";
    for (const auto& r : reports) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.robot_id, format_number(r.T_c),
                           format_number(r.T_unc), format_number(r.T_r), format_number(r.T_unr),
                           format_number(r.T_ov), format_number(r.availability), format_number(r.utilization),
                           r.effectiveness ? format_number(*r.effectiveness) : std::string{});
    }
    return out;
}

}  // namespace mrs::metrics
