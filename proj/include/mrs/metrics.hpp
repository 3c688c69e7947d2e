#pragma once

// System indicators sampled over time and per-robot time indicators.

#include "mrs/domain.hpp"
#include "mrs/events.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mrs::metrics {

struct SystemSeriesRow {
    double t_min = 0.0;
    std::uint64_t received = 0;
    std::uint64_t processed = 0;
    std::uint64_t unprocessed = 0;
    std::uint64_t success = 0;
    std::uint64_t failed = 0;
    /// Age of the oldest pending request in seconds, 0 when none is pending.
    double latency_s = 0.0;
    /// success / failed; absent when failed is 0.
    std::optional<double> efficiency;
    bool operator==(const SystemSeriesRow&) const = default;
};

struct RobotReport {
    RobotId robot_id;
    double T_c = 0, T_unc = 0, T_r = 0, T_unr = 0, T_ov = 0;  // seconds
    double availability = 0;
    double utilization = 0;
    /// T_c / T_unc; absent when T_unc is 0.
    std::optional<double> effectiveness;
    bool operator==(const RobotReport&) const = default;
};

RobotReport make_report(const RobotId& robot_id, const RobotTimes& times);

/// Violated row invariants, empty when the row is consistent.
std::vector<std::string> check_row(const SystemSeriesRow& row);
/// Violated time identities for a robot observed from `created_at` to `now`.
std::vector<std::string> check_times(const RobotId& robot_id, const RobotTimes& times, SimTime created_at,
                                     SimTime now);

/// Folds request and robot events into counters and time accumulators.
class Recorder {
public:
    /// Tracks a robot from `created_at` in the Unregistered state.
    void add_robot(const RobotId& robot_id, SimTime created_at);

    /// Events must arrive in non-decreasing time; throws std::logic_error otherwise.
    void on_event(SimTime t, const events::Event& event);

    SystemSeriesRow system_snapshot(SimTime t) const;
    /// Throws std::out_of_range for an unknown robot.
    RobotReport robot_report(const RobotId& robot_id, SimTime t) const;
    std::vector<RobotReport> robot_reports(SimTime t) const;
    RobotTimes robot_times(const RobotId& robot_id, SimTime t) const;
    std::vector<RobotId> robots() const;

    /// Arrival-to-outcome latency of every finished request, in finish order.
    const std::vector<std::pair<RequestId, SimTime>>& completed_latencies() const { return completed_; }

private:
    struct RobotClock {
        SimTime created_at{0};
        Lifecycle state = Lifecycle::Unregistered;
        SimTime since{0};
        RobotTimes closed;
        RobotTimes at(SimTime t) const;
    };

    void advance(SimTime t);

    SimTime last_{0};
    std::uint64_t received_ = 0;
    std::uint64_t success_ = 0;
    std::uint64_t failed_ = 0;
    std::map<RequestId, SimTime> pending_;
    std::multiset<SimTime> pending_arrivals_;
    std::vector<std::pair<RequestId, SimTime>> completed_;
    std::map<RobotId, RobotClock> robots_;
};

/// Shortest round-trip decimal form.
std::string format_number(double value);

std::string series_csv(const std::vector<SystemSeriesRow>& rows);
std::string robot_report_csv(const std::vector<RobotReport>& reports);

}  // namespace mrs::metrics
