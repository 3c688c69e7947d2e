#pragma once

// Line-delimited JSON trace of a run and metric re-derivation from it.
//
// Record types, one JSON object per line, keyed by "type":
//   header   version, seed, duration_ms, sample_ms, fleet, config
//   msg      every delivered bus message
//   robot    robot lifecycle changes
//   history  completed-task counter changes (including seeded values)
//   outcome  request outcomes as decided by the requests manager
//   end      last record of a complete trace

#include "mrs/bus.hpp"
#include "mrs/events.hpp"
#include "mrs/metrics.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace mrs::trace {

inline constexpr int kVersion = 1;

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FleetEntry {
    RobotId id;
    SimTime created_at{0};
};

struct Header {
    std::uint64_t seed = 0;
    SimTime duration{0};
    SimTime sample_interval{0};
    std::vector<FleetEntry> fleet;
    nlohmann::json config = nlohmann::json::object();
};

class TraceWriter {
public:
    explicit TraceWriter(std::ostream& out) : out_(out) {}

    void header(const Header& header);
    void message(SimTime t, const bus::AclMessage& message);
    /// Writes robot, history and outcome records; other events are not traced.
    void event(SimTime t, const events::Event& event);
    void end(SimTime t);

    std::uint64_t records() const { return records_; }

private:
    void write(const nlohmann::json& record);

    std::ostream& out_;
    std::uint64_t records_ = 0;
};

/// Parses every record. Throws TraceError on malformed lines, a missing or
/// incompatible header, or a missing end record. An empty input yields no records.
std::vector<nlohmann::json> read_records(std::istream& in);

struct Replay {
    std::vector<metrics::SystemSeriesRow> series;
    std::vector<metrics::RobotReport> robots;
    std::vector<RequestOutcome> outcomes;
};

/// Recomputes the run's metrics from its trace alone.
Replay replay(const std::vector<nlohmann::json>& records);
Replay replay(std::istream& in);

}  // namespace mrs::trace
