#include "mrs/trace.hpp"

#include "mrs/codec.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <string>

namespace mrs::trace {

using nlohmann::json;

void TraceWriter::write(const json& record)
{
    out_ << record.dump() << '\n';
    ++records_;
}

void TraceWriter::header(const Header& h)
{
    json fleet = json::array();
    for (const auto& f : h.fleet) fleet.push_back({{"id", f.id}, {"created_ms", f.created_at.count()}});
    write({{"type", "header"},
           {"version", kVersion},
           {"seed", h.seed},
           {"duration_ms", h.duration.count()},
           {"sample_ms", h.sample_interval.count()},
           {"fleet", fleet},
           {"config", h.config}});
}

void TraceWriter::message(SimTime t, const bus::AclMessage& m)
{
    json content = json::parse(m.content, nullptr, false);
    if (content.is_discarded()) content = m.content;
    write({{"type", "msg"},
           {"t", t.count()},
           {"performative", bus::to_string(m.performative)},
           {"sender", m.sender.name},
           {"receiver", m.receiver.name},
           {"conversation_id", m.conversation_id},
           {"content_kind", bus::to_string(m.content_kind)},
           {"content", content}});
}

void TraceWriter::event(SimTime t, const events::Event& event)
{
    if (const auto* e = std::get_if<events::RobotStateChanged>(&event)) {
        write({{"type", "robot"},
               {"t", t.count()},
               {"robot", e->robot_id},
               {"from", to_string(e->from)},
               {"to", to_string(e->to)},
               {"capabilities", e->capabilities},
               {"deferred", e->deregistration_deferred}});
    } else if (const auto* e = std::get_if<events::HistoryChanged>(&event)) {
        write({{"type", "history"}, {"t", t.count()}, {"robot", e->robot_id}, {"tasks_completed", e->tasks_completed}});
    } else if (const auto* e = std::get_if<events::RequestFinished>(&event)) {
        write({{"type", "outcome"},
               {"t", t.count()},
               {"kind", e->kind},
               {"arrival_ms", e->arrival_time.count()},
               {"outcome", e->outcome}});
    }
}

void TraceWriter::end(SimTime t)
{
    write({{"type", "end"}, {"t", t.count()}, {"records", records_}});
}

std::vector<json> read_records(std::istream& in)
{
    std::vector<json> records;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object() || !record.contains("type")) {
            if (in.eof()) throw TraceError("trace is truncated: last line is incomplete");
            throw TraceError("trace line " + std::to_string(number) + " is not a trace record");
        }
        records.push_back(std::move(record));
    }
    if (records.empty()) return records;
    const auto& head = records.front();
    if (head.at("type") != "header") throw TraceError("trace does not start with a header record");
    if (head.value("version", -1) != kVersion) {
        throw TraceError("trace version " + head.value("version", json(nullptr)).dump() + " is not supported (expected " +
                         std::to_string(kVersion) + ")");
    }
    if (records.back().at("type") != "end") throw TraceError("trace is truncated: no end record");
    return records;
}

namespace {

struct Timed {
    SimTime t;
    events::Event event;
};

}  // namespace

Replay replay(const std::vector<json>& records)
{
    Replay out;
    if (records.empty()) return out;
    const auto& head = records.front();
    const SimTime duration{head.at("duration_ms").get<std::int64_t>()};
    const SimTime sample{head.at("sample_ms").get<std::int64_t>()};
    if (sample <= SimTime{0}) throw TraceError("trace header has a non-positive sample interval");

    metrics::Recorder recorder;
    for (const auto& f : head.at("fleet")) {
        recorder.add_robot(f.at("id").get<std::string>(), SimTime{f.at("created_ms").get<std::int64_t>()});
    }

    std::vector<Timed> timeline;
    std::set<RequestId> seen;
    for (const auto& r : records) {
        const auto& type = r.at("type");
        if (type == "msg") {
            if (r.at("receiver") == bus::kRequestsManager && r.at("content_kind") == bus::to_string(bus::ContentKind::Submission) &&
                r.at("performative") == bus::to_string(bus::Performative::Request)) {
                auto request = r.at("content").get<Request>();
                if (!seen.insert(request.id).second) continue;
                request.arrival_time = SimTime{r.at("t").get<std::int64_t>()};
                timeline.push_back({request.arrival_time, events::RequestArrived{request}});
            }
        } else if (type == "outcome") {
            auto outcome = r.at("outcome").get<RequestOutcome>();
            out.outcomes.push_back(outcome);
            timeline.push_back({SimTime{r.at("t").get<std::int64_t>()},
                                events::RequestFinished{outcome, r.at("kind").get<std::string>(),
                                                        SimTime{r.at("arrival_ms").get<std::int64_t>()}}});
        } else if (type == "robot") {
            auto from = lifecycle_from_string(r.at("from").get<std::string>());
            auto to = lifecycle_from_string(r.at("to").get<std::string>());
            if (!from || !to) throw TraceError("robot record with an unknown lifecycle state");
            timeline.push_back({SimTime{r.at("t").get<std::int64_t>()},
                                events::RobotStateChanged{r.at("robot").get<std::string>(), *from, *to,
                                                          r.at("capabilities").get<CapabilitySet>(),
                                                          r.at("deferred").get<bool>()}});
        }
    }
    std::stable_sort(timeline.begin(), timeline.end(), [](const Timed& a, const Timed& b) { return a.t < b.t; });

    // A sample at time T sees every event strictly before T.
    std::size_t next = 0;
    for (SimTime at = sample; at <= duration; at += sample) {
        while (next < timeline.size() && timeline[next].t < at) {
            recorder.on_event(timeline[next].t, timeline[next].event);
            ++next;
        }
        out.series.push_back(recorder.system_snapshot(at));
    }
    for (; next < timeline.size(); ++next) recorder.on_event(timeline[next].t, timeline[next].event);
    out.robots = recorder.robot_reports(duration);
    return out;
}

Replay replay(std::istream& in)
{
    return replay(read_records(in));
}

}  // namespace mrs::trace
