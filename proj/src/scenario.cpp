#include "mrs/scenario.hpp"

#include "mrs/codec.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace mrs::sim {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kKeys{
    "duration_min",   "request_period_s", "request_offset_s", "churn_period_s", "sample_interval_s",
    "robots",         "blueprints",       "request_kind_weights", "seed",       "plan_timeout_s",
    "exec_timeout_s", "task_timeout_s",   "task_duration_s",  "task_jitter_s",  "max_robots",
    "faults",         "fail_fast_deregistration", "max_in_flight", "latency_ms", "check_invariants"};

class Reader {
public:
    Reader(const json& doc, std::vector<std::string>& errors) : doc_(doc), errors_(errors) {}

    void time(const char* key, double unit_ms, SimTime& out)
    {
        if (!doc_.contains(key)) return;
        const auto& v = doc_.at(key);
        if (!v.is_number()) {
            errors_.push_back(fmt::format("{}: expected a number", key));
            return;
        }
        out = SimTime{std::llround(v.get<double>() * unit_ms)};
    }

    template <class T>
    void value(const char* key, T& out, bool (json::*check)() const, const char* expected)
    {
        if (!doc_.contains(key)) return;
        const auto& v = doc_.at(key);
        if (!(v.*check)()) {
            errors_.push_back(fmt::format("{}: expected {}", key, expected));
            return;
        }
        out = v.get<T>();
    }

private:
    const json& doc_;
    std::vector<std::string>& errors_;
};

void parse_robots(const json& doc, ScenarioConfig& config, std::vector<std::string>& errors)
{
    if (!doc.contains("robots")) return;
    const auto& list = doc.at("robots");
    if (!list.is_array()) {
        errors.push_back("robots: expected an array");
        return;
    }
    config.robots.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& r = list[i];
        const std::string where = fmt::format("robots[{}]", i);
        if (!r.is_object() || !r.contains("id") || !r.at("id").is_string()) {
            errors.push_back(where + ": expected an object with a string id");
            continue;
        }
        RobotSpec entry;
        entry.id = r.at("id").get<std::string>();
        for (const auto& [key, value] : r.items()) {
            if (key == "id") continue;
            if (key == "capabilities" && value.is_array() &&
                std::all_of(value.begin(), value.end(), [](const json& c) { return c.is_string(); })) {
                entry.capabilities = value.get<CapabilitySet>();
            } else if (key == "registered" && value.is_boolean()) {
                entry.registered = value.get<bool>();
            } else if (key == "history" && value.is_number_unsigned()) {
                entry.history = value.get<std::uint64_t>();
            } else {
                errors.push_back(fmt::format("{}.{}: unknown key or wrong type", where, key));
            }
        }
        config.robots.push_back(std::move(entry));
    }
}

void parse_blueprints(const json& doc, ScenarioConfig& config, std::vector<std::string>& errors)
{
    if (!doc.contains("blueprints")) return;
    const auto& list = doc.at("blueprints");
    if (!list.is_array()) {
        errors.push_back("blueprints: expected an array");
        return;
    }
    config.blueprints.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
        try {
            config.blueprints.push_back(list[i].get<PlanBlueprint>());
        } catch (const std::exception& e) {
            errors.push_back(fmt::format("blueprints[{}]: {}", i, e.what()));
        }
    }
}

void parse_weights(const json& doc, ScenarioConfig& config, std::vector<std::string>& errors)
{
    if (!doc.contains("request_kind_weights")) return;
    const auto& map = doc.at("request_kind_weights");
    if (!map.is_object()) {
        errors.push_back("request_kind_weights: expected an object");
        return;
    }
    config.request_kind_weights.clear();
    for (const auto& [kind, weight] : map.items()) {
        if (!weight.is_number()) {
            errors.push_back(fmt::format("request_kind_weights.{}: expected a number", kind));
            continue;
        }
        config.request_kind_weights[kind] = weight.get<double>();
    }
}

void parse_faults(const json& doc, ScenarioConfig& config, std::vector<std::string>& errors)
{
    if (!doc.contains("faults")) return;
    const auto& map = doc.at("faults");
    if (!map.is_object()) {
        errors.push_back("faults: expected an object");
        return;
    }
    config.faults.clear();
    for (const auto& [robot, profile] : map.items()) {
        rbm::FaultProfile p;
        if (!profile.is_object()) {
            errors.push_back(fmt::format("faults.{}: expected an object", robot));
            continue;
        }
        for (const auto& [key, value] : profile.items()) {
            if (!value.is_number()) {
                errors.push_back(fmt::format("faults.{}.{}: expected a number", robot, key));
            } else if (key == "stall") {
                p.stall_probability = value.get<double>();
            } else if (key == "fail") {
                p.fail_probability = value.get<double>();
            } else {
                errors.push_back(fmt::format("faults.{}.{}: unknown key", robot, key));
            }
        }
        config.faults[robot] = p;
    }
}

double seconds(SimTime t)
{
    return static_cast<double>(t.count()) / 1000.0;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&] {
          std::string message = "invalid scenario";
          for (const auto& e : errors) message += "\n  " + e;
          return message;
      }()),
      errors_(std::move(errors))
{
}

ScenarioConfig default_scenario()
{
    ScenarioConfig c;
    c.robots = {
        {"R1", {"C1", "C2", "C3", "C4"}, true, 0},
        {"R2", {"C2", "C4"}, false, 0},
        {"R3", {"C2", "C5"}, true, 0},
    };
    c.blueprints = {
        {"Pb1", "Rq1", {{"T1", {"C2"}}, {"T2", {"C4"}}}},
        {"Pb2", "Rq2", {{"T1", {"C1", "C3", "C4"}}, {"T2", {"C2"}}, {"T3", {"C2", "C5"}}}},
        {"Pb3", "Rq3", {{"T1", {"C2"}}, {"T2", {"C9"}}}},
    };
    c.request_kind_weights = {{"Rq1", 3}, {"Rq2", 4}, {"Rq3", 1}, {"Rq4", 1}};
    return c;
}

std::vector<std::string> validate(const ScenarioConfig& c)
{
    std::vector<std::string> errors;
    auto positive = [&](SimTime t, const char* name) {
        if (t <= SimTime{0}) errors.push_back(fmt::format("{} must be positive", name));
    };
    positive(c.duration, "duration");
    if (c.request_period < SimTime{0}) errors.push_back("request_period must not be negative");
    positive(c.sample_interval, "sample_interval");
    positive(c.plan_timeout, "plan_timeout");
    positive(c.exec_timeout, "exec_timeout");
    positive(c.task_timeout, "task_timeout");
    positive(c.task_duration, "task_duration");
    if (c.request_offset < SimTime{0}) errors.push_back("request_offset must not be negative");
    if (c.churn_period < SimTime{0}) errors.push_back("churn_period must not be negative");
    if (c.latency < SimTime{0}) errors.push_back("latency must not be negative");
    if (c.task_jitter < SimTime{0}) errors.push_back("task_jitter must not be negative");
    if (c.task_jitter >= c.task_duration && c.task_duration > SimTime{0}) {
        errors.push_back("task_jitter must be smaller than task_duration");
    }
    if (c.max_robots == 0) errors.push_back("max_robots must be at least 1");
    if (c.max_in_flight == 0) errors.push_back("max_in_flight must be at least 1");

    std::set<RobotId> ids;
    std::size_t registered = 0;
    for (const auto& r : c.robots) {
        if (r.id.empty()) errors.push_back("robot id must not be empty");
        if (!ids.insert(r.id).second) errors.push_back(fmt::format("duplicate robot id '{}'", r.id));
        if (r.registered) ++registered;
    }
    if (registered > c.max_robots) {
        errors.push_back(fmt::format("{} robots registered initially but max_robots is {}", registered,
                                     c.max_robots));
    }

    std::set<RequestKind> kinds;
    for (const auto& pb : c.blueprints) {
        for (const auto& e : validate_blueprint(pb)) errors.push_back(fmt::format("blueprint '{}': {}", pb.id, e));
        if (!kinds.insert(pb.request_kind).second) {
            errors.push_back(fmt::format("two blueprints serve request kind '{}'", pb.request_kind));
        }
    }

    double total = 0;
    for (const auto& [kind, weight] : c.request_kind_weights) {
        if (!(weight >= 0) || !std::isfinite(weight)) {
            errors.push_back(fmt::format("weight of '{}' must be a non-negative number", kind));
        } else {
            total += weight;
        }
    }
    if (c.request_period > SimTime{0} && !(total > 0)) {
        errors.push_back("request_kind_weights must have a positive sum");
    }

    for (const auto& [robot, p] : c.faults) {
        if (!ids.count(robot)) errors.push_back(fmt::format("faults name unknown robot '{}'", robot));
        const bool in_range = p.stall_probability >= 0 && p.stall_probability <= 1 && p.fail_probability >= 0 &&
                              p.fail_probability <= 1 && p.stall_probability + p.fail_probability <= 1;
        if (!in_range) {
            errors.push_back(fmt::format("faults of '{}': probabilities must lie in [0,1] and sum to at most 1",
                                         robot));
        }
    }
    return errors;
}

ScenarioConfig parse_scenario(const json& doc)
{
    std::vector<std::string> errors;
    if (!doc.is_object()) throw ConfigError({"scenario must be a JSON object"});
    for (const auto& [key, value] : doc.items()) {
        if (!kKeys.count(key)) errors.push_back(fmt::format("unknown key '{}'", key));
    }

    ScenarioConfig c = default_scenario();
    Reader read(doc, errors);
    read.time("duration_min", 60000.0, c.duration);
    read.time("request_period_s", 1000.0, c.request_period);
    read.time("request_offset_s", 1000.0, c.request_offset);
    read.time("churn_period_s", 1000.0, c.churn_period);
    read.time("sample_interval_s", 1000.0, c.sample_interval);
    read.time("plan_timeout_s", 1000.0, c.plan_timeout);
    read.time("exec_timeout_s", 1000.0, c.exec_timeout);
    read.time("task_timeout_s", 1000.0, c.task_timeout);
    read.time("task_duration_s", 1000.0, c.task_duration);
    read.time("task_jitter_s", 1000.0, c.task_jitter);
    read.time("latency_ms", 1.0, c.latency);
    read.value("seed", c.seed, &json::is_number_unsigned, "a non-negative integer");
    read.value("max_robots", c.max_robots, &json::is_number_unsigned, "a non-negative integer");
    read.value("max_in_flight", c.max_in_flight, &json::is_number_unsigned, "a non-negative integer");
    read.value("fail_fast_deregistration", c.fail_fast_deregistration, &json::is_boolean, "a boolean");
    read.value("check_invariants", c.check_invariants, &json::is_boolean, "a boolean");
    parse_robots(doc, c, errors);
    parse_blueprints(doc, c, errors);
    parse_weights(doc, c, errors);
    parse_faults(doc, c, errors);

    for (auto& e : validate(c)) errors.push_back(std::move(e));
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

ScenarioConfig parse_scenario_text(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("malformed JSON: ") + e.what()});
    }
    return parse_scenario(doc);
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                                "cannot read " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario_text(text.str());
}

json to_json(const ScenarioConfig& c)
{
    json robots = json::array();
    for (const auto& r : c.robots) {
        robots.push_back({{"id", r.id}, {"capabilities", r.capabilities}, {"registered", r.registered},
                          {"history", r.history}});
    }
    json faults = json::object();
    for (const auto& [robot, p] : c.faults) {
        faults[robot] = {{"stall", p.stall_probability}, {"fail", p.fail_probability}};
    }
    return json{
        {"duration_min", static_cast<double>(c.duration.count()) / 60000.0},
        {"request_period_s", seconds(c.request_period)},
        {"request_offset_s", seconds(c.request_offset)},
        {"churn_period_s", seconds(c.churn_period)},
        {"sample_interval_s", seconds(c.sample_interval)},
        {"robots", robots},
        {"blueprints", c.blueprints},
        {"request_kind_weights", c.request_kind_weights},
        {"seed", c.seed},
        {"plan_timeout_s", seconds(c.plan_timeout)},
        {"exec_timeout_s", seconds(c.exec_timeout)},
        {"task_timeout_s", seconds(c.task_timeout)},
        {"task_duration_s", seconds(c.task_duration)},
        {"task_jitter_s", seconds(c.task_jitter)},
        {"max_robots", c.max_robots},
        {"faults", faults},
        {"fail_fast_deregistration", c.fail_fast_deregistration},
        {"max_in_flight", c.max_in_flight},
        {"latency_ms", c.latency.count()},
        {"check_invariants", c.check_invariants},
    };
}

}  // namespace mrs::sim
