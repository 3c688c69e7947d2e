// mrs: validate scenarios, run them, replay traces and print reports.

#include "mrs/metrics.hpp"
#include "mrs/scenario.hpp"
#include "mrs/sim.hpp"
#include "mrs/trace.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <system_error>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kInvariant = 3, kIo = 4 };

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("mrs");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("MRS_LOG_LEVEL")) {
        const std::string name = level;
        const auto parsed = spdlog::level::from_str(name == "warn" ? "warning" : name);
        if (parsed == spdlog::level::off && name != "off") {
            spdlog::warn("MRS_LOG_LEVEL '{}' not recognised, using warn", name);
        } else {
            spdlog::set_level(parsed);
        }
    }
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw std::system_error(std::make_error_code(std::errc::io_error), "cannot write " + path.string());
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                                "cannot read " + path.string());
    }
    return in;
}

/// "30m", "90s", "1500ms" or a bare number of minutes.
mrs::SimTime parse_duration(const std::string& text)
{
    static const std::regex pattern(R"(^\s*([0-9]+(?:\.[0-9]+)?)\s*(ms|s|m|min|h)?\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) {
        throw mrs::sim::ConfigError({"--duration: cannot parse '" + text + "'"});
    }
    const double value = std::stod(m[1]);
    const std::string unit = m[2].matched ? m[2].str() : "m";
    const double scale = unit == "ms" ? 1.0 : unit == "s" ? 1000.0 : unit == "h" ? 3600000.0 : 60000.0;
    return mrs::SimTime{static_cast<std::int64_t>(std::llround(value * scale))};
}

json series_json(const std::vector<mrs::metrics::SystemSeriesRow>& rows)
{
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"t_min", r.t_min},
                       {"received", r.received},
                       {"processed", r.processed},
                       {"unprocessed", r.unprocessed},
                       {"success", r.success},
                       {"failed", r.failed},
                       {"latency_s", r.latency_s},
                       {"efficiency", r.efficiency ? json(*r.efficiency) : json(nullptr)}});
    }
    return out;
}

json robots_json(const std::vector<mrs::metrics::RobotReport>& reports)
{
    json out = json::array();
    for (const auto& r : reports) {
        out.push_back({{"robot_id", r.robot_id},
                       {"T_c", r.T_c},
                       {"T_unc", r.T_unc},
                       {"T_r", r.T_r},
                       {"T_unr", r.T_unr},
                       {"T_ov", r.T_ov},
                       {"availability", r.availability},
                       {"utilization", r.utilization},
                       {"effectiveness", r.effectiveness ? json(*r.effectiveness) : json(nullptr)}});
    }
    return out;
}

struct Options {
    std::string scenario;
    std::string trace;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> duration;
    std::string format = "csv";
};

mrs::sim::ScenarioConfig load(const Options& o)
{
    auto config = mrs::sim::load_scenario(o.scenario);
    if (o.seed) config.seed = *o.seed;
    if (o.duration) config.duration = parse_duration(*o.duration);
    auto errors = mrs::sim::validate(config);
    if (!errors.empty()) throw mrs::sim::ConfigError(std::move(errors));
    return config;
}

int cmd_validate(const Options& o)
{
    load(o);
    std::cout << o.scenario << ": ok\n";
    return kOk;
}

int cmd_run(const Options& o)
{
    const auto config = load(o);
    const fs::path dir = o.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::system_error(ec, "cannot create " + dir.string());

    auto output = mrs::sim::run(config);
    write_file(dir / "system_series.csv", mrs::metrics::series_csv(output.series));
    write_file(dir / "robot_report.csv", mrs::metrics::robot_report_csv(output.robots));
    write_file(dir / "trace.log", output.trace);
    write_file(dir / "outcomes.log", mrs::sim::outcomes_log(output.outcomes));
    if (o.format == "structured") {
        write_file(dir / "system_series.json", series_json(output.series).dump(2) + "\n");
        write_file(dir / "robot_report.json", robots_json(output.robots).dump(2) + "\n");
    }
    if (!output.violations.empty()) {
        for (const auto& v : output.violations) std::cerr << "invariant violation: " << v << '\n';
        return kInvariant;
    }
    return kOk;
}

int cmd_replay(const Options& o)
{
    auto in = open_input(o.trace);
    const auto result = mrs::trace::replay(in);
    const auto series = mrs::metrics::series_csv(result.series);
    const auto robots = mrs::metrics::robot_report_csv(result.robots);
    if (o.out.empty()) {
        std::cout << series;
        return kOk;
    }
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw std::system_error(ec, "cannot create " + o.out);
    write_file(fs::path(o.out) / "system_series.csv", series);
    write_file(fs::path(o.out) / "robot_report.csv", robots);
    return kOk;
}

int cmd_report(const Options& o)
{
    auto in = open_input(o.trace);
    const auto result = mrs::trace::replay(in);
    if (o.format == "structured") {
        std::cout << json{{"system", series_json(result.series)}, {"robots", robots_json(result.robots)}}.dump(2)
                  << '\n';
    } else {
        std::cout << mrs::metrics::robot_report_csv(result.robots);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    setup_logging();
    CLI::App app{"Multi-robot task allocation simulator"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Run a scenario and write metrics, trace and outcomes");
    run->add_option("--scenario", o.scenario, "Scenario file")->required();
    run->add_option("--seed", o.seed, "Override the scenario seed");
    run->add_option("--duration", o.duration, "Override the duration, e.g. 30m or 90s");
    run->add_option("--out", o.out, "Output directory")->required();
    run->add_option("--format", o.format, "csv, or structured to add JSON copies")
        ->check(CLI::IsMember({"csv", "structured"}));

    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    validate->add_option("--scenario", o.scenario, "Scenario file")->required();
    validate->add_option("--seed", o.seed, "Override the scenario seed");
    validate->add_option("--duration", o.duration, "Override the duration");

    auto* replay = app.add_subcommand("replay", "Recompute metrics from a trace");
    replay->add_option("--trace", o.trace, "Trace file")->required();
    replay->add_option("--out", o.out, "Write CSVs here instead of printing the series");

    auto* report = app.add_subcommand("report", "Print robot indicators from a trace");
    report->add_option("--trace", o.trace, "Trace file")->required();
    report->add_option("--format", o.format, "csv or structured")->check(CLI::IsMember({"csv", "structured"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*run) return cmd_run(o);
        if (*validate) return cmd_validate(o);
        if (*replay) return cmd_replay(o);
        if (*report) return cmd_report(o);
    } catch (const mrs::sim::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfig;
    } catch (const std::system_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const mrs::trace::TraceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvariant;
    }
    return kOk;
}
