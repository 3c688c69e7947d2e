// mrs-server: paced interactive simulation behind an HTTP API.

#include "mrs/scenario.hpp"
#include "mrs/service.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace {

mrs::service::Server* g_server = nullptr;

void on_signal(int)
{
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("mrs-server"));
    spdlog::set_level(spdlog::level::info);
    if (const char* level = std::getenv("MRS_LOG_LEVEL")) {
        const std::string name = level;
        spdlog::set_level(spdlog::level::from_str(name == "warn" ? "warning" : name));
    }

    CLI::App app{"Interactive multi-robot simulation service"};
    std::string scenario;
    std::string host = "127.0.0.1";
    int port = 8080;
    mrs::service::SessionOptions options;
    app.add_option("--scenario", scenario, "Scenario file (bundled default scenario when omitted)");
    app.add_option("--host", host, "Listen address");
    app.add_option("--port", port, "Listen port");
    app.add_option("--speed", options.speed, "Logical milliseconds per wall-clock millisecond");
    app.add_flag("--paused", options.start_paused, "Start paused");
    CLI11_PARSE(app, argc, argv);

    try {
        auto config = scenario.empty() ? mrs::sim::default_scenario() : mrs::sim::load_scenario(scenario);
        mrs::service::Session session(std::move(config), options);
        mrs::service::Server server(session);
        if (!server.bind(host, port)) {
            std::cerr << "error: cannot listen on " << host << ":" << port << '\n';
            return 4;
        }
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        spdlog::info("listening on http://{}:{}", host, port);
        server.listen();
        g_server = nullptr;
        session.stop();
    } catch (const mrs::sim::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
