// streetlight: simulate, compare, serve and poke a street-light switching station.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <pthread.h>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "streetlight/streetlight.hpp"

using namespace streetlight;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 1;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ZoneConfig config_or_default(const std::string& path) {
    return path.empty() ? ZoneConfig{} : load_config_file(path);
}

Scenario scenario_for(const std::string& spec) {
    if (spec == "conventional") {
        Scenario s;
        s.kind = ScenarioKind::Conventional;
        return s;
    }
    if (spec == "proposed") return Scenario{};
    if (spec.starts_with("custom:") && spec.size() > 7) {
        Scenario s = load_scenario_file(spec.substr(7));
        s.kind = ScenarioKind::Custom;
        return s;
    }
    throw UsageError("--scenario must be conventional, proposed or custom:<scenario-file>");
}

void write_out(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

CivilDate date_arg(const std::string& s) {
    auto d = parse_date(s);
    if (!d) throw UsageError("bad date '" + s + "', expected YYYY-MM-DD");
    return *d;
}

int serve(const ZoneConfig& config, ServiceOptions options, const std::string& host, int port) {
    // Signals go to sigwait below, not to whichever thread happens to run.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ControlService service(config, std::move(options));
    HttpFrontend http(service);
    const int bound = http.start(host, port);
    service.start();
    std::cerr << "serving " << config.name << " on http://" << host << ":" << bound << " (x"
              << service.options().realtime_factor << ")\n";
    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "shutting down\n";
    service.stop();
    http.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GSM-GPRS street-light controller: simulator, service and tools"};
    app.require_subcommand(1);

    std::string config_path;
    int days = 1;
    std::uint64_t seed = 1;
    std::optional<std::string> start_date;

    auto* simulate = app.add_subcommand("simulate", "Run one scenario and emit a report");
    std::string scenario_spec = "proposed", out_path, format = "json";
    simulate->add_option("--config", config_path, "Zone config (JSON); defaults to the built-in zone")->check(CLI::ExistingFile);
    simulate->add_option("--scenario", scenario_spec, "conventional | proposed | custom:<scenario-file>");
    simulate->add_option("--days", days, "Simulated days")->check(CLI::Range(1, 3660));
    simulate->add_option("--seed", seed, "RNG seed (overrides the config)");
    simulate->add_option("--start-date", start_date, "First simulated day, YYYY-MM-DD");
    simulate->add_option("--out", out_path, "Report path; stdout if omitted");
    simulate->add_option("--format", format, "json | csv | table")->check(CLI::IsMember({"json", "csv", "table", "text-table"}));

    auto* compare = app.add_subcommand("compare", "Run Conventional and Proposed and print savings");
    std::string compare_format = "table";
    compare->add_option("--config", config_path, "Zone config (JSON)")->check(CLI::ExistingFile);
    compare->add_option("--days", days, "Simulated days")->check(CLI::Range(1, 3660));
    compare->add_option("--seed", seed, "RNG seed (overrides the config)");
    compare->add_option("--start-date", start_date, "First simulated day, YYYY-MM-DD");
    compare->add_option("--format", compare_format, "json | csv | table")->check(CLI::IsMember({"json", "csv", "table", "text-table"}));

    auto* serve_cmd = app.add_subcommand("serve", "Run the live station behind the HTTP API");
    int port = 8080;
    std::string host = "127.0.0.1", state_dir, token;
    double factor = 60.0;
    serve_cmd->add_option("--config", config_path, "Zone config (JSON)")->check(CLI::ExistingFile);
    serve_cmd->add_option("--port", port, "TCP port; 0 picks a free one")->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--realtime-factor", factor, "Simulated seconds per wall second")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--state-dir", state_dir, "Directory for config.json, events.log and ledger.csv");
    serve_cmd->add_option("--token", token, "Static API token required on POST endpoints");
    serve_cmd->add_option("--start", start_date, "Simulated start, YYYY-MM-DDTHH:MM[:SS] local; default now");

    auto* send = app.add_subcommand("send-sms", "Deliver an SMS to a running serve instance");
    std::string from, body, url = "http://127.0.0.1:8080";
    send->add_option("--from", from, "Sender number")->required();
    send->add_option("--body", body, "Message text")->required();
    send->add_option("--url", url, "Base URL of the serve instance");
    send->add_option("--token", token, "API token");

    auto* solar = app.add_subcommand("solar", "Print computed sunset and next sunrise");
    double lat = 0.0, lon = 0.0;
    int offset = 0;
    std::string date_text;
    solar->add_option("--lat", lat, "Latitude, degrees north")->required()->check(CLI::Range(-90.0, 90.0));
    solar->add_option("--lon", lon, "Longitude, degrees east")->required()->check(CLI::Range(-180.0, 180.0));
    solar->add_option("--date", date_text, "YYYY-MM-DD")->required();
    solar->add_option("--utc-offset", offset, "Local offset from UTC in minutes")->check(CLI::Range(-840, 840));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kUsage;
    }

    try {
        if (*simulate) {
            ZoneConfig config = config_or_default(config_path);
            if (simulate->count("--seed")) config.rng_seed = seed;
            Scenario scenario = scenario_for(scenario_spec);
            if (simulate->count("--days") || scenario.kind != ScenarioKind::Custom) scenario.duration_days = days;
            if (start_date) scenario.start_date = date_arg(*start_date);
            write_out(out_path, emit_report(run_scenario(config, scenario), format));
        } else if (*compare) {
            ZoneConfig config = config_or_default(config_path);
            if (compare->count("--seed")) config.rng_seed = seed;
            Scenario scenario;
            scenario.duration_days = days;
            if (start_date) scenario.start_date = date_arg(*start_date);
            std::cout << emit_report(run_comparison(config, scenario), compare_format);
        } else if (*serve_cmd) {
            ZoneConfig config = config_or_default(config_path);
            ServiceOptions options;
            options.realtime_factor = factor;
            options.api_token = token;
            if (!state_dir.empty()) options.state_dir = state_dir;
            if (start_date) {
                auto t = Timestamp::parse(*start_date);
                if (!t) throw UsageError("bad --start '" + *start_date + "'");
                options.start = *t;
            }
            return serve(config, std::move(options), host, port);
        } else if (*send) {
            httplib::Client client(url);
            client.set_connection_timeout(std::chrono::seconds(3));
            httplib::Headers headers;
            if (!token.empty()) headers.emplace("X-Api-Token", token);
            auto res = client.Post("/api/sms", headers, nlohmann::json{{"from", from}, {"body", body}}.dump(), "application/json");
            if (!res) throw std::runtime_error("cannot reach " + url + ": " + httplib::to_string(res.error()));
            std::cout << res->body << "\n";
            return res->status / 100 == 2 ? 0 : kRuntime;
        } else if (*solar) {
            const CivilDate date = date_arg(date_text);
            auto loc = GeoLocation::make(lat, lon, offset);
            auto result = compute_solar_times(loc, date);
            if (auto* st = std::get_if<SolarTimes>(&result)) {
                std::printf("%s sunset %s sunrise_next %s\n", format_date(date).c_str(), st->sunset.str().c_str(),
                            st->sunrise_next.str().c_str());
            } else {
                std::printf("%s %s\n", format_date(date).c_str(),
                            std::get<NoEvent>(result) == NoEvent::PolarDay ? "polar day" : "polar night");
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return 0;
}
