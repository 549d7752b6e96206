#ifndef STREETLIGHT_JSON_IO_HPP
#define STREETLIGHT_JSON_IO_HPP

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "zone.hpp"

// JSON mapping for the zone configuration, scenarios and reports.
// Field names are the documented file schema (see docs/formats.md).

namespace streetlight {

using nlohmann::json;

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

inline TimeOfDay tod_from(const json& j, const char* what) {
    auto t = TimeOfDay::parse(j.get<std::string>());
    if (!t) throw ConfigError(std::string("bad HH:MM for ") + what);
    return *t;
}

inline CivilDate date_from(const json& j, const char* what) {
    auto d = parse_date(j.get<std::string>());
    if (!d) throw ConfigError(std::string("bad YYYY-MM-DD for ") + what);
    return *d;
}

inline Timestamp stamp_from(const json& j, const char* what) {
    auto t = Timestamp::parse(j.get<std::string>());
    if (!t) throw ConfigError(std::string("bad timestamp for ") + what);
    return *t;
}

inline std::string_view provider_name(SolarProviderKind k) {
    switch (k) {
        case SolarProviderKind::Stub: return "stub";
        case SolarProviderKind::Compute: return "compute";
        case SolarProviderKind::Http: return "http";
    }
    return "?";
}

}  // namespace detail

inline json schedule_to_json(const ScheduleTable& s) {
    json j = {{"preset_on", s.preset_on.str()}, {"preset_off", s.preset_off.str()}, {"fetch_time", s.fetch_time.str()}};
    j["sleep_window"] = s.sleep_window ? json{{"start", s.sleep_window->start.str()}, {"end", s.sleep_window->end.str()}} : json(nullptr);
    return j;
}

inline ScheduleTable schedule_from_json(const json& j) {
    ScheduleTable s;
    if (j.contains("preset_on")) s.preset_on = detail::tod_from(j["preset_on"], "preset_on");
    if (j.contains("preset_off")) s.preset_off = detail::tod_from(j["preset_off"], "preset_off");
    if (j.contains("fetch_time")) s.fetch_time = detail::tod_from(j["fetch_time"], "fetch_time");
    if (j.contains("sleep_window") && !j["sleep_window"].is_null()) {
        s.sleep_window = SleepWindow{detail::tod_from(j["sleep_window"].at("start"), "sleep start"),
                                     detail::tod_from(j["sleep_window"].at("end"), "sleep end")};
    }
    return s;
}

inline json config_to_json(const ZoneConfig& c) {
    json lanes = json::array();
    for (const auto& l : c.lanes) lanes.push_back({{"lane_id", l.lane_id}, {"lamp_count", l.lamp_count}});
    return json{
        {"name", c.name},
        {"location", {{"latitude", c.location.latitude}, {"longitude", c.location.longitude},
                      {"utc_offset_minutes", c.location.utc_offset_minutes}}},
        {"lanes", lanes},
        {"lamp_watts", c.lamp_watts},
        {"line_v_rms", c.line_v_rms},
        {"line_hz", c.line_hz},
        {"sample_rate_hz", c.sample_rate_hz},
        {"window_cycles", c.window_cycles},
        {"noise_sigma", c.noise_sigma},
        {"sensors", {{"pt_ratio", c.sensors.pt_ratio}, {"ct_ratio", c.sensors.ct_ratio}}},
        {"schedule", schedule_to_json(c.schedule)},
        {"fault_policy", {{"threshold_ratio", c.fault_policy.threshold_ratio},
                          {"debounce_ticks", c.fault_policy.debounce_ticks},
                          {"realert_interval_seconds", c.fault_policy.realert_interval_seconds}}},
        {"initial_mode", std::string(mode_name(c.initial_mode))},
        {"whitelist", c.whitelist},
        {"authority_number", c.authority_number},
        {"tick_seconds", c.tick_seconds},
        {"rng_seed", c.rng_seed},
        {"rtc_drift_seconds_per_day", c.rtc_drift_seconds_per_day},
        {"solar_provider", std::string(detail::provider_name(c.solar_provider))},
        {"solar_endpoint", c.solar_endpoint},
    };
}

/// Missing keys keep their defaults; a malformed value is a ConfigError.
inline ZoneConfig config_from_json(const json& j) {
    ZoneConfig c;
    try {
        c.name = detail::get_or(j, "name", c.name);
        if (j.contains("location")) {
            const auto& l = j["location"];
            c.location.latitude = detail::get_or(l, "latitude", c.location.latitude);
            c.location.longitude = detail::get_or(l, "longitude", c.location.longitude);
            c.location.utc_offset_minutes = detail::get_or(l, "utc_offset_minutes", c.location.utc_offset_minutes);
        }
        if (j.contains("lanes")) {
            c.lanes.clear();
            for (const auto& l : j["lanes"]) c.lanes.push_back({l.at("lane_id").get<int>(), l.at("lamp_count").get<int>()});
        }
        c.lamp_watts = detail::get_or(j, "lamp_watts", c.lamp_watts);
        c.line_v_rms = detail::get_or(j, "line_v_rms", c.line_v_rms);
        c.line_hz = detail::get_or(j, "line_hz", c.line_hz);
        c.sample_rate_hz = detail::get_or(j, "sample_rate_hz", c.sample_rate_hz);
        c.window_cycles = detail::get_or(j, "window_cycles", c.window_cycles);
        c.noise_sigma = detail::get_or(j, "noise_sigma", c.noise_sigma);
        if (j.contains("sensors")) {
            c.sensors.pt_ratio = detail::get_or(j["sensors"], "pt_ratio", c.sensors.pt_ratio);
            c.sensors.ct_ratio = detail::get_or(j["sensors"], "ct_ratio", c.sensors.ct_ratio);
        }
        if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);
        if (j.contains("fault_policy")) {
            const auto& f = j["fault_policy"];
            c.fault_policy.threshold_ratio = detail::get_or(f, "threshold_ratio", c.fault_policy.threshold_ratio);
            c.fault_policy.debounce_ticks = detail::get_or(f, "debounce_ticks", c.fault_policy.debounce_ticks);
            c.fault_policy.realert_interval_seconds =
                detail::get_or(f, "realert_interval_seconds", c.fault_policy.realert_interval_seconds);
        }
        if (j.contains("initial_mode")) {
            auto m = mode_from_name(j["initial_mode"].get<std::string>());
            if (!m) throw ConfigError("initial_mode must be Manual, SemiAuto or FullAuto");
            c.initial_mode = *m;
        }
        if (j.contains("whitelist")) c.whitelist = j["whitelist"].get<std::set<std::string>>();
        c.authority_number = detail::get_or(j, "authority_number", c.authority_number);
        c.tick_seconds = detail::get_or(j, "tick_seconds", c.tick_seconds);
        c.rng_seed = detail::get_or(j, "rng_seed", c.rng_seed);
        c.rtc_drift_seconds_per_day = detail::get_or(j, "rtc_drift_seconds_per_day", c.rtc_drift_seconds_per_day);
        if (j.contains("solar_provider")) {
            std::string p = j["solar_provider"].get<std::string>();
            if (p == "stub") c.solar_provider = SolarProviderKind::Stub;
            else if (p == "compute") c.solar_provider = SolarProviderKind::Compute;
            else if (p == "http") c.solar_provider = SolarProviderKind::Http;
            else throw ConfigError("solar_provider must be stub, compute or http");
        }
        c.solar_endpoint = detail::get_or(j, "solar_endpoint", c.solar_endpoint);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json scenario_to_json(const Scenario& s) {
    json faults = json::array();
    for (const auto& f : s.fault_script) faults.push_back({{"at", f.at.iso()}, {"lamps_failed", f.lamps_failed}});
    json sms = json::array();
    for (const auto& m : s.sms_script) sms.push_back({{"at", m.at.iso()}, {"sender", m.sender}, {"body", m.body}});
    json fails = json::array();
    for (const auto& d : s.fetch_failures) fails.push_back(format_date(d));
    json j = {
        {"kind", std::string(scenario_name(s.kind))},
        {"duration_days", s.duration_days},
        {"start_date", format_date(s.start_date)},
        {"operator_lag", {{"early_minutes", s.lag.early_minutes}, {"late_minutes", s.lag.late_minutes},
                          {"jitter_minutes", s.lag.jitter_minutes}}},
        {"fault_script", faults},
        {"sms_script", sms},
        {"fetch_failures", fails},
    };
    j["mode"] = s.mode ? json(std::string(mode_name(*s.mode))) : json(nullptr);
    return j;
}

inline Scenario scenario_from_json(const json& j) {
    Scenario s;
    try {
        if (j.contains("kind")) {
            std::string k = j["kind"].get<std::string>();
            if (k == "Conventional" || k == "conventional") s.kind = ScenarioKind::Conventional;
            else if (k == "Proposed" || k == "proposed") s.kind = ScenarioKind::Proposed;
            else if (k == "Custom" || k == "custom") s.kind = ScenarioKind::Custom;
            else throw ConfigError("scenario kind must be Conventional, Proposed or Custom");
        }
        s.duration_days = detail::get_or(j, "duration_days", s.duration_days);
        if (j.contains("start_date")) s.start_date = detail::date_from(j["start_date"], "start_date");
        if (j.contains("operator_lag")) {
            const auto& l = j["operator_lag"];
            s.lag.early_minutes = detail::get_or(l, "early_minutes", s.lag.early_minutes);
            s.lag.late_minutes = detail::get_or(l, "late_minutes", s.lag.late_minutes);
            s.lag.jitter_minutes = detail::get_or(l, "jitter_minutes", s.lag.jitter_minutes);
        }
        for (const auto& f : j.value("fault_script", json::array())) {
            s.fault_script.push_back({detail::stamp_from(f.at("at"), "fault_script.at"), f.at("lamps_failed").get<int>()});
        }
        for (const auto& m : j.value("sms_script", json::array())) {
            s.sms_script.push_back({detail::stamp_from(m.at("at"), "sms_script.at"), m.at("sender").get<std::string>(),
                                    m.at("body").get<std::string>()});
        }
        for (const auto& d : j.value("fetch_failures", json::array())) s.fetch_failures.push_back(detail::date_from(d, "fetch_failures"));
        if (j.contains("mode") && !j["mode"].is_null()) {
            auto m = mode_from_name(j["mode"].get<std::string>());
            if (!m) throw ConfigError("scenario mode must be Manual, SemiAuto or FullAuto");
            s.mode = *m;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

inline json report_to_json(const SimReport& r) {
    json scenarios = json::array();
    for (const auto& s : r.scenarios) {
        json hourly = json::array();
        for (const auto& h : s.hourly) {
            hourly.push_back({{"hour_start", h.hour_start.iso()}, {"avg_watts", h.avg_watts}, {"cumulative_kwh", h.cumulative_kwh}});
        }
        json lanes = json::array();
        for (std::size_t k = 0; k < s.lane_ids.size(); ++k) lanes.push_back({{"lane_id", s.lane_ids[k]}, {"kwh", s.lane_kwh[k]}});
        scenarios.push_back({{"scenario", s.scenario},
                             {"total_kwh", s.total_kwh},
                             {"lanes", lanes},
                             {"hourly", hourly},
                             {"alert_log", s.alert_log},
                             {"relay_log", s.relay_log},
                             {"sms_log", s.sms_log}});
    }
    json j = {{"zone", r.zone},
              {"start_date", format_date(r.start_date)},
              {"days", r.days},
              {"tick_seconds", r.tick_seconds},
              {"seed", r.seed},
              {"scenarios", scenarios}};
    j["savings_percent"] = r.savings_percent ? json(*r.savings_percent) : json(nullptr);
    return j;
}

inline SimReport report_from_json(const json& j) {
    SimReport r;
    r.zone = j.at("zone").get<std::string>();
    r.start_date = detail::date_from(j.at("start_date"), "start_date");
    r.days = j.at("days").get<int>();
    r.tick_seconds = j.at("tick_seconds").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("scenarios")) {
        ScenarioResult out;
        out.scenario = s.at("scenario").get<std::string>();
        out.total_kwh = s.at("total_kwh").get<double>();
        for (const auto& l : s.at("lanes")) {
            out.lane_ids.push_back(l.at("lane_id").get<int>());
            out.lane_kwh.push_back(l.at("kwh").get<double>());
        }
        for (const auto& h : s.at("hourly")) {
            out.hourly.push_back({detail::stamp_from(h.at("hour_start"), "hour_start"), h.at("avg_watts").get<double>(),
                                  h.at("cumulative_kwh").get<double>()});
        }
        out.alert_log = s.at("alert_log").get<std::vector<std::string>>();
        out.relay_log = s.at("relay_log").get<std::vector<std::string>>();
        out.sms_log = s.at("sms_log").get<std::vector<std::string>>();
        r.scenarios.push_back(std::move(out));
    }
    if (!j.at("savings_percent").is_null()) r.savings_percent = j["savings_percent"].get<double>();
    return r;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ZoneConfig load_config_file(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
    return config_from_json(j);
}

inline Scenario load_scenario_file(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
    return scenario_from_json(j);
}

}  // namespace streetlight

#endif
