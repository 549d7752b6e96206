#ifndef STREETLIGHT_SERVICE_HPP
#define STREETLIGHT_SERVICE_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "json_io.hpp"
#include "solar_fetch.hpp"
#include "zone.hpp"

namespace streetlight {

enum class EventKind { RelayChange, SmsIn, SmsOut, Alert, ModeChange, Fetch, Log };

inline std::string_view event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::RelayChange: return "RelayChange";
        case EventKind::SmsIn: return "SmsIn";
        case EventKind::SmsOut: return "SmsOut";
        case EventKind::Alert: return "Alert";
        case EventKind::ModeChange: return "ModeChange";
        case EventKind::Fetch: return "Fetch";
        case EventKind::Log: return "Log";
    }
    return "?";
}

inline std::optional<EventKind> event_kind_from(std::string_view s) {
    for (auto k : {EventKind::RelayChange, EventKind::SmsIn, EventKind::SmsOut, EventKind::Alert, EventKind::ModeChange,
                   EventKind::Fetch, EventKind::Log}) {
        if (event_kind_name(k) == s) return k;
    }
    return std::nullopt;
}

struct EventRecord {
    std::uint64_t seq = 0;
    Timestamp timestamp;
    EventKind kind = EventKind::Log;
    nlohmann::json payload;

    bool operator==(const EventRecord&) const = default;
};

inline nlohmann::json event_to_json(const EventRecord& e) {
    return {{"seq", e.seq}, {"ts", e.timestamp.iso()}, {"kind", std::string(event_kind_name(e.kind))}, {"payload", e.payload}};
}

inline std::optional<EventRecord> event_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("seq") || !j.contains("ts") || !j.contains("kind") || !j.contains("payload")) {
        return std::nullopt;
    }
    if (!j["seq"].is_number_unsigned() || !j["ts"].is_string() || !j["kind"].is_string()) return std::nullopt;
    auto ts = Timestamp::parse(j["ts"].get<std::string>());
    auto kind = event_kind_from(j["kind"].get<std::string>());
    if (!ts || !kind) return std::nullopt;
    return EventRecord{j["seq"].get<std::uint64_t>(), *ts, *kind, j["payload"]};
}

struct StateDirUnwritable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Append-only event log, one JSON record per line.
class EventLog {
public:
    EventLog() = default;

    /// Loads `path` if present and appends to it from then on. A corrupt
    /// record ends the usable log: it and anything after it are cut off.
    explicit EventLog(const std::filesystem::path& path) : path_(path) {
        if (std::filesystem::exists(path)) load_existing();
        out_.open(path, std::ios::app | std::ios::binary);
        if (!out_) throw StateDirUnwritable("cannot append to " + path.string());
    }

    const std::vector<EventRecord>& records() const { return records_; }
    std::uint64_t last_seq() const { return records_.empty() ? 0 : records_.back().seq; }
    std::size_t truncated_bytes() const { return truncated_bytes_; }

    const EventRecord& append(Timestamp ts, EventKind kind, nlohmann::json payload) {
        records_.push_back(EventRecord{last_seq() + 1, ts, kind, std::move(payload)});
        if (out_.is_open()) {
            out_ << event_to_json(records_.back()).dump() << '\n';
            out_.flush();
        }
        return records_.back();
    }

private:
    void load_existing() {
        std::ifstream in(path_, std::ios::binary);
        std::string line;
        std::uintmax_t good_bytes = 0;
        std::uint64_t prev = 0;
        bool corrupt = false;
        while (std::getline(in, line)) {
            const bool had_newline = !in.eof();
            auto j = nlohmann::json::parse(line, nullptr, false);
            auto rec = j.is_discarded() ? std::nullopt : event_from_json(j);
            if (!rec || !had_newline || rec->seq <= prev) {
                corrupt = true;
                break;
            }
            prev = rec->seq;
            records_.push_back(std::move(*rec));
            good_bytes += line.size() + 1;
        }
        in.close();
        const auto size = std::filesystem::file_size(path_);
        if (corrupt || good_bytes != size) {
            truncated_bytes_ = static_cast<std::size_t>(size - good_bytes);
            std::cerr << "warning: " << path_.string() << ": dropping " << truncated_bytes_
                      << " byte(s) of corrupt trailing record\n";
            std::filesystem::resize_file(path_, good_bytes);
        }
    }

    std::filesystem::path path_;
    std::ofstream out_;
    std::vector<EventRecord> records_;
    std::size_t truncated_bytes_ = 0;
};

/// Station state rebuilt from an event history.
struct ReplayedState {
    std::optional<Mode> mode;
    std::optional<bool> device_on;
    std::map<int, Relay> relays;
};

inline ReplayedState replay_events(const std::vector<EventRecord>& records) {
    ReplayedState s;
    for (const auto& r : records) {
        if (r.kind == EventKind::RelayChange) {
            s.relays[r.payload.at("lane_id").get<int>()] = r.payload.at("state").get<std::string>() == "ON" ? Relay::On : Relay::Off;
        } else if (r.kind == EventKind::ModeChange) {
            if (r.payload.contains("mode")) s.mode = mode_from_name(r.payload["mode"].get<std::string>());
            if (r.payload.contains("device_on")) s.device_on = r.payload["device_on"].get<bool>();
        }
    }
    return s;
}

/// Directory holding config.json, events.log and ledger.csv.
class StateDir {
public:
    explicit StateDir(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        auto probe = root_ / ".write-test";
        std::ofstream f(probe);
        if (ec || !f) throw StateDirUnwritable("state directory not writable: " + root_.string());
        f.close();
        std::filesystem::remove(probe, ec);
    }

    std::filesystem::path config_path() const { return root_ / "config.json"; }
    std::filesystem::path events_path() const { return root_ / "events.log"; }
    std::filesystem::path ledger_path() const { return root_ / "ledger.csv"; }

    void save_config(const ZoneConfig& c) const {
        std::ofstream out(config_path(), std::ios::binary | std::ios::trunc);
        if (!out) throw StateDirUnwritable("cannot write " + config_path().string());
        out << config_to_json(c).dump(2) << '\n';
    }

    std::optional<ZoneConfig> load_config() const {
        if (!std::filesystem::exists(config_path())) return std::nullopt;
        return load_config_file(config_path().string());
    }

private:
    std::filesystem::path root_;
};

struct ServiceOptions {
    std::optional<std::filesystem::path> state_dir;
    std::optional<Timestamp> start;
    double realtime_factor = 60.0;
    std::string api_token;
    std::chrono::milliseconds command_timeout{5000};
};

struct CommandOutcome {
    int status = 200;
    nlohmann::json body;
};

/// Live station: one tick-loop writer, many readers. Snapshots and event
/// reads are taken under the same lock as a tick, so they never see half a tick.
class ControlService {
public:
    ControlService(ZoneConfig config, ServiceOptions options = {})
        : options_(std::move(options)),
          zone_(config, start_time(config, options_), config.initial_mode) {
        if (options_.state_dir) {
            dir_.emplace(*options_.state_dir);
            dir_->save_config(zone_.config());
            log_ = EventLog(dir_->events_path());
            ReplayedState replayed = replay_events(log_.records());
            if (replayed.mode || replayed.device_on || !replayed.relays.empty()) {
                std::vector<std::pair<int, Relay>> relays(replayed.relays.begin(), replayed.relays.end());
                zone_.restore(replayed.mode.value_or(zone_.controller().mode), relays,
                              replayed.device_on.value_or(zone_.controller().device_on));
            }
            const bool fresh = !std::filesystem::exists(dir_->ledger_path()) || std::filesystem::file_size(dir_->ledger_path()) == 0;
            ledger_out_.open(dir_->ledger_path(), std::ios::app | std::ios::binary);
            if (fresh) ledger_out_ << "timestamp,zone_watts\n";
        }
        baseline_nights_ = detail::nights_for(zone_.config(), add_days(zone_.now().date(), -1), 2);
    }

    ~ControlService() { stop(); }

    ControlService(const ControlService&) = delete;
    ControlService& operator=(const ControlService&) = delete;

    /// One simulated tick: scripted inputs, controller, event publication.
    void tick() {
        std::lock_guard lock(mutex_);
        tick_locked();
    }

    void start() {
        if (running_.exchange(true)) return;
        worker_ = std::thread([this] {
            const auto period = std::chrono::duration<double>(zone_.config().tick_seconds / options_.realtime_factor);
            auto next = std::chrono::steady_clock::now();
            while (running_) {
                tick();
                next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
                std::unique_lock lk(stop_mutex_);
                stop_cv_.wait_until(lk, next, [this] { return !running_; });
            }
        });
    }

    void stop() {
        if (!running_.exchange(false)) return;
        stop_cv_.notify_all();
        events_cv_.notify_all();
        if (worker_.joinable()) worker_.join();
    }

    bool running() const { return running_; }

    nlohmann::json snapshot() const {
        std::lock_guard lock(mutex_);
        return snapshot_locked();
    }

    std::vector<EventRecord> events_since(std::uint64_t seq) const {
        std::lock_guard lock(mutex_);
        std::vector<EventRecord> out;
        for (const auto& r : log_.records()) {
            if (r.seq > seq) out.push_back(r);
        }
        return out;
    }

    /// Blocks until a record newer than `seq` exists, the timeout passes, or the service stops.
    bool wait_for_events(std::uint64_t seq, std::chrono::milliseconds timeout) const {
        std::unique_lock lock(mutex_);
        return events_cv_.wait_for(lock, timeout, [&] { return log_.last_seq() > seq || !running_; }) && log_.last_seq() > seq;
    }

    std::uint64_t last_seq() const {
        std::lock_guard lock(mutex_);
        return log_.last_seq();
    }

    /// Submits a command in SMS grammar on behalf of the trusted API sender.
    /// Waits for the tick that applies it unless `wait` is false.
    CommandOutcome submit_command(const std::string& text, bool wait = true) {
        auto parsed = parse_command_text(text);
        if (auto* rej = std::get_if<ParseRejection>(&parsed)) {
            return {400, {{"result", "bad_syntax"}, {"position", rej->position}}};
        }
        const Command command = std::get<Command>(parsed);
        std::uint64_t ticket = 0;
        {
            std::lock_guard lock(mutex_);
            if (!zone_.controller().device_on && is_state_changing(command) && !std::holds_alternative<cmd::DeviceOn>(command)) {
                return {409, {{"result", "device_off"}, {"command", render_command(command)}}};
            }
            ticket = ++next_ticket_;
            zone_.submit(CommandEnvelope{command, "api:" + std::to_string(ticket)});
        }
        if (!wait) return {202, {{"result", "queued"}, {"ticket", ticket}}};
        std::unique_lock lock(mutex_);
        const bool done = outcome_cv_.wait_for(lock, options_.command_timeout, [&] { return outcomes_.contains(ticket); });
        if (!done) return {504, {{"result", "timeout"}, {"ticket", ticket}}};
        CommandOutcome out = std::move(outcomes_[ticket]);
        outcomes_.erase(ticket);
        return out;
    }

    /// A message arrives over the air at the station's SIM.
    void inject_sms(const std::string& from, const std::string& body) {
        std::lock_guard lock(mutex_);
        zone_.inject_sms(from, body);
    }

    void set_failed_lamps(int n) {
        std::lock_guard lock(mutex_);
        zone_.set_failed_lamps(n);
    }

    /// Hourly energy for the last `window_hours` of simulated time, with the
    /// manual-operator baseline over the same span.
    nlohmann::json energy(double window_hours) const {
        std::lock_guard lock(mutex_);
        const auto& series = zone_.ledger().series();
        const int tick = zone_.config().tick_seconds;
        const Timestamp horizon = zone_.now() + static_cast<std::int64_t>(-window_hours * 3600.0);
        const double full_watts = zone_.config().lamp_watts * zone_.config().total_lamps();
        auto plan = conventional_operator_model(zone_.config().rng_seed, OperatorLag{}, baseline_nights_);
        nlohmann::json hours = nlohmann::json::array();
        double window_kwh = 0.0, baseline_kwh = 0.0, total_baseline = 0.0;
        std::int64_t current = INT64_MIN;
        double sum = 0.0, base_sum = 0.0;
        int count = 0;
        auto flush = [&] {
            if (count == 0) return;
            hours.push_back({{"hour_start", Timestamp{current * 3600}.iso()},
                             {"avg_watts", sum / count},
                             {"baseline_avg_watts", base_sum / count}});
        };
        for (const auto& p : series) {
            bool lit = false;
            for (const auto& n : plan) lit = lit || (n.on_at <= p.t && p.t < n.off_at);
            const double base = lit ? full_watts : 0.0;
            total_baseline += base * tick / 3.6e6;
            if (p.t < horizon) continue;
            window_kwh += p.zone_watts * tick / 3.6e6;
            baseline_kwh += base * tick / 3.6e6;
            const std::int64_t hour = p.t.seconds / 3600;
            if (hour != current) {
                flush();
                current = hour;
                sum = base_sum = 0.0;
                count = 0;
            }
            sum += p.zone_watts;
            base_sum += base;
            ++count;
        }
        flush();
        return {{"window_hours", window_hours},
                {"window_kwh", window_kwh},
                {"baseline_window_kwh", baseline_kwh},
                {"total_kwh", zone_.ledger().total_kwh()},
                {"baseline_total_kwh", total_baseline},
                {"hourly", hours}};
    }

    const ServiceOptions& options() const { return options_; }
    const ZoneConfig& config() const { return zone_.config(); }

    /// Direct access for tests; callers must not race the tick thread.
    const ZoneRuntime& runtime() const { return zone_; }

private:
    static Timestamp start_time(const ZoneConfig& c, const ServiceOptions& o) {
        if (o.start) return *o.start;
        const auto wall = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
        const std::int64_t local = wall + c.location.utc_offset_minutes * 60LL;
        return Timestamp{local - local % c.tick_seconds};
    }

    void publish(Timestamp ts, EventKind kind, nlohmann::json payload) { log_.append(ts, kind, std::move(payload)); }

    void tick_locked() {
        const std::size_t sms_before = zone_.sms_records().size();
        const std::size_t fetch_before = zone_.fetch_log().size();
        const Mode mode_before = zone_.controller().mode;
        const bool device_before = zone_.controller().device_on;
        const std::uint64_t seq_before = log_.last_seq();

        auto effects = zone_.step();
        const Timestamp now = zone_.now();

        const auto& fetches = zone_.fetch_log();
        for (std::size_t k = fetch_before; k < fetches.size(); ++k) {
            publish(fetches[k].at, EventKind::Fetch,
                    {{"date", format_date(fetches[k].date)}, {"ok", fetches[k].ok}, {"detail", fetches[k].detail}});
        }
        const auto& sms = zone_.sms_records();
        for (std::size_t k = sms_before; k < sms.size(); ++k) {
            if (sms[k].direction == SmsRecord::Direction::In || sms[k].direction == SmsRecord::Direction::Unauthorized) {
                publish(sms[k].at, EventKind::SmsIn,
                        {{"from", sms[k].party}, {"body", sms[k].body},
                         {"authorized", sms[k].direction == SmsRecord::Direction::In}});
            }
        }
        for (const auto& fx : effects) {
            if (const auto* r = fx.as<effect::RelayChange>()) {
                publish(now, EventKind::RelayChange,
                        {{"lane_id", r->lane_id}, {"state", std::string(relay_name(r->state))},
                         {"reason", std::string(reason_name(r->reason))}});
            } else if (const auto* a = fx.as<effect::AlertSms>()) {
                publish(now, EventKind::Alert,
                        {{"measured_watts", a->alert.measured_watts}, {"expected_watts", a->alert.expected_watts},
                         {"raised_at", a->alert.raised_at.iso()}, {"recipient", a->recipient}, {"body", a->body}});
            } else if (const auto* ack = fx.as<effect::Ack>()) {
                publish(now, EventKind::Log, {{"line", format_effect(fx)}, {"ack", ack->command}, {"origin", ack->origin}});
                settle(ack->origin, {200, {{"result", "ack"}, {"command", ack->command}, {"reply", ack->reply}}});
            } else if (const auto* rej = fx.as<effect::Rejection>()) {
                publish(now, EventKind::Log, {{"line", format_effect(fx)}, {"rejection", rej->reason}, {"origin", rej->origin}});
                settle(rej->origin, {400, {{"result", "rejection"}, {"command", rej->command}, {"reason", rej->reason}}});
            } else {
                publish(now, EventKind::Log, {{"line", format_effect(fx)}});
            }
        }
        if (zone_.controller().mode != mode_before) {
            publish(now, EventKind::ModeChange, {{"mode", std::string(mode_name(zone_.controller().mode))}});
        }
        if (zone_.controller().device_on != device_before) {
            publish(now, EventKind::ModeChange, {{"device_on", zone_.controller().device_on}});
        }
        for (std::size_t k = sms_before; k < sms.size(); ++k) {
            if (sms[k].direction != SmsRecord::Direction::In && sms[k].direction != SmsRecord::Direction::Unauthorized) {
                publish(sms[k].at, EventKind::SmsOut,
                        {{"to", sms[k].party}, {"body", sms[k].body},
                         {"status", std::string(sms_direction_name(sms[k].direction))}});
            }
        }
        if (ledger_out_.is_open()) {
            ledger_out_ << now.iso() << ',' << zone_.ledger().series().back().zone_watts << '\n';
            ledger_out_.flush();
        }
        if (now.date() != baseline_nights_.back().date) {
            baseline_nights_ = detail::nights_for(zone_.config(), add_days(zone_.ledger().series().front().t.date(), -1),
                                                  static_cast<int>(days_since_epoch(now.date()) -
                                                                   days_since_epoch(zone_.ledger().series().front().t.date())) + 2);
        }
        if (log_.last_seq() != seq_before) events_cv_.notify_all();
        outcome_cv_.notify_all();
    }

    void settle(const std::string& origin, CommandOutcome outcome) {
        if (!origin.starts_with("api:")) return;
        outcomes_[std::stoull(origin.substr(4))] = std::move(outcome);
    }

    nlohmann::json snapshot_locked() const {
        const auto& c = zone_.controller();
        nlohmann::json lanes = nlohmann::json::array();
        for (const auto& l : c.lanes) {
            nlohmann::json lane = {{"lane_id", l.lane_id}, {"relay", std::string(relay_name(l.relay))}, {"lamp_count", l.lamp_count}};
            if (l.override_active(c.clock)) {
                lane["override"] = {{"state", l.override->state == Relay::On ? "ForcedOn" : "ForcedOff"},
                                    {"expires", l.override->expires.iso()}};
            } else {
                lane["override"] = nullptr;
            }
            lanes.push_back(lane);
        }
        nlohmann::json times = nullptr;
        auto op_date = operative_solar_date(c.clock, c.schedule.fetch_time);
        auto et = effective_times(c.mode, c.schedule, zone_.solar(), op_date);
        if (auto* e = std::get_if<EffectiveTimes>(&et)) {
            times = {{"on_time", e->on_time.str()}, {"off_time", e->off_time.str()},
                     {"provenance", e->provenance == Provenance::Solar ? "Solar" : "Preset"}};
            times["sleep_window"] = e->sleep_window ? nlohmann::json{{"start", e->sleep_window->start.str()},
                                                                     {"end", e->sleep_window->end.str()}}
                                                    : nlohmann::json(nullptr);
        }
        nlohmann::json reading = nullptr;
        if (const auto& r = zone_.last_reading()) {
            reading = {{"v_rms", r->v_rms}, {"i_rms", r->i_rms}, {"p_watts", r->p_watts}, {"window_end", r->window_end.iso()}};
        }
        nlohmann::json solar = nullptr;
        if (const auto& s = zone_.solar()) {
            solar = {{"date", format_date(s->date)}, {"sunset", s->sunset.str()}, {"sunrise_next", s->sunrise_next.str()},
                     {"source", std::string(solar_source_name(s->source))}};
        }
        return {{"seq", log_.last_seq()},
                {"sim_clock", zone_.started() ? nlohmann::json(zone_.now().iso()) : nlohmann::json(nullptr)},
                {"mode", std::string(mode_name(c.mode))},
                {"device_on", c.device_on},
                {"lanes", lanes},
                {"schedule", schedule_to_json(c.schedule)},
                {"effective_times", times},
                {"solar", solar},
                {"power", reading},
                {"fault_episode", {{"active", c.episode.active},
                                   {"below_streak", c.episode.below_streak},
                                   {"last_alert", c.episode.last_alert ? nlohmann::json(c.episode.last_alert->iso())
                                                                       : nlohmann::json(nullptr)}}},
                {"failed_lamps", zone_.failed_lamps()},
                {"energy_kwh", zone_.ledger().total_kwh()}};
    }

    ServiceOptions options_;
    mutable std::mutex mutex_;
    mutable std::condition_variable events_cv_;
    std::condition_variable outcome_cv_;
    std::mutex stop_mutex_;
    std::condition_variable stop_cv_;
    std::atomic<bool> running_{false};
    std::thread worker_;
    ZoneRuntime zone_;
    std::optional<StateDir> dir_;
    EventLog log_;
    std::ofstream ledger_out_;
    std::vector<SolarTimes> baseline_nights_;
    std::uint64_t next_ticket_ = 0;
    std::map<std::uint64_t, CommandOutcome> outcomes_;
};

/// HTTP/JSON front end for a ControlService, plus the solar stub endpoint.
class HttpFrontend {
public:
    explicit HttpFrontend(ControlService& service) : service_(service) { routes(); }
    ~HttpFrontend() { stop(); }

    /// Binds and serves on a background thread; port 0 picks a free port.
    int start(const std::string& host, int port) {
        bound_port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound_port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound_port_;
    }

    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        stopping_ = true;
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return bound_port_; }

private:
    bool authorized(const httplib::Request& req, httplib::Response& res) const {
        const auto& token = service_.options().api_token;
        if (token.empty()) return true;
        if (req.get_header_value("X-Api-Token") == token || req.get_header_value("Authorization") == "Bearer " + token) {
            return true;
        }
        res.status = 401;
        res.set_content(R"({"error":"unauthorized"})", "application/json");
        return false;
    }

    static void json_reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void routes() {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Api-Token, Authorization");
            res.status = 204;
        });
        server_.Get("/api/snapshot", [this](const httplib::Request&, httplib::Response& res) {
            json_reply(res, 200, service_.snapshot());
        });
        server_.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            std::string text = req.body;
            auto j = nlohmann::json::parse(req.body, nullptr, false);
            if (!j.is_discarded() && j.is_object()) {
                if (!j.contains("body") || !j["body"].is_string()) return json_reply(res, 400, {{"error", "missing body"}});
                text = j["body"].get<std::string>();
            }
            auto outcome = service_.submit_command(text, service_.running());
            json_reply(res, outcome.status, outcome.body);
        });
        server_.Post("/api/sms", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            auto j = nlohmann::json::parse(req.body, nullptr, false);
            if (j.is_discarded() || !j.contains("from") || !j.contains("body") || !j["from"].is_string() || !j["body"].is_string()) {
                return json_reply(res, 400, {{"error", "expected {\"from\":..., \"body\":...}"}});
            }
            service_.inject_sms(j["from"].get<std::string>(), j["body"].get<std::string>());
            json_reply(res, 202, {{"result", "delivered"}});
        });
        server_.Post("/api/fault", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            auto j = nlohmann::json::parse(req.body, nullptr, false);
            if (j.is_discarded() || !j.contains("lamps_failed") || !j["lamps_failed"].is_number_integer()) {
                return json_reply(res, 400, {{"error", "expected {\"lamps_failed\": n}"}});
            }
            service_.set_failed_lamps(j["lamps_failed"].get<int>());
            json_reply(res, 200, {{"result", "ok"}});
        });
        server_.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t since = 0;
            if (req.has_param("since")) {
                try {
                    since = std::stoull(req.get_param_value("since"));
                } catch (const std::exception&) {
                    return json_reply(res, 400, {{"error", "bad since"}});
                }
            }
            nlohmann::json out = nlohmann::json::array();
            for (const auto& e : service_.events_since(since)) out.push_back(event_to_json(e));
            json_reply(res, 200, out);
        });
        server_.Get("/api/events/stream", [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t since = 0;
            if (req.has_param("since")) since = std::strtoull(req.get_param_value("since").c_str(), nullptr, 10);
            auto cursor = std::make_shared<std::uint64_t>(since);
            res.set_chunked_content_provider("application/x-ndjson", [this, cursor](std::size_t, httplib::DataSink& sink) {
                if (stopping_) return false;
                if (service_.wait_for_events(*cursor, std::chrono::milliseconds(1000))) {
                    std::string batch;
                    for (const auto& e : service_.events_since(*cursor)) {
                        batch += event_to_json(e).dump() + "\n";
                        *cursor = e.seq;
                    }
                    if (!sink.write(batch.data(), batch.size())) return false;
                } else {
                    std::string beat = nlohmann::json{{"kind", "Heartbeat"}, {"seq", service_.last_seq()}}.dump() + "\n";
                    if (!sink.write(beat.data(), beat.size())) return false;
                }
                return !stopping_;
            });
        });
        server_.Get("/api/energy", [this](const httplib::Request& req, httplib::Response& res) {
            double window = 24.0;
            if (req.has_param("window")) {
                try {
                    window = std::stod(req.get_param_value("window"));
                } catch (const std::exception&) {
                    return json_reply(res, 400, {{"error", "bad window"}});
                }
            }
            if (!(window > 0.0)) return json_reply(res, 400, {{"error", "window must be positive"}});
            json_reply(res, 200, service_.energy(window));
        });
        server_.Get("/solar", solar_stub_handler(service_.config().location.utc_offset_minutes));
        server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.status == 404 && res.body.empty()) res.set_content(R"({"error":"not found"})", "application/json");
        });
    }

    ControlService& service_;
    httplib::Server server_;
    std::thread thread_;
    int bound_port_ = -1;
    std::atomic<bool> stopping_{false};
};

}  // namespace streetlight

#endif
