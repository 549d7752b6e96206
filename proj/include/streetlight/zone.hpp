#ifndef STREETLIGHT_ZONE_HPP
#define STREETLIGHT_ZONE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "command.hpp"
#include "controller.hpp"
#include "fake_modem.hpp"
#include "modem.hpp"
#include "power.hpp"
#include "solar.hpp"
#include "solar_fetch.hpp"
#include "time.hpp"

namespace streetlight {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LaneSpec {
    int lane_id = 0;
    int lamp_count = 0;
    bool operator==(const LaneSpec&) const = default;
};

/// Where the daily sunset/sunrise pair comes from.
enum class SolarProviderKind { Stub, Compute, Http };

struct ZoneConfig {
    std::string name = "Mirpur Cantonment switching station";
    GeoLocation location{23.79, 90.40, 360};
    std::vector<LaneSpec> lanes{{1, 75}, {2, 75}, {3, 75}, {4, 75}};
    double lamp_watts = 25.0;
    double line_v_rms = 230.0;
    double line_hz = 50.0;
    double sample_rate_hz = 2000.0;
    int window_cycles = 10;
    double noise_sigma = 0.0;  // primary-side volts/amps, Gaussian, seeded
    SensorRatios sensors;
    ScheduleTable schedule;
    FaultPolicy fault_policy;
    Mode initial_mode = Mode::FullAuto;
    std::set<std::string> whitelist{"+8801711111111"};
    std::string authority_number = "+8801711111111";
    int tick_seconds = 30;
    std::uint64_t rng_seed = 1;
    double rtc_drift_seconds_per_day = 0.0;
    SolarProviderKind solar_provider = SolarProviderKind::Stub;
    std::string solar_endpoint = "http://127.0.0.1:8081";

    int total_lamps() const {
        int n = 0;
        for (const auto& l : lanes) n += l.lamp_count;
        return n;
    }

    void validate() const {
        if (lanes.empty() || total_lamps() <= 0) throw ConfigError("zone needs at least one lamp");
        std::set<int> ids;
        for (const auto& l : lanes) {
            if (l.lamp_count < 0) throw ConfigError("negative lamp count");
            if (!ids.insert(l.lane_id).second) throw ConfigError("duplicate lane id");
        }
        if (tick_seconds <= 0 || 60 % tick_seconds != 0) throw ConfigError("tick_seconds must divide 60");
        if (!(lamp_watts > 0.0) || !(line_v_rms > 0.0)) throw ConfigError("lamp_watts and line_v_rms must be positive");
        if (sample_rate_hz < 10.0 * line_hz || window_cycles < 1) throw ConfigError("sampling below 10x line frequency");
        if (!(sensors.pt_ratio > 0.0) || !(sensors.ct_ratio > 0.0)) throw ConfigError("sensor ratios must be positive");
        if (auto e = schedule.validation_error()) throw ConfigError("schedule: " + *e);
        if (auto e = fault_policy.validation_error()) throw ConfigError("fault policy: " + *e);
        try {
            (void)GeoLocation::make(location.latitude, location.longitude, location.utc_offset_minutes);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }

    bool operator==(const ZoneConfig&) const = default;
};

enum class ScenarioKind { Conventional, Proposed, Custom };

inline std::string_view scenario_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Conventional: return "Conventional";
        case ScenarioKind::Proposed: return "Proposed";
        case ScenarioKind::Custom: return "Custom";
    }
    return "?";
}

/// Manual operator lag around the true solar times, in minutes.
struct OperatorLag {
    double early_minutes = 30.0;
    double late_minutes = 90.0;
    double jitter_minutes = 15.0;
    bool operator==(const OperatorLag&) const = default;
};

/// From `at`, `lamps_failed` lamps in total are dark (0 repairs everything).
struct FaultEvent {
    Timestamp at;
    int lamps_failed = 0;
    bool operator==(const FaultEvent&) const = default;
};

struct SmsEvent {
    Timestamp at;
    std::string sender;
    std::string body;
    bool operator==(const SmsEvent&) const = default;
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::Proposed;
    int duration_days = 1;
    CivilDate start_date = make_date(2019, 7, 22);
    OperatorLag lag;
    std::vector<FaultEvent> fault_script;
    std::vector<SmsEvent> sms_script;
    /// Days on which the solar download fails (the station then computes).
    std::vector<CivilDate> fetch_failures;
    /// Controller mode for Custom runs; Proposed always runs FullAuto.
    std::optional<Mode> mode;

    void validate() const {
        if (duration_days < 1) throw ConfigError("scenario duration must be at least one day");
        if (lag.early_minutes < 0 || lag.late_minutes < 0 || lag.jitter_minutes < 0) {
            throw ConfigError("operator lag parameters must be non-negative");
        }
        for (const auto& f : fault_script) {
            if (f.lamps_failed < 0) throw ConfigError("negative lamps_failed");
        }
    }

    bool operator==(const Scenario&) const = default;
};

struct UnorderedSeries : std::invalid_argument {
    UnorderedSeries() : std::invalid_argument("energy series is not time-ordered") {}
};

struct LedgerPoint {
    Timestamp t;
    double zone_watts = 0.0;
};

/// Left-rectangle integration at tick resolution.
inline double energy_integrate(std::span<const LedgerPoint> series, int tick_seconds) {
    double joules = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        if (k > 0 && !(series[k - 1].t < series[k].t)) throw UnorderedSeries{};
        joules += series[k].zone_watts * tick_seconds;
    }
    return joules / 3.6e6;
}

/// Tick-resolution zone power with per-lane cumulative energy.
class EnergyLedger {
public:
    EnergyLedger(int tick_seconds, std::vector<int> lane_ids) : tick_(tick_seconds), lane_ids_(std::move(lane_ids)) {
        lane_kwh_.assign(lane_ids_.size(), 0.0);
    }

    void record(Timestamp t, std::span<const double> lane_watts) {
        if (!series_.empty() && !(series_.back().t < t)) throw UnorderedSeries{};
        double total = 0.0;
        for (std::size_t k = 0; k < lane_watts.size() && k < lane_kwh_.size(); ++k) {
            lane_kwh_[k] += lane_watts[k] * tick_ / 3.6e6;
            total += lane_watts[k];
        }
        series_.push_back({t, total});
        total_kwh_ += total * tick_ / 3.6e6;
    }

    const std::vector<LedgerPoint>& series() const { return series_; }
    const std::vector<double>& lane_kwh() const { return lane_kwh_; }
    const std::vector<int>& lane_ids() const { return lane_ids_; }
    double total_kwh() const { return total_kwh_; }
    int tick_seconds() const { return tick_; }

private:
    int tick_;
    std::vector<int> lane_ids_;
    std::vector<double> lane_kwh_;
    std::vector<LedgerPoint> series_;
    double total_kwh_ = 0.0;
};

struct HourPoint {
    Timestamp hour_start;
    double avg_watts = 0.0;
    double cumulative_kwh = 0.0;
    bool operator==(const HourPoint&) const = default;
};

inline std::vector<HourPoint> hourly_curve(const EnergyLedger& ledger) {
    std::vector<HourPoint> out;
    double cumulative = 0.0;
    std::int64_t current = INT64_MIN;
    double sum = 0.0;
    int count = 0;
    auto flush = [&] {
        if (count == 0) return;
        cumulative += sum * ledger.tick_seconds() / 3.6e6;
        out.push_back({Timestamp{current * 3600}, sum / count, cumulative});
    };
    for (const auto& p : ledger.series()) {
        std::int64_t hour = p.t.seconds >= 0 ? p.t.seconds / 3600 : (p.t.seconds - 3599) / 3600;
        if (hour != current) {
            flush();
            current = hour;
            sum = 0.0;
            count = 0;
        }
        sum += p.zone_watts;
        ++count;
    }
    flush();
    return out;
}

struct ScenarioResult {
    std::string scenario;
    double total_kwh = 0.0;
    std::vector<int> lane_ids;
    std::vector<double> lane_kwh;
    std::vector<HourPoint> hourly;
    std::vector<std::string> alert_log;
    std::vector<std::string> relay_log;
    std::vector<std::string> sms_log;

    bool operator==(const ScenarioResult&) const = default;
};

struct SimReport {
    std::string zone;
    CivilDate start_date = make_date(2019, 7, 22);
    int days = 1;
    int tick_seconds = 30;
    std::uint64_t seed = 1;
    std::vector<ScenarioResult> scenarios;
    std::optional<double> savings_percent;

    const ScenarioResult* find(std::string_view name) const {
        for (const auto& s : scenarios) {
            if (s.scenario == name) return &s;
        }
        return nullptr;
    }

    bool operator==(const SimReport&) const = default;
};

/// (E_conv - E_prop) / E_conv * 100; undefined when E_conv is zero.
inline std::optional<double> savings_percent(double conventional_kwh, double proposed_kwh) {
    if (!(conventional_kwh > 0.0)) return std::nullopt;
    return (conventional_kwh - proposed_kwh) / conventional_kwh * 100.0;
}

/// Lamp-on interval the manual operator produces for one night.
struct OperatorNight {
    CivilDate date;
    Timestamp on_at;
    Timestamp off_at;
};

/// Per-night manual switching: on at sunset minus `early`, off at the next
/// sunrise plus `late`, each shifted by a uniform integer jitter in
/// [-jitter, +jitter] minutes drawn in night order from the seeded generator.
inline std::vector<OperatorNight> conventional_operator_model(std::uint64_t seed, const OperatorLag& lag,
                                                              std::span<const SolarTimes> nights) {
    if (lag.early_minutes < 0 || lag.late_minutes < 0 || lag.jitter_minutes < 0) {
        throw std::invalid_argument("operator lag parameters must be non-negative");
    }
    std::mt19937_64 rng(seed);
    const auto j = static_cast<long long>(std::llround(lag.jitter_minutes));
    std::uniform_int_distribution<long long> jitter(-j, j);
    std::vector<OperatorNight> out;
    for (const auto& n : nights) {
        long long on_jit = j > 0 ? jitter(rng) : 0;
        long long off_jit = j > 0 ? jitter(rng) : 0;
        Timestamp on = Timestamp::at(n.date, n.sunset) + (on_jit * 60 - std::llround(lag.early_minutes * 60));
        Timestamp off = Timestamp::at(add_days(n.date, 1), n.sunrise_next) + (off_jit * 60 + std::llround(lag.late_minutes * 60));
        if (off < on) off = on;
        out.push_back({n.date, on, off});
    }
    return out;
}

/// Lamps dark per lane when `failed` lamps are out, taken from lanes in order.
inline std::vector<int> distribute_failures(const std::vector<LaneSpec>& lanes, int failed) {
    std::vector<int> out;
    for (const auto& l : lanes) {
        int take = std::max(0, std::min(failed, l.lamp_count));
        out.push_back(take);
        failed -= take;
    }
    return out;
}

struct SmsRecord {
    enum class Direction { In, Out, Dropped, Abandoned, Unauthorized };
    Timestamp at;
    Direction direction = Direction::In;
    std::string party;
    std::string body;
};

inline std::string_view sms_direction_name(SmsRecord::Direction d) {
    switch (d) {
        case SmsRecord::Direction::In: return "IN";
        case SmsRecord::Direction::Out: return "OUT";
        case SmsRecord::Direction::Dropped: return "DROPPED";
        case SmsRecord::Direction::Abandoned: return "ABANDONED";
        case SmsRecord::Direction::Unauthorized: return "UNAUTHORIZED";
    }
    return "?";
}

inline std::string format_sms_record(const SmsRecord& r) {
    return r.at.iso() + " " + std::string(sms_direction_name(r.direction)) + " " + r.party + " \"" + r.body + "\"";
}

struct FetchRecord {
    Timestamp at;
    CivilDate date;
    bool ok = false;
    std::string detail;
};

/// Fetch-or-compute acquisition of the operative solar pair.
using SolarFetcher = std::function<std::variant<SolarTimes, FetchError>(const GeoLocation&, CivilDate, Timestamp)>;

/// The in-process counterpart of the stub server: the same body on the
/// same wire format, parsed exactly as a downloaded response would be.
inline std::variant<SolarTimes, FetchError> stub_fetch(const GeoLocation& loc, CivilDate date, Timestamp now) {
    auto computed = compute_solar_times(loc, date);
    if (!std::holds_alternative<SolarTimes>(computed)) return FetchError::BadStatus;
    const auto& c = std::get<SolarTimes>(computed);
    auto parsed = parse_solar_body(format_solar_body(c.sunset, c.sunrise_next));
    if (auto* e = std::get_if<FetchError>(&parsed)) return *e;
    const auto& pair = std::get<SolarPair>(parsed);
    return SolarTimes{date, pair.sunset, pair.sunrise, SolarSource::Fetched, now};
}

/// Everything a tick observer may look at.
struct TickView {
    Timestamp now;
    const ControllerState& controller;
    const std::optional<SolarTimes>& solar;
    const std::vector<Effect>& effects;
    double zone_watts;
};

/// The station plus its simulated surroundings, advanced one tick at a time:
/// RTC, solar acquisition, fake modem link, CT/PT capture, controller tick,
/// effect dispatch, energy ledger.
class ZoneRuntime {
public:
    ZoneRuntime(ZoneConfig config, Timestamp start, Mode mode, SolarFetcher fetcher = nullptr)
        : config_((config.validate(), std::move(config))),
          rtc_(start, config_.rtc_drift_seconds_per_day),
          true_now_(start),
          fetcher_(std::move(fetcher)),
          synth_(config_.sensors, config_.sample_rate_hz, config_.window_cycles, config_.line_hz),
          rng_(config_.rng_seed),
          ledger_(config_.tick_seconds, lane_ids(config_)) {
        std::vector<LaneState> lanes;
        for (const auto& l : config_.lanes) lanes.push_back(LaneState{l.lane_id, Relay::Off, std::nullopt, l.lamp_count});
        state_ = make_controller_state(mode, std::move(lanes), config_.schedule,
                                       ControllerConfig{config_.lamp_watts, config_.fault_policy, config_.authority_number},
                                       start);
        failed_per_lane_.assign(config_.lanes.size(), 0);
        if (!fetcher_) {
            switch (config_.solar_provider) {
                case SolarProviderKind::Stub: fetcher_ = stub_fetch; break;
                case SolarProviderKind::Compute: break;
                case SolarProviderKind::Http: {
                    std::string endpoint = config_.solar_endpoint;
                    fetcher_ = [endpoint](const GeoLocation& loc, CivilDate d, Timestamp now) {
                        return fetch_solar_times(endpoint, loc, d, now, std::chrono::seconds(2));
                    };
                    break;
                }
            }
        }
    }

    const ZoneConfig& config() const { return config_; }
    const ControllerState& controller() const { return state_; }
    const std::optional<SolarTimes>& solar() const { return solar_; }
    const std::optional<PowerReading>& last_reading() const { return reading_; }
    const EnergyLedger& ledger() const { return ledger_; }
    const FakeModem& modem() const { return modem_; }
    const ModemSession& session() const { return session_; }
    const std::vector<std::string>& wire_log() const { return wire_log_; }
    const std::vector<FetchRecord>& fetch_log() const { return fetch_log_; }
    const std::vector<SmsRecord>& sms_records() const { return sms_records_; }
    std::vector<std::string> sms_log() const {
        std::vector<std::string> out;
        for (const auto& r : sms_records_) out.push_back(format_sms_record(r));
        return out;
    }
    Timestamp now() const { return true_now_; }
    bool started() const { return started_; }
    int failed_lamps() const {
        int n = 0;
        for (int f : failed_per_lane_) n += f;
        return n;
    }

    /// Queues a command for the next tick (service/API path).
    void submit(CommandEnvelope env) { queued_.push_back(std::move(env)); }

    /// A message arrives at the shield's SIM.
    void inject_sms(const std::string& sender, const std::string& body) {
        modem_.inject_incoming(sender, body, true_now_);
    }

    /// Restores persisted station state (mode, relays, device power).
    void restore(Mode mode, const std::vector<std::pair<int, Relay>>& relays, bool device_on) {
        state_.mode = mode;
        state_.device_on = device_on;
        for (const auto& [id, relay] : relays) {
            if (LaneState* lane = state_.find_lane(id)) lane->relay = relay;
        }
    }

    void set_failed_lamps(int failed) { failed_per_lane_ = distribute_failures(config_.lanes, failed); }

    /// Forces the next solar acquisition to fail on these dates.
    void set_fetch_failures(std::vector<CivilDate> dates) { fetch_failures_ = std::move(dates); }

    /// Advances to the next tick (the first call runs the tick at the start time).
    std::vector<Effect> step() {
        if (started_) {
            rtc_.tick(config_.tick_seconds);
            true_now_ = rtc_.true_time();
        }
        started_ = true;
        const Timestamp now = rtc_.now();

        acquire_solar(now);

        std::vector<CommandEnvelope> commands = std::exchange(queued_, {});
        service_modem(now, commands);

        std::vector<double> lane_watts = lit_lane_watts();
        double zone = 0.0;
        for (double w : lane_watts) zone += w;
        PowerSample capture = synth_.sample(config_.line_v_rms, zone / config_.line_v_rms, 0.0, config_.noise_sigma,
                                            config_.noise_sigma > 0.0 ? &rng_ : nullptr);
        reading_ = compute_power(capture, config_.sensors, now);

        std::vector<Effect> effects;
        if (!state_.device_on) {
            // Powered down: only the power-on command is honoured.
            std::vector<CommandEnvelope> rest;
            for (auto& env : commands) {
                if (std::holds_alternative<cmd::DeviceOn>(env.command)) {
                    state_.clock = now;
                    auto [next, fx] = apply_command(std::move(state_), env, EffectiveTimes{});
                    state_ = std::move(next);
                    effects.push_back(std::move(fx));
                } else {
                    effects.push_back(Effect{Phase::Command, now,
                                             effect::Rejection{env.origin, render_command(env.command), "device off"}});
                }
            }
        } else {
            TickResult r = control_tick(std::move(state_), TickInputs{now, std::move(commands), reading_, solar_});
            state_ = std::move(r.state);
            effects = std::move(r.effects);
        }
        dispatch(now, effects);

        lane_watts = lit_lane_watts();
        ledger_.record(true_now_, lane_watts);
        return effects;
    }

private:
    static std::vector<int> lane_ids(const ZoneConfig& c) {
        std::vector<int> ids;
        for (const auto& l : c.lanes) ids.push_back(l.lane_id);
        return ids;
    }

    std::vector<double> lit_lane_watts() const {
        std::vector<double> w(state_.lanes.size(), 0.0);
        for (std::size_t k = 0; k < state_.lanes.size(); ++k) {
            if (state_.lanes[k].relay == Relay::On) {
                w[k] = config_.lamp_watts * std::max(0, state_.lanes[k].lamp_count - failed_per_lane_[k]);
            }
        }
        return w;
    }

    bool fetch_should_fail(CivilDate d) const {
        return std::find(fetch_failures_.begin(), fetch_failures_.end(), d) != fetch_failures_.end();
    }

    std::optional<SolarTimes> try_fetch(CivilDate date, Timestamp now) {
        if (!fetcher_) return std::nullopt;
        std::variant<SolarTimes, FetchError> got =
            fetch_should_fail(date) ? std::variant<SolarTimes, FetchError>{FetchError::Timeout} : fetcher_(config_.location, date, now);
        if (auto* st = std::get_if<SolarTimes>(&got)) {
            fetch_log_.push_back({now, date, true, "fetched " + st->sunset.str() + "/" + st->sunrise_next.str()});
            return *st;
        }
        fetch_log_.push_back({now, date, false, "fetch failed: " + std::string(fetch_error_name(std::get<FetchError>(got)))});
        return std::nullopt;
    }

    void acquire_solar(Timestamp now) {
        const CivilDate operative = operative_solar_date(now, state_.schedule.fetch_time);
        if (!solar_ || solar_->date != operative) {
            if (auto st = try_fetch(operative, now)) {
                solar_ = st;
                next_retry_.reset();
                return;
            }
            auto computed = compute_solar_times(config_.location, operative, now);
            if (auto* st = std::get_if<SolarTimes>(&computed)) {
                solar_ = *st;
                fetch_log_.push_back({now, operative, true, "computed " + st->sunset.str() + "/" + st->sunrise_next.str()});
            } else {
                solar_.reset();
            }
            // Hourly download retries until midnight of the fetch day.
            next_retry_ = fetcher_ ? std::optional<Timestamp>(now + 3600) : std::nullopt;
            return;
        }
        if (next_retry_ && now >= *next_retry_) {
            if (now.date() != operative) {
                next_retry_.reset();
            } else if (auto st = try_fetch(operative, now)) {
                solar_ = st;
                next_retry_.reset();
            } else {
                *next_retry_ = *next_retry_ + 3600;
            }
        }
    }

    void service_modem(Timestamp now, std::vector<CommandEnvelope>& commands) {
        for (const auto& ev : link()) {
            const auto* in = std::get_if<modem_event::SmsReceived>(&ev);
            if (!in) continue;
            sms_records_.push_back({now, SmsRecord::Direction::In, in->sender, in->body});
            auto parsed = parse_sms(SmsMessage{in->sender, in->body, now}, config_.whitelist);
            if (auto* c = std::get_if<Command>(&parsed)) {
                commands.push_back(CommandEnvelope{*c, in->sender});
                continue;
            }
            const auto& rej = std::get<ParseRejection>(parsed);
            if (rej.kind == ParseRejection::Kind::Unauthorized) {
                sms_records_.push_back({now, SmsRecord::Direction::Unauthorized, in->sender, in->body});
            } else {
                send_sms(in->sender, "REJECT bad syntax at " + std::to_string(rej.position));
            }
        }
    }

    void send_sms(const std::string& to, const std::string& body) {
        for (const auto& ev : session_.enqueue(to, body)) {
            if (auto* full = std::get_if<modem_event::OutboxFull>(&ev)) {
                sms_records_.push_back({true_now_, SmsRecord::Direction::Dropped, full->dropped_recipient, full->dropped_body});
            }
        }
    }

    std::vector<ModemEvent> link() {
        std::vector<ModemEvent> all;
        for (int round = 0; round < 64; ++round) {
            auto tx = session_.take_tx();
            for (const auto& chunk : tx) {
                wire_log_.push_back(chunk);
                modem_.receive(chunk);
            }
            std::string reply = modem_.take_output();
            if (tx.empty() && reply.empty()) break;
            if (!reply.empty()) {
                auto ev = session_.feed(reply);
                for (const auto& e : ev) {
                    if (auto* ok = std::get_if<modem_event::SendSucceeded>(&e)) {
                        sms_records_.push_back({true_now_, SmsRecord::Direction::Out, ok->recipient, ok->body});
                    } else if (auto* ab = std::get_if<modem_event::SendAbandoned>(&e)) {
                        sms_records_.push_back({true_now_, SmsRecord::Direction::Abandoned, ab->recipient, ab->body});
                    }
                }
                all.insert(all.end(), ev.begin(), ev.end());
            }
        }
        return all;
    }

    static bool is_phone(const std::string& origin) { return !origin.empty() && origin[0] == '+'; }

    void dispatch(Timestamp now, const std::vector<Effect>& effects) {
        (void)now;
        bool sent = false;
        for (const auto& fx : effects) {
            if (const auto* ack = fx.as<effect::Ack>(); ack && is_phone(ack->origin)) {
                send_sms(ack->origin, ack->reply);
                sent = true;
            } else if (const auto* rej = fx.as<effect::Rejection>(); rej && is_phone(rej->origin)) {
                send_sms(rej->origin, "REJECT " + rej->reason);
                sent = true;
            } else if (const auto* alert = fx.as<effect::AlertSms>()) {
                send_sms(alert->recipient, alert->body);
                sent = true;
            }
        }
        if (sent) link();
    }

    ZoneConfig config_;
    Rtc rtc_;
    Timestamp true_now_;
    bool started_ = false;
    SolarFetcher fetcher_;
    WaveformSynth synth_;
    std::mt19937_64 rng_;
    ControllerState state_;
    std::optional<SolarTimes> solar_;
    std::optional<Timestamp> next_retry_;
    std::vector<CivilDate> fetch_failures_;
    std::optional<PowerReading> reading_;
    std::vector<int> failed_per_lane_;
    std::vector<CommandEnvelope> queued_;
    ModemSession session_;
    FakeModem modem_;
    EnergyLedger ledger_;
    std::vector<std::string> wire_log_;
    std::vector<FetchRecord> fetch_log_;
    std::vector<SmsRecord> sms_records_;
};

using TickObserver = std::function<void(const TickView&)>;

namespace detail {

inline std::vector<SolarTimes> nights_for(const ZoneConfig& config, CivilDate first, int count) {
    std::vector<SolarTimes> nights;
    for (int k = 0; k < count; ++k) {
        CivilDate d = add_days(first, k);
        auto st = compute_solar_times(config.location, d);
        if (auto* s = std::get_if<SolarTimes>(&st)) nights.push_back(*s);
    }
    return nights;
}

inline ScenarioResult run_conventional(const ZoneConfig& config, const Scenario& scenario, const TickObserver& observer) {
    const Timestamp start = Timestamp::at(scenario.start_date, TimeOfDay(0));
    const std::int64_t ticks = scenario.duration_days * kSecondsPerDay / config.tick_seconds;
    // The night before the window still burns into its first morning.
    auto nights = nights_for(config, add_days(scenario.start_date, -1), scenario.duration_days + 1);
    auto plan = conventional_operator_model(config.rng_seed, scenario.lag, nights);

    std::vector<int> ids;
    for (const auto& l : config.lanes) ids.push_back(l.lane_id);
    EnergyLedger ledger(config.tick_seconds, ids);
    ScenarioResult result;
    result.scenario = std::string(scenario_name(ScenarioKind::Conventional));

    std::vector<int> failed(config.lanes.size(), 0);
    std::size_t next_fault = 0;
    auto faults = scenario.fault_script;
    std::stable_sort(faults.begin(), faults.end(), [](const auto& a, const auto& b) { return a.at < b.at; });

    ControllerState shadow;  // relay view for observers
    for (const auto& l : config.lanes) shadow.lanes.push_back(LaneState{l.lane_id, Relay::Off, std::nullopt, l.lamp_count});
    std::optional<SolarTimes> no_solar;
    std::vector<Effect> no_effects;

    bool lit = false;
    std::size_t night = 0;
    std::vector<double> lane_watts(config.lanes.size(), 0.0);
    for (std::int64_t k = 0; k < ticks; ++k) {
        const Timestamp now = start + k * config.tick_seconds;
        while (next_fault < faults.size() && faults[next_fault].at <= now) {
            failed = distribute_failures(config.lanes, faults[next_fault].lamps_failed);
            ++next_fault;
        }
        while (night < plan.size() && plan[night].off_at <= now) ++night;
        const bool want = night < plan.size() && plan[night].on_at <= now;
        if (want != lit) {
            lit = want;
            for (const auto& l : config.lanes) {
                result.relay_log.push_back(now.iso() + " operator RELAY lane=" + std::to_string(l.lane_id) + " " +
                                           std::string(relay_name(lit ? Relay::On : Relay::Off)) + " reason=Operator");
            }
        }
        double zone = 0.0;
        for (std::size_t i = 0; i < config.lanes.size(); ++i) {
            lane_watts[i] = lit ? config.lamp_watts * std::max(0, config.lanes[i].lamp_count - failed[i]) : 0.0;
            zone += lane_watts[i];
            shadow.lanes[i].relay = lit ? Relay::On : Relay::Off;
        }
        ledger.record(now, lane_watts);
        if (observer) observer(TickView{now, shadow, no_solar, no_effects, zone});
    }
    result.total_kwh = ledger.total_kwh();
    result.lane_ids = ledger.lane_ids();
    result.lane_kwh = ledger.lane_kwh();
    result.hourly = hourly_curve(ledger);
    return result;
}

inline ScenarioResult run_controlled(const ZoneConfig& config, const Scenario& scenario, const TickObserver& observer) {
    const Mode mode = scenario.kind == ScenarioKind::Proposed ? Mode::FullAuto : scenario.mode.value_or(config.initial_mode);
    const Timestamp start = Timestamp::at(scenario.start_date, TimeOfDay(0));
    ZoneRuntime zone(config, start, mode);
    zone.set_fetch_failures(scenario.fetch_failures);

    auto faults = scenario.fault_script;
    std::stable_sort(faults.begin(), faults.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
    auto sms = scenario.sms_script;
    std::stable_sort(sms.begin(), sms.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
    std::size_t next_fault = 0, next_sms = 0;

    ScenarioResult result;
    result.scenario = std::string(scenario_name(scenario.kind));
    const std::int64_t ticks = scenario.duration_days * kSecondsPerDay / config.tick_seconds;
    for (std::int64_t k = 0; k < ticks; ++k) {
        const Timestamp now = start + k * config.tick_seconds;
        while (next_fault < faults.size() && faults[next_fault].at <= now) zone.set_failed_lamps(faults[next_fault++].lamps_failed);
        while (next_sms < sms.size() && sms[next_sms].at <= now) {
            zone.inject_sms(sms[next_sms].sender, sms[next_sms].body);
            ++next_sms;
        }
        auto effects = zone.step();
        for (const auto& fx : effects) {
            if (fx.as<effect::RelayChange>()) result.relay_log.push_back(format_effect(fx));
            else if (fx.as<effect::AlertSms>()) result.alert_log.push_back(format_effect(fx));
        }
        if (observer) {
            const auto& series = zone.ledger().series();
            observer(TickView{zone.now(), zone.controller(), zone.solar(), effects, series.back().zone_watts});
        }
    }
    result.total_kwh = zone.ledger().total_kwh();
    result.lane_ids = zone.ledger().lane_ids();
    result.lane_kwh = zone.ledger().lane_kwh();
    result.hourly = hourly_curve(zone.ledger());
    result.sms_log = zone.sms_log();
    return result;
}

}  // namespace detail

/// Runs one scenario from local midnight of its start date.
inline SimReport run_scenario(const ZoneConfig& config, const Scenario& scenario, const TickObserver& observer = nullptr) {
    config.validate();
    scenario.validate();
    SimReport report;
    report.zone = config.name;
    report.start_date = scenario.start_date;
    report.days = scenario.duration_days;
    report.tick_seconds = config.tick_seconds;
    report.seed = config.rng_seed;
    if (scenario.kind == ScenarioKind::Conventional) {
        report.scenarios.push_back(detail::run_conventional(config, scenario, observer));
    } else {
        report.scenarios.push_back(detail::run_controlled(config, scenario, observer));
    }
    return report;
}

/// Conventional and Proposed over the same window, with savings.
inline SimReport run_comparison(const ZoneConfig& config, Scenario scenario) {
    scenario.kind = ScenarioKind::Conventional;
    SimReport report = run_scenario(config, scenario);
    scenario.kind = ScenarioKind::Proposed;
    SimReport proposed = run_scenario(config, scenario);
    report.scenarios.push_back(std::move(proposed.scenarios.front()));
    report.savings_percent = savings_percent(report.scenarios[0].total_kwh, report.scenarios[1].total_kwh);
    return report;
}

}  // namespace streetlight

#endif
