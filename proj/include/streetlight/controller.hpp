#ifndef STREETLIGHT_CONTROLLER_HPP
#define STREETLIGHT_CONTROLLER_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "command.hpp"
#include "modem.hpp"
#include "mode.hpp"
#include "power.hpp"
#include "solar.hpp"
#include "time.hpp"

namespace streetlight {

struct LaneOverride {
    Relay state = Relay::Off;  // ForcedOn / ForcedOff
    Timestamp expires;

    bool operator==(const LaneOverride&) const = default;
};

struct LaneState {
    int lane_id = 0;
    Relay relay = Relay::Off;
    std::optional<LaneOverride> override;
    int lamp_count = 0;

    bool override_active(Timestamp now) const { return override && now < override->expires; }

    bool operator==(const LaneState&) const = default;
};

inline double expected_zone_power(std::span<const LaneState> lanes, double lamp_watts) {
    double w = 0.0;
    for (const auto& lane : lanes) {
        if (lane.relay == Relay::On) w += lamp_watts * lane.lamp_count;
    }
    return w;
}

struct ControllerConfig {
    double lamp_watts = 25.0;
    FaultPolicy fault_policy;
    std::string authority_number;

    bool operator==(const ControllerConfig&) const = default;
};

struct ControllerState {
    Mode mode = Mode::FullAuto;
    std::vector<LaneState> lanes;
    bool device_on = true;
    std::optional<Timestamp> last_fault_alert;  // only one fault kind exists
    Timestamp clock;
    ScheduleTable schedule;
    FaultEpisodeState episode;
    ControllerConfig config;

    LaneState* find_lane(int id) {
        auto it = std::find_if(lanes.begin(), lanes.end(), [id](const LaneState& l) { return l.lane_id == id; });
        return it == lanes.end() ? nullptr : &*it;
    }

    bool operator==(const ControllerState&) const = default;
};

/// Initial state with every lane Off; rejects empty or duplicate lane lists.
inline ControllerState make_controller_state(Mode mode, std::vector<LaneState> lanes, ScheduleTable schedule,
                                             ControllerConfig config, Timestamp clock) {
    if (lanes.empty()) throw std::invalid_argument("controller needs at least one lane");
    std::set<int> ids;
    for (const auto& l : lanes) {
        if (!ids.insert(l.lane_id).second) throw std::invalid_argument("duplicate lane id " + std::to_string(l.lane_id));
    }
    if (auto err = schedule.validation_error()) throw std::invalid_argument("schedule: " + *err);
    if (auto err = config.fault_policy.validation_error()) throw std::invalid_argument("fault policy: " + *err);
    ControllerState s;
    s.mode = mode;
    s.lanes = std::move(lanes);
    s.schedule = schedule;
    s.config = std::move(config);
    s.clock = clock;
    return s;
}

enum class Reason { Schedule, Solar, Sleep, Override, Manual };

constexpr std::string_view reason_name(Reason r) {
    switch (r) {
        case Reason::Schedule: return "Schedule";
        case Reason::Solar: return "Solar";
        case Reason::Sleep: return "Sleep";
        case Reason::Override: return "Override";
        case Reason::Manual: return "Manual";
    }
    return "?";
}

struct ScheduleDecision {
    int lane_id = 0;
    Relay desired = Relay::Off;
    Reason reason = Reason::Schedule;

    bool operator==(const ScheduleDecision&) const = default;
};

/// Relay wanted for one lane. Night membership is [on_time, off_time) with
/// wrap-around midnight; a sleep window forces Off; an unexpired override wins.
inline std::variant<ScheduleDecision, MissingTimes> desired_lane_state(Mode mode, Timestamp now, const EffectiveTimes& times,
                                                                       const LaneState& lane) {
    if (lane.override_active(now)) return ScheduleDecision{lane.lane_id, lane.override->state, Reason::Override};
    if (mode == Mode::Manual) return ScheduleDecision{lane.lane_id, lane.relay, Reason::Manual};
    if (mode == Mode::FullAuto && times.provenance != Provenance::Solar) return MissingTimes{now.date()};
    const TimeOfDay tod = now.time_of_day();
    if (times.sleep_window && in_interval(tod, times.sleep_window->start, times.sleep_window->end)) {
        return ScheduleDecision{lane.lane_id, Relay::Off, Reason::Sleep};
    }
    const Relay want = in_interval(tod, times.on_time, times.off_time) ? Relay::On : Relay::Off;
    return ScheduleDecision{lane.lane_id, want, mode == Mode::FullAuto ? Reason::Solar : Reason::Schedule};
}

/// A command together with who sent it: a phone number, or "api".
struct CommandEnvelope {
    Command command;
    std::string origin;
};

enum class Phase { Command, Fault, Schedule, Device };

constexpr std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Command: return "command";
        case Phase::Fault: return "fault";
        case Phase::Schedule: return "schedule";
        case Phase::Device: return "device";
    }
    return "?";
}

namespace effect {

struct Ack {
    std::string origin;
    std::string command;
    std::string reply;
};
struct Rejection {
    std::string origin;
    std::string command;
    std::string reason;
};
struct RelayChange {
    int lane_id = 0;
    Relay state = Relay::Off;
    Reason reason = Reason::Schedule;
};
struct AlertSms {
    std::string recipient;
    FaultAlert alert;
    std::string body;
};
struct Log {
    std::string detail;
};

}  // namespace effect

struct Effect {
    Phase phase = Phase::Command;
    Timestamp at;
    std::variant<effect::Ack, effect::Rejection, effect::RelayChange, effect::AlertSms, effect::Log> payload;

    template <class T>
    const T* as() const {
        return std::get_if<T>(&payload);
    }
};

/// One effect-log line: "<iso8601> <phase> <detail>".
inline std::string format_effect(const Effect& e) {
    struct Detail {
        std::string operator()(const effect::Ack& a) const {
            return "ACK origin=" + a.origin + " cmd=\"" + a.command + "\" reply=\"" + a.reply + "\"";
        }
        std::string operator()(const effect::Rejection& r) const {
            return "REJECT origin=" + r.origin + " cmd=\"" + r.command + "\" reason=\"" + r.reason + "\"";
        }
        std::string operator()(const effect::RelayChange& r) const {
            return "RELAY lane=" + std::to_string(r.lane_id) + " " + std::string(relay_name(r.state)) +
                   " reason=" + std::string(reason_name(r.reason));
        }
        std::string operator()(const effect::AlertSms& a) const {
            return "ALERT to=" + a.recipient + " body=\"" + a.body + "\"";
        }
        std::string operator()(const effect::Log& l) const { return "LOG " + l.detail; }
    };
    return e.at.iso() + " " + std::string(phase_name(e.phase)) + " " + std::visit(Detail{}, e.payload);
}

/// "MODE AUTO DEVICE ON L1 ON L2 OFF* ..." trimmed to one SMS; * marks an override.
inline std::string status_text(const ControllerState& s) {
    std::string out = "MODE " + std::string(sms_mode_token(s.mode)) + " DEVICE " + (s.device_on ? "ON" : "OFF");
    for (const auto& l : s.lanes) {
        out += " L" + std::to_string(l.lane_id) + " " + std::string(relay_name(l.relay));
        if (l.override_active(s.clock)) out += "*";
    }
    out += " SET " + s.schedule.preset_on.str() + "-" + s.schedule.preset_off.str();
    if (out.size() > kMaxSmsBody) out.resize(kMaxSmsBody);
    return out;
}

/// First schedule boundary strictly after `now`; an override lapses there.
inline Timestamp next_boundary(Timestamp now, const EffectiveTimes& times) {
    Timestamp best = next_occurrence(now, times.on_time);
    best = std::min(best, next_occurrence(now, times.off_time));
    if (times.sleep_window) {
        best = std::min(best, next_occurrence(now, times.sleep_window->start));
        best = std::min(best, next_occurrence(now, times.sleep_window->end));
    }
    return best;
}

/// `context` supplies the schedule used to place override expiry.
inline std::pair<ControllerState, Effect> apply_command(ControllerState state, const CommandEnvelope& env,
                                                        const EffectiveTimes& context) {
    const std::string text = render_command(env.command);
    Effect fx{Phase::Command, state.clock, effect::Ack{env.origin, text, "OK " + text}};
    auto reject = [&](std::string reason) {
        fx.payload = effect::Rejection{env.origin, text, std::move(reason)};
    };

    struct Visitor {
        ControllerState& s;
        const EffectiveTimes& ctx;
        Effect& fx;
        decltype(reject)& rej;

        void operator()(const cmd::SetLane& c) {
            LaneState* lane = s.find_lane(c.lane_id);
            if (!lane) return rej("no such lane");
            lane->override = LaneOverride{c.state, next_boundary(s.clock, ctx)};
        }
        void operator()(const cmd::SetMode& c) { s.mode = c.mode; }
        void operator()(const cmd::SetTimes& c) {
            if (c.on == c.off) return rej("empty interval");
            if (c.sleep && c.sleep->start == c.sleep->end) return rej("empty sleep window");
            s.schedule.preset_on = c.on;
            s.schedule.preset_off = c.off;
            s.schedule.sleep_window = c.sleep;
        }
        void operator()(const cmd::Status&) { std::get<effect::Ack>(fx.payload).reply = status_text(s); }
        void operator()(const cmd::DeviceOn&) { s.device_on = true; }
        void operator()(const cmd::DeviceOff&) { s.device_on = false; }
    };
    std::visit(Visitor{state, context, fx, reject}, env.command);
    return {std::move(state), std::move(fx)};
}

struct TickInputs {
    Timestamp now;
    std::vector<CommandEnvelope> commands;
    std::optional<PowerReading> power;
    /// Latest acquired sunset/sunrise pair, if any.
    std::optional<SolarTimes> solar;
};

struct TickResult {
    ControllerState state;
    std::vector<Effect> effects;
};

namespace detail {

/// Effective times for this tick; FullAuto without a current solar pair
/// falls back to the preset pair and reports it.
inline std::pair<EffectiveTimes, bool> times_for_tick(const ControllerState& s, const std::optional<SolarTimes>& solar,
                                                      Timestamp now) {
    auto t = effective_times(s.mode, s.schedule, solar, operative_solar_date(now, s.schedule.fetch_time));
    if (auto* et = std::get_if<EffectiveTimes>(&t)) return {*et, false};
    auto preset = effective_times(Mode::SemiAuto, s.schedule, std::nullopt, now.date());
    return {std::get<EffectiveTimes>(preset), true};
}

}  // namespace detail

/// One pass of the station loop: commands, fault check, schedule, device check.
inline TickResult control_tick(ControllerState state, const TickInputs& in) {
    if (!state.device_on) return {std::move(state), {}};
    std::vector<Effect> effects;
    const Timestamp now = in.now;
    state.clock = now;

    // (1) commands
    {
        auto [ctx, fallback] = detail::times_for_tick(state, in.solar, now);
        (void)fallback;
        for (const auto& env : in.commands) {
            auto [next, fx] = apply_command(std::move(state), env, ctx);
            state = std::move(next);
            effects.push_back(std::move(fx));
        }
    }

    if (state.device_on) {
        // (2) fault evaluation against the load the current relays should draw
        if (in.power) {
            const double expected = expected_zone_power(state.lanes, state.config.lamp_watts);
            auto [episode, alert] = evaluate_fault(*in.power, expected, state.config.fault_policy, state.episode);
            state.episode = episode;
            if (alert) {
                state.last_fault_alert = alert->raised_at;
                effects.push_back(Effect{Phase::Fault, now,
                                         effect::AlertSms{state.config.authority_number, *alert, format_alert_body(*alert)}});
            }
        }

        // (3) schedule evaluation
        auto [times, fallback] = detail::times_for_tick(state, in.solar, now);
        const Mode mode = fallback ? Mode::SemiAuto : state.mode;
        if (fallback) {
            effects.push_back(Effect{Phase::Schedule, now,
                                     effect::Log{"solar times missing for " +
                                                 format_date(operative_solar_date(now, state.schedule.fetch_time)) +
                                                 "; using preset schedule"}});
        }
        for (auto& lane : state.lanes) {
            if (lane.override && !lane.override_active(now)) lane.override.reset();
            auto decision = desired_lane_state(mode, now, times, lane);
            const auto& d = std::get<ScheduleDecision>(decision);
            if (d.desired != lane.relay) {
                lane.relay = d.desired;
                effects.push_back(Effect{Phase::Schedule, now, effect::RelayChange{lane.lane_id, d.desired, d.reason}});
            }
        }
    }

    // (4) device-on check
    if (!state.device_on) effects.push_back(Effect{Phase::Device, now, effect::Log{"device off; control loop halted"}});
    return {std::move(state), std::move(effects)};
}

}  // namespace streetlight

#endif
