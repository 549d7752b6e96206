#ifndef STREETLIGHT_COMMAND_HPP
#define STREETLIGHT_COMMAND_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mode.hpp"
#include "solar.hpp"
#include "time.hpp"

namespace streetlight {

inline constexpr std::size_t kMaxSmsBody = 160;

struct SmsMessage {
    std::string sender;
    std::string body;
    Timestamp received_at;
};

namespace cmd {

struct SetLane {
    int lane_id = 0;
    Relay state = Relay::Off;
    bool operator==(const SetLane&) const = default;
};
struct SetMode {
    Mode mode = Mode::SemiAuto;
    bool operator==(const SetMode&) const = default;
};
struct SetTimes {
    TimeOfDay on;
    TimeOfDay off;
    std::optional<SleepWindow> sleep;
    bool operator==(const SetTimes&) const = default;
};
struct Status {
    bool operator==(const Status&) const = default;
};
struct DeviceOn {
    bool operator==(const DeviceOn&) const = default;
};
struct DeviceOff {
    bool operator==(const DeviceOff&) const = default;
};

}  // namespace cmd

using Command = std::variant<cmd::SetLane, cmd::SetMode, cmd::SetTimes, cmd::Status, cmd::DeviceOn, cmd::DeviceOff>;

/// True for commands that change station state (everything except STATUS).
inline bool is_state_changing(const Command& c) { return !std::holds_alternative<cmd::Status>(c); }

struct ParseRejection {
    enum class Kind { Unauthorized, BadSyntax };
    Kind kind = Kind::BadSyntax;
    /// Character offset of the offending token in the trimmed body.
    std::size_t position = 0;

    bool operator==(const ParseRejection&) const = default;
};

inline std::string_view sms_mode_token(Mode m) {
    switch (m) {
        case Mode::Manual: return "MANUAL";
        case Mode::SemiAuto: return "SEMI";
        case Mode::FullAuto: return "AUTO";
    }
    return "?";
}

/// Canonical SMS text for a command; parse_sms(render_command(c)) == c.
inline std::string render_command(const Command& c) {
    struct Renderer {
        std::string operator()(const cmd::SetLane& v) const {
            return "LANE " + std::to_string(v.lane_id) + " " + std::string(relay_name(v.state));
        }
        std::string operator()(const cmd::SetMode& v) const { return "MODE " + std::string(sms_mode_token(v.mode)); }
        std::string operator()(const cmd::SetTimes& v) const {
            std::string s = "SETTIME " + v.on.str() + " " + v.off.str();
            if (v.sleep) s += " SLEEP " + v.sleep->start.str() + " " + v.sleep->end.str();
            return s;
        }
        std::string operator()(const cmd::Status&) const { return "STATUS"; }
        std::string operator()(const cmd::DeviceOn&) const { return "DEVICE ON"; }
        std::string operator()(const cmd::DeviceOff&) const { return "DEVICE OFF"; }
    };
    return std::visit(Renderer{}, c);
}

namespace detail {

struct Token {
    std::string upper;
    std::size_t pos;
};

inline bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace detail

/// Parses a command body without sender checks. Grammar (case-insensitive,
/// tokens separated by exactly one space):
///   LANE <n> ON|OFF | MODE MANUAL|SEMI|AUTO | STATUS | DEVICE ON|OFF
///   SETTIME <HH:MM> <HH:MM> [SLEEP <HH:MM> <HH:MM>]
inline std::variant<Command, ParseRejection> parse_command_text(std::string_view raw) {
    using Result = std::variant<Command, ParseRejection>;
    auto bad = [](std::size_t pos) -> Result { return ParseRejection{ParseRejection::Kind::BadSyntax, pos}; };

    std::size_t first = 0, last = raw.size();
    while (first < last && detail::is_blank(raw[first])) ++first;
    while (last > first && detail::is_blank(raw[last - 1])) --last;
    std::string_view body = raw.substr(first, last - first);
    if (body.empty()) return bad(0);
    if (body.size() > kMaxSmsBody) return bad(kMaxSmsBody);

    std::vector<detail::Token> tokens;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == ' ') {
            if (i == start) return bad(i);  // doubled separator
            std::string up(body.substr(start, i - start));
            for (char& ch : up) {
                if (static_cast<unsigned char>(ch) < 0x21 || static_cast<unsigned char>(ch) > 0x7E) {
                    return bad(start + static_cast<std::size_t>(&ch - up.data()));
                }
                ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            }
            tokens.push_back({std::move(up), start});
            start = i + 1;
        }
    }

    auto end_pos = [&](std::size_t n) { return n < tokens.size() ? tokens[n].pos : body.size(); };
    auto expect_count = [&](std::size_t n) -> std::optional<std::size_t> {
        if (tokens.size() < n) return body.size();
        if (tokens.size() > n) return tokens[n].pos;
        return std::nullopt;
    };
    auto on_off = [](const std::string& t) -> std::optional<Relay> {
        if (t == "ON") return Relay::On;
        if (t == "OFF") return Relay::Off;
        return std::nullopt;
    };

    const std::string& verb = tokens[0].upper;
    if (verb == "LANE") {
        if (tokens.size() < 2) return bad(end_pos(1));
        const std::string& num = tokens[1].upper;
        if (num.empty() || num.size() > 3 || !std::all_of(num.begin(), num.end(), ::isdigit)) return bad(tokens[1].pos);
        int lane = std::stoi(num);
        if (lane <= 0) return bad(tokens[1].pos);
        if (tokens.size() < 3) return bad(end_pos(2));
        auto state = on_off(tokens[2].upper);
        if (!state) return bad(tokens[2].pos);
        if (auto p = expect_count(3)) return bad(*p);
        return Command{cmd::SetLane{lane, *state}};
    }
    if (verb == "MODE") {
        if (tokens.size() < 2) return bad(end_pos(1));
        const std::string& m = tokens[1].upper;
        std::optional<Mode> mode;
        if (m == "MANUAL") mode = Mode::Manual;
        else if (m == "SEMI") mode = Mode::SemiAuto;
        else if (m == "AUTO") mode = Mode::FullAuto;
        if (!mode) return bad(tokens[1].pos);
        if (auto p = expect_count(2)) return bad(*p);
        return Command{cmd::SetMode{*mode}};
    }
    if (verb == "SETTIME") {
        auto time_at = [&](std::size_t n) -> std::optional<TimeOfDay> {
            if (n >= tokens.size()) return std::nullopt;
            return TimeOfDay::parse(tokens[n].upper);
        };
        auto on = time_at(1);
        if (!on) return bad(end_pos(1));
        auto off = time_at(2);
        if (!off) return bad(end_pos(2));
        if (tokens.size() == 3) return Command{cmd::SetTimes{*on, *off, std::nullopt}};
        if (tokens[3].upper != "SLEEP") return bad(tokens[3].pos);
        auto s0 = time_at(4);
        if (!s0) return bad(end_pos(4));
        auto s1 = time_at(5);
        if (!s1) return bad(end_pos(5));
        if (auto p = expect_count(6)) return bad(*p);
        return Command{cmd::SetTimes{*on, *off, SleepWindow{*s0, *s1}}};
    }
    if (verb == "STATUS") {
        if (auto p = expect_count(1)) return bad(*p);
        return Command{cmd::Status{}};
    }
    if (verb == "DEVICE") {
        if (tokens.size() < 2) return bad(end_pos(1));
        auto state = on_off(tokens[1].upper);
        if (!state) return bad(tokens[1].pos);
        if (auto p = expect_count(2)) return bad(*p);
        if (*state == Relay::On) return Command{cmd::DeviceOn{}};
        return Command{cmd::DeviceOff{}};
    }
    return bad(0);
}

/// Sender whitelist check, then grammar.
inline std::variant<Command, ParseRejection> parse_sms(const SmsMessage& msg, const std::set<std::string>& whitelist) {
    if (!whitelist.contains(msg.sender)) return ParseRejection{ParseRejection::Kind::Unauthorized, 0};
    return parse_command_text(msg.body);
}

}  // namespace streetlight

#endif
