#ifndef STREETLIGHT_TIME_HPP
#define STREETLIGHT_TIME_HPP

#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace streetlight {

inline constexpr int kMinutesPerDay = 1440;
inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Minute-resolution wall-clock time within one local day.
class TimeOfDay {
public:
    constexpr TimeOfDay() = default;

    explicit constexpr TimeOfDay(int minutes_since_midnight) : minutes_(minutes_since_midnight) {
        if (minutes_since_midnight < 0 || minutes_since_midnight >= kMinutesPerDay) {
            throw std::out_of_range("TimeOfDay: minutes outside [0, 1440)");
        }
    }

    static constexpr TimeOfDay hm(int hour, int minute) {
        if (hour < 0 || hour > 23 || minute < 0 || minute > 59) {
            throw std::out_of_range("TimeOfDay: bad hour/minute");
        }
        return TimeOfDay(hour * 60 + minute);
    }

    /// Wraps any integer minute count into the day.
    static constexpr TimeOfDay wrap(long long minutes) {
        long long m = minutes % kMinutesPerDay;
        if (m < 0) m += kMinutesPerDay;
        return TimeOfDay(static_cast<int>(m));
    }

    /// Strict "HH:MM", 24-hour.
    static std::optional<TimeOfDay> parse(std::string_view text) {
        if (text.size() != 5 || text[2] != ':') return std::nullopt;
        auto digit = [](char c) { return c >= '0' && c <= '9'; };
        if (!digit(text[0]) || !digit(text[1]) || !digit(text[3]) || !digit(text[4])) return std::nullopt;
        int h = (text[0] - '0') * 10 + (text[1] - '0');
        int m = (text[3] - '0') * 10 + (text[4] - '0');
        if (h > 23 || m > 59) return std::nullopt;
        return TimeOfDay(h * 60 + m);
    }

    constexpr int minutes() const { return minutes_; }
    constexpr int hour() const { return minutes_ / 60; }
    constexpr int minute() const { return minutes_ % 60; }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%02d:%02d", hour(), minute());
        return buf;
    }

    constexpr auto operator<=>(const TimeOfDay&) const = default;

private:
    int minutes_ = 0;
};

/// Membership in the half-open interval [start, end) with wrap-around midnight.
/// An interval with start == end is empty.
constexpr bool in_interval(TimeOfDay now, TimeOfDay start, TimeOfDay end) {
    if (start == end) return false;
    if (start < end) return now >= start && now < end;
    return now >= start || now < end;
}

using CivilDate = std::chrono::year_month_day;

inline CivilDate make_date(int y, unsigned m, unsigned d) {
    CivilDate date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) throw std::invalid_argument("invalid civil date");
    return date;
}

inline std::int64_t days_since_epoch(CivilDate date) {
    return std::chrono::sys_days{date}.time_since_epoch().count();
}

inline CivilDate date_from_days(std::int64_t days) {
    return CivilDate{std::chrono::sys_days{std::chrono::days{days}}};
}

inline CivilDate add_days(CivilDate date, std::int64_t n) {
    return date_from_days(days_since_epoch(date) + n);
}

inline std::string format_date(CivilDate date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

/// "YYYY-MM-DD"
inline std::optional<CivilDate> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
    }
    y = std::stoi(std::string(text.substr(0, 4)));
    m = static_cast<unsigned>(std::stoi(std::string(text.substr(5, 2))));
    d = static_cast<unsigned>(std::stoi(std::string(text.substr(8, 2))));
    CivilDate date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) return std::nullopt;
    return date;
}

/// Local civil date-time as seconds since 1970-01-01T00:00 local.
/// The station runs on a fixed UTC offset, so local seconds are a total order.
struct Timestamp {
    std::int64_t seconds = 0;

    static Timestamp at(CivilDate date, TimeOfDay tod, int second = 0) {
        return Timestamp{days_since_epoch(date) * kSecondsPerDay + tod.minutes() * 60LL + second};
    }

    std::int64_t day_number() const {
        std::int64_t d = seconds / kSecondsPerDay;
        if (seconds % kSecondsPerDay < 0) --d;
        return d;
    }
    std::int64_t second_of_day() const { return seconds - day_number() * kSecondsPerDay; }

    CivilDate date() const { return date_from_days(day_number()); }
    TimeOfDay time_of_day() const { return TimeOfDay(static_cast<int>(second_of_day() / 60)); }

    Timestamp operator+(std::int64_t s) const { return Timestamp{seconds + s}; }
    std::int64_t operator-(Timestamp other) const { return seconds - other.seconds; }

    /// ISO 8601 without zone suffix: "YYYY-MM-DDTHH:MM:SS".
    std::string iso() const {
        std::int64_t sod = second_of_day();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", format_date(date()).c_str(),
                      static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60),
                      static_cast<int>(sod % 60));
        return buf;
    }

    /// Accepts "YYYY-MM-DDTHH:MM" or "YYYY-MM-DDTHH:MM:SS".
    static std::optional<Timestamp> parse(std::string_view text) {
        if (text.size() != 16 && text.size() != 19) return std::nullopt;
        if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
        auto date = parse_date(text.substr(0, 10));
        auto tod = TimeOfDay::parse(text.substr(11, 5));
        if (!date || !tod) return std::nullopt;
        int sec = 0;
        if (text.size() == 19) {
            if (text[16] != ':' || text[17] < '0' || text[17] > '5' || text[18] < '0' || text[18] > '9') {
                return std::nullopt;
            }
            sec = (text[17] - '0') * 10 + (text[18] - '0');
        }
        return at(*date, *tod, sec);
    }

    constexpr auto operator<=>(const Timestamp&) const = default;
};

/// Next instant strictly after `from` whose wall-clock time equals `tod` at second 0.
inline Timestamp next_occurrence(Timestamp from, TimeOfDay tod) {
    Timestamp candidate = Timestamp{from.day_number() * kSecondsPerDay + tod.minutes() * 60LL};
    if (candidate <= from) candidate = candidate + kSecondsPerDay;
    return candidate;
}

/// DS1302-style real-time clock: civil time that advances by ticks, with an
/// optional linear drift in seconds per day.
class Rtc {
public:
    explicit Rtc(Timestamp start, double drift_seconds_per_day = 0.0)
        : reference_(start), reading_(start), drift_(drift_seconds_per_day) {}

    /// Advances by dt seconds of true time and returns the clock reading.
    Timestamp tick(std::int64_t dt_seconds) {
        if (dt_seconds <= 0) throw std::invalid_argument("Rtc::tick: dt must be positive");
        elapsed_ += dt_seconds;
        double drift = drift_ * static_cast<double>(elapsed_) / static_cast<double>(kSecondsPerDay);
        reading_ = Timestamp{reference_.seconds + elapsed_ + static_cast<std::int64_t>(std::llround(drift))};
        return reading_;
    }

    Timestamp now() const { return reading_; }
    Timestamp true_time() const { return reference_ + elapsed_; }

    /// Operator sets the time (keypad or SETTIME flow); drift accounting restarts.
    void set(Timestamp t) {
        reference_ = t;
        reading_ = t;
        elapsed_ = 0;
    }

private:
    Timestamp reference_;
    Timestamp reading_;
    double drift_;
    std::int64_t elapsed_ = 0;
};

/// Functional form: advance a civil date-time by dt seconds.
inline Timestamp rtc_tick(Timestamp clock, std::int64_t dt_seconds) {
    if (dt_seconds <= 0) throw std::invalid_argument("rtc_tick: dt must be positive");
    return clock + dt_seconds;
}

}  // namespace streetlight

#endif
