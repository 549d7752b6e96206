#ifndef STREETLIGHT_SOLAR_HPP
#define STREETLIGHT_SOLAR_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include <json.hpp>

#include "mode.hpp"
#include "time.hpp"

namespace streetlight {

struct GeoLocation {
    double latitude = 0.0;
    double longitude = 0.0;
    int utc_offset_minutes = 0;

    static GeoLocation make(double lat, double lon, int utc_offset_minutes) {
        if (!(lat >= -90.0 && lat <= 90.0)) throw std::out_of_range("latitude outside [-90, 90]");
        if (!(lon >= -180.0 && lon <= 180.0)) throw std::out_of_range("longitude outside [-180, 180]");
        if (utc_offset_minutes < -840 || utc_offset_minutes > 840) {
            throw std::out_of_range("utc offset outside [-840, 840] minutes");
        }
        return GeoLocation{lat, lon, utc_offset_minutes};
    }

    bool operator==(const GeoLocation&) const = default;
};

enum class SolarSource { Computed, Fetched };

inline std::string_view solar_source_name(SolarSource s) {
    return s == SolarSource::Computed ? "Computed" : "Fetched";
}

/// Sunset of `date` paired with sunrise of the following day.
struct SolarTimes {
    CivilDate date;
    TimeOfDay sunset;
    TimeOfDay sunrise_next;
    SolarSource source = SolarSource::Computed;
    Timestamp acquired_at;

    bool operator==(const SolarTimes&) const = default;
};

enum class NoEvent { PolarDay, PolarNight };

inline std::string_view no_event_name(NoEvent e) {
    return e == NoEvent::PolarDay ? "PolarDay" : "PolarNight";
}

namespace detail {

inline constexpr double kDeg = std::numbers::pi / 180.0;
/// Apparent sunrise/sunset elevation: refraction plus solar semi-diameter.
inline constexpr double kHorizonElevationDeg = -0.833;

struct SolarGeometry {
    double declination_deg;
    double equation_of_time_min;
};

/// Low-order solar ephemeris in Julian centuries from J2000.
inline SolarGeometry solar_geometry(double julian_day) {
    const double jc = (julian_day - 2451545.0) / 36525.0;
    const double mean_long = std::fmod(280.46646 + jc * (36000.76983 + jc * 0.0003032), 360.0);
    const double mean_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
    const double ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
    const double m = mean_anom * kDeg;
    const double center = std::sin(m) * (1.914602 - jc * (0.004817 + 0.000014 * jc)) +
                          std::sin(2 * m) * (0.019993 - 0.000101 * jc) + std::sin(3 * m) * 0.000289;
    const double omega = (125.04 - 1934.136 * jc) * kDeg;
    const double app_long = (mean_long + center - 0.00569 - 0.00478 * std::sin(omega)) * kDeg;
    const double obliq0 = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
    const double obliq = (obliq0 + 0.00256 * std::cos(omega)) * kDeg;
    const double decl = std::asin(std::sin(obliq) * std::sin(app_long));
    const double y = std::pow(std::tan(obliq / 2.0), 2);
    const double l0 = mean_long * kDeg;
    const double eot = y * std::sin(2 * l0) - 2 * ecc * std::sin(m) + 4 * ecc * y * std::sin(m) * std::cos(2 * l0) -
                       0.5 * y * y * std::sin(4 * l0) - 1.25 * ecc * ecc * std::sin(2 * m);
    return {decl / kDeg, 4.0 * eot / kDeg};
}

inline double julian_day_at_local_midnight(CivilDate date, int utc_offset_minutes) {
    // 1970-01-01T00:00Z is JD 2440587.5
    return 2440587.5 + static_cast<double>(days_since_epoch(date)) - utc_offset_minutes / 1440.0;
}

/// Local minutes (relative to midnight of `date`) of sunrise (sign -1) or sunset (+1).
inline std::variant<double, NoEvent> horizon_crossing(const GeoLocation& loc, CivilDate date, int sign) {
    const double base_jd = julian_day_at_local_midnight(date, loc.utc_offset_minutes);
    const double lat = loc.latitude * kDeg;
    double local_min = 720.0;
    // Re-evaluating the ephemeris at the event time converges in a few passes.
    for (int pass = 0; pass < 4; ++pass) {
        SolarGeometry g = solar_geometry(base_jd + local_min / 1440.0);
        const double decl = g.declination_deg * kDeg;
        const double cos_ha = (std::sin(kHorizonElevationDeg * kDeg) - std::sin(lat) * std::sin(decl)) /
                              (std::cos(lat) * std::cos(decl));
        if (cos_ha > 1.0) return NoEvent::PolarNight;
        if (cos_ha < -1.0) return NoEvent::PolarDay;
        const double ha_deg = std::acos(cos_ha) / kDeg;
        const double noon = 720.0 - 4.0 * loc.longitude - g.equation_of_time_min + loc.utc_offset_minutes;
        local_min = noon + sign * 4.0 * ha_deg;
    }
    return local_min;
}

}  // namespace detail

/// Sunset on `date` and sunrise on the next day, local time, nearest minute.
inline std::variant<SolarTimes, NoEvent> compute_solar_times(const GeoLocation& loc, CivilDate date,
                                                             Timestamp acquired_at = {}) {
    const int year = static_cast<int>(date.year());
    if (year < 1900 || year > 2100) throw std::out_of_range("compute_solar_times: date outside [1900, 2100]");
    auto set = detail::horizon_crossing(loc, date, +1);
    if (auto* e = std::get_if<NoEvent>(&set)) return *e;
    auto rise = detail::horizon_crossing(loc, add_days(date, 1), -1);
    if (auto* e = std::get_if<NoEvent>(&rise)) return *e;
    return SolarTimes{date,
                      TimeOfDay::wrap(std::llround(std::get<double>(set))),
                      TimeOfDay::wrap(std::llround(std::get<double>(rise))),
                      SolarSource::Computed,
                      acquired_at};
}

struct SleepWindow {
    TimeOfDay start;
    TimeOfDay end;
    bool operator==(const SleepWindow&) const = default;
};

struct ScheduleTable {
    TimeOfDay preset_on = TimeOfDay::hm(18, 0);
    TimeOfDay preset_off = TimeOfDay::hm(6, 0);
    std::optional<SleepWindow> sleep_window;
    TimeOfDay fetch_time = TimeOfDay::hm(10, 0);

    std::optional<std::string> validation_error() const {
        if (preset_on == preset_off) return "empty interval";
        if (sleep_window && sleep_window->start == sleep_window->end) return "empty sleep window";
        if (fetch_time < TimeOfDay::hm(8, 0) || fetch_time > TimeOfDay::hm(16, 0)) {
            return "fetch time outside 08:00-16:00";
        }
        return std::nullopt;
    }

    bool operator==(const ScheduleTable&) const = default;
};

enum class Provenance { Solar, Preset };

struct EffectiveTimes {
    TimeOfDay on_time;
    TimeOfDay off_time;
    std::optional<SleepWindow> sleep_window;
    Provenance provenance = Provenance::Preset;

    bool operator==(const EffectiveTimes&) const = default;
};

struct MissingTimes {
    CivilDate wanted;
};

/// The solar pair in force at `now`: the pair acquired on a day governs from
/// that day's fetch time until the next day's fetch time, so the early
/// morning still belongs to the previous day's sunset/sunrise pair.
inline CivilDate operative_solar_date(Timestamp now, TimeOfDay fetch_time) {
    CivilDate today = now.date();
    return now.time_of_day() >= fetch_time ? today : add_days(today, -1);
}

inline std::variant<EffectiveTimes, MissingTimes> effective_times(Mode mode, const ScheduleTable& table,
                                                                  const std::optional<SolarTimes>& cache,
                                                                  CivilDate today) {
    if (mode == Mode::FullAuto) {
        if (!cache || cache->date != today) return MissingTimes{today};
        return EffectiveTimes{cache->sunset, cache->sunrise_next, table.sleep_window, Provenance::Solar};
    }
    return EffectiveTimes{table.preset_on, table.preset_off, table.sleep_window, Provenance::Preset};
}

enum class FetchError { Timeout, BadStatus, BadBody };

inline std::string_view fetch_error_name(FetchError e) {
    switch (e) {
        case FetchError::Timeout: return "Timeout";
        case FetchError::BadStatus: return "BadStatus";
        case FetchError::BadBody: return "BadBody";
    }
    return "?";
}

struct SolarPair {
    TimeOfDay sunset;
    TimeOfDay sunrise;
};

/// Parses the fetch response body: {"sunset":"HH:MM","sunrise":"HH:MM"}.
inline std::variant<SolarPair, FetchError> parse_solar_body(std::string_view body) {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return FetchError::BadBody;
    auto field = [&](const char* key) -> std::optional<TimeOfDay> {
        auto it = doc.find(key);
        if (it == doc.end() || !it->is_string()) return std::nullopt;
        return TimeOfDay::parse(it->get<std::string>());
    };
    auto sunset = field("sunset");
    auto sunrise = field("sunrise");
    if (!sunset || !sunrise) return FetchError::BadBody;
    return SolarPair{*sunset, *sunrise};
}

/// Renders the response body with keys in wire order.
inline std::string format_solar_body(TimeOfDay sunset, TimeOfDay sunrise) {
    return "{\"sunset\":\"" + sunset.str() + "\",\"sunrise\":\"" + sunrise.str() + "\"}";
}

}  // namespace streetlight

#endif
