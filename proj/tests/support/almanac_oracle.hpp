#pragma once

// Independent sunrise/sunset reference for tests. Sun position from the
// low-precision Astronomical Almanac series (ecliptic longitude, obliquity,
// sidereal time), then a one-minute scan of elevation for the horizon
// crossing, refined by linear interpolation inside the bracketing minute.
// Shares no code with the library's solar routine.

#include <cmath>
#include <cstdint>
#include <optional>

namespace oracle {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRad = kPi / 180.0;
constexpr double kHorizon = -0.833;

inline double norm360(double x) {
    x = std::fmod(x, 360.0);
    return x < 0 ? x + 360.0 : x;
}

// Julian day for a proleptic Gregorian civil date at 0h UT (Meeus ch. 7).
inline double julian_day(int y, int m, int d) {
    if (m <= 2) {
        y -= 1;
        m += 12;
    }
    const int a = y / 100;
    const int b = 2 - a + a / 4;
    return std::floor(365.25 * (y + 4716)) + std::floor(30.6001 * (m + 1)) + d + b - 1524.5;
}

// Solar elevation in degrees at UT instant `jd`.
inline double elevation(double jd, double lat, double lon) {
    const double n = jd - 2451545.0;
    const double L = norm360(280.460 + 0.9856474 * n);
    const double g = norm360(357.528 + 0.9856003 * n) * kRad;
    const double lambda = (L + 1.915 * std::sin(g) + 0.020 * std::sin(2 * g)) * kRad;
    const double eps = (23.439 - 0.0000004 * n) * kRad;
    const double ra = std::atan2(std::cos(eps) * std::sin(lambda), std::cos(lambda));
    const double dec = std::asin(std::sin(eps) * std::sin(lambda));
    const double gmst = norm360(280.46061837 + 360.98564736629 * n);
    const double ha = (gmst + lon) * kRad - ra;
    const double phi = lat * kRad;
    return std::asin(std::sin(phi) * std::sin(dec) + std::cos(phi) * std::cos(dec) * std::cos(ha)) / kRad;
}

struct Pair {
    // Local minutes since midnight of the given date (sunset) and of the next day (sunrise).
    double sunset_minutes;
    double sunrise_next_minutes;
};

// Scans from local noon of the date for the first downward crossing, then on
// for the first upward crossing. Empty when either is missing within 36 h.
inline std::optional<Pair> scan(int y, int m, int d, double lat, double lon, int utc_offset_minutes) {
    const double jd0 = julian_day(y, m, d) - utc_offset_minutes / 1440.0;  // local midnight, in UT
    auto elev = [&](int minute) { return elevation(jd0 + minute / 1440.0, lat, lon) - kHorizon; };
    auto crossing = [&](int from, int to, bool downward) -> std::optional<double> {
        double prev = elev(from);
        for (int k = from + 1; k <= to; ++k) {
            const double cur = elev(k);
            if (downward ? (prev >= 0 && cur < 0) : (prev < 0 && cur >= 0)) return (k - 1) + prev / (prev - cur);
            prev = cur;
        }
        return std::nullopt;
    };
    auto set = crossing(12 * 60, 36 * 60, true);
    if (!set) return std::nullopt;
    auto rise = crossing(static_cast<int>(*set) + 1, 48 * 60, false);
    if (!rise) return std::nullopt;
    return Pair{*set, *rise - 1440.0};
}

// Signed minute difference on the 24 h dial, in (-720, 720].
inline double dial_diff(double a, double b) {
    double d = std::fmod(a - b, 1440.0);
    if (d > 720.0) d -= 1440.0;
    if (d <= -720.0) d += 1440.0;
    return d;
}

}  // namespace oracle
