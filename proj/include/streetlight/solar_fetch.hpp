#ifndef STREETLIGHT_SOLAR_FETCH_HPP
#define STREETLIGHT_SOLAR_FETCH_HPP

#include <chrono>
#include <cstdio>
#include <mutex>
#include <string>
#include <variant>

#include <httplib.h>

#include "solar.hpp"

namespace streetlight {

inline std::string solar_query_path(const GeoLocation& loc, CivilDate date) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "/solar?lat=%.6f&lon=%.6f&date=%s", loc.latitude, loc.longitude,
                  format_date(date).c_str());
    return buf;
}

/// HTTP client for the daily sunset/sunrise download. One request at a time;
/// cancel() may be called from another thread to abort it.
class SolarFetchClient {
public:
    /// `endpoint` is scheme://host[:port], e.g. "http://127.0.0.1:8081".
    explicit SolarFetchClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}

    std::variant<SolarTimes, FetchError> fetch(const GeoLocation& loc, CivilDate date, Timestamp now,
                                               std::chrono::milliseconds deadline = std::chrono::seconds(5)) {
        httplib::Client client(endpoint_);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(deadline);
        auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(deadline - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        {
            std::lock_guard lock(mutex_);
            active_ = &client;
        }
        auto res = client.Get(solar_query_path(loc, date));
        {
            std::lock_guard lock(mutex_);
            active_ = nullptr;
        }
        if (!res) return FetchError::Timeout;
        if (res->status != 200) return FetchError::BadStatus;
        auto parsed = parse_solar_body(res->body);
        if (auto* err = std::get_if<FetchError>(&parsed)) return *err;
        const auto& pair = std::get<SolarPair>(parsed);
        return SolarTimes{date, pair.sunset, pair.sunrise, SolarSource::Fetched, now};
    }

    void cancel() {
        std::lock_guard lock(mutex_);
        if (active_) active_->stop();
    }

private:
    std::string endpoint_;
    std::mutex mutex_;
    httplib::Client* active_ = nullptr;
};

inline std::variant<SolarTimes, FetchError> fetch_solar_times(const std::string& endpoint, const GeoLocation& loc,
                                                              CivilDate date, Timestamp now,
                                                              std::chrono::milliseconds deadline = std::chrono::seconds(5)) {
    SolarFetchClient client(endpoint);
    return client.fetch(loc, date, now, deadline);
}

/// Response for the stub endpoint. The stub serves one station, so the UTC
/// offset comes from its configuration rather than the query.
inline httplib::Server::Handler solar_stub_handler(int utc_offset_minutes) {
    return [utc_offset_minutes](const httplib::Request& req, httplib::Response& res) {
        try {
            double lat = std::stod(req.get_param_value("lat"));
            double lon = std::stod(req.get_param_value("lon"));
            auto date = parse_date(req.get_param_value("date"));
            if (!date) throw std::invalid_argument("date");
            auto loc = GeoLocation::make(lat, lon, utc_offset_minutes);
            auto times = compute_solar_times(loc, *date);
            if (auto* st = std::get_if<SolarTimes>(&times)) {
                res.set_content(format_solar_body(st->sunset, st->sunrise_next), "application/json");
            } else {
                res.status = 422;
                res.set_content(std::string("{\"error\":\"") + std::string(no_event_name(std::get<NoEvent>(times))) + "\"}",
                                "application/json");
            }
        } catch (const std::exception&) {
            res.status = 400;
            res.set_content("{\"error\":\"bad query\"}", "application/json");
        }
    };
}

}  // namespace streetlight

#endif
