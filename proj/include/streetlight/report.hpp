#ifndef STREETLIGHT_REPORT_HPP
#define STREETLIGHT_REPORT_HPP

#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json_io.hpp"
#include "zone.hpp"

namespace streetlight {

enum class ReportFormat { Json, Csv, Table };

struct UnknownFormat : std::invalid_argument {
    explicit UnknownFormat(std::string_view f) : std::invalid_argument("unknown report format: " + std::string(f)) {}
};

inline ReportFormat parse_report_format(std::string_view f) {
    if (f == "json") return ReportFormat::Json;
    if (f == "csv") return ReportFormat::Csv;
    if (f == "table" || f == "text-table") return ReportFormat::Table;
    throw UnknownFormat(f);
}

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace detail

inline std::string emit_report(const SimReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::Json:
            return report_to_json(report).dump(2) + "\n";
        case ReportFormat::Csv: {
            std::string out = "hour_start,scenario,avg_watts,cumulative_kwh\n";
            for (const auto& s : report.scenarios) {
                for (const auto& h : s.hourly) {
                    out += h.hour_start.iso() + "," + s.scenario + "," + detail::fixed(h.avg_watts, 3) + "," +
                           detail::fixed(h.cumulative_kwh, 6) + "\n";
                }
            }
            return out;
        }
        case ReportFormat::Table: {
            std::string out;
            char line[160];
            std::snprintf(line, sizeof line, "%s  %s  %d day(s)  tick %ds  seed %llu\n", report.zone.c_str(),
                          format_date(report.start_date).c_str(), report.days, report.tick_seconds,
                          static_cast<unsigned long long>(report.seed));
            out += line;
            std::snprintf(line, sizeof line, "%-14s %12s %8s %14s\n", "scenario", "energy_kwh", "alerts", "relay_changes");
            out += line;
            for (const auto& s : report.scenarios) {
                std::snprintf(line, sizeof line, "%-14s %12.3f %8zu %14zu\n", s.scenario.c_str(), s.total_kwh,
                              s.alert_log.size(), s.relay_log.size());
                out += line;
            }
            if (report.savings_percent) {
                std::snprintf(line, sizeof line, "%-14s %12.2f%%\n", "savings", *report.savings_percent);
                out += line;
            }
            return out;
        }
    }
    throw UnknownFormat("?");
}

inline std::string emit_report(const SimReport& report, std::string_view format) {
    return emit_report(report, parse_report_format(format));
}

}  // namespace streetlight

#endif
