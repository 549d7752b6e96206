#ifndef STREETLIGHT_MODE_HPP
#define STREETLIGHT_MODE_HPP

#include <optional>
#include <string_view>

namespace streetlight {

enum class Mode { Manual, SemiAuto, FullAuto };

enum class Relay { Off, On };

constexpr std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::Manual: return "Manual";
        case Mode::SemiAuto: return "SemiAuto";
        case Mode::FullAuto: return "FullAuto";
    }
    return "?";
}

inline std::optional<Mode> mode_from_name(std::string_view s) {
    if (s == "Manual") return Mode::Manual;
    if (s == "SemiAuto") return Mode::SemiAuto;
    if (s == "FullAuto") return Mode::FullAuto;
    return std::nullopt;
}

constexpr std::string_view relay_name(Relay r) { return r == Relay::On ? "ON" : "OFF"; }

}  // namespace streetlight

#endif
