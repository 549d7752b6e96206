#ifndef STREETLIGHT_POWER_HPP
#define STREETLIGHT_POWER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mode.hpp"
#include "time.hpp"

namespace streetlight {

struct TooFewSamples : std::invalid_argument {
    TooFewSamples() : std::invalid_argument("too few samples") {}
};

/// Root mean square of `samples`, measured from their mean when `dc_remove`.
inline double rms(std::span<const double> samples, bool dc_remove) {
    if (samples.size() < 2) throw TooFewSamples{};
    double mean = 0.0;
    if (dc_remove) {
        for (double s : samples) mean += s;
        mean /= static_cast<double>(samples.size());
    }
    double acc = 0.0;
    for (double s : samples) acc += (s - mean) * (s - mean);
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

/// Secondary-side capture from the PT and CT over a whole number of line cycles.
struct PowerSample {
    std::vector<double> v_samples;  // volts
    std::vector<double> i_samples;  // amps
    double sample_rate_hz = 2000.0;
    int window_cycles = 10;
    double line_hz = 50.0;

    double samples_per_cycle() const { return sample_rate_hz / line_hz; }

    std::optional<std::string> validation_error() const {
        if (!(sample_rate_hz > 0.0) || !(line_hz > 0.0)) return "non-positive rate";
        if (window_cycles < 1) return "window_cycles < 1";
        if (sample_rate_hz < 10.0 * line_hz) return "sample rate below 10x line frequency";
        if (v_samples.size() != i_samples.size()) return "channel length mismatch";
        if (static_cast<double>(v_samples.size()) < 2.0 * samples_per_cycle()) return "fewer than two cycles";
        return std::nullopt;
    }
};

/// Primary amps per secondary amp for the CT, primary volts per secondary volt for the PT.
struct SensorRatios {
    /// 230:12 iron-core potential transformer.
    double pt_ratio = 230.0 / 12.0;
    /// SCT-013-000 clamp: 100 A primary to 50 mA secondary, 2000 turns.
    double ct_ratio = 2000.0;

    bool operator==(const SensorRatios&) const = default;
};

struct PowerReading {
    double v_rms = 0.0;
    double i_rms = 0.0;
    double p_watts = 0.0;
    Timestamp window_end;
};

inline PowerReading compute_power(const PowerSample& sample, const SensorRatios& ratios, Timestamp window_end = {}) {
    if (!(ratios.pt_ratio > 0.0) || !(ratios.ct_ratio > 0.0)) throw std::invalid_argument("sensor ratios must be positive");
    if (sample.v_samples.size() < 2 || sample.i_samples.size() < 2) throw TooFewSamples{};
    if (auto err = sample.validation_error()) {
        if (*err == "fewer than two cycles") throw TooFewSamples{};
        throw std::invalid_argument(*err);
    }
    const std::size_t n = sample.v_samples.size();
    double p = 0.0;
    for (std::size_t k = 0; k < n; ++k) p += sample.v_samples[k] * sample.i_samples[k];
    p *= ratios.pt_ratio * ratios.ct_ratio / static_cast<double>(n);
    PowerReading r;
    r.v_rms = ratios.pt_ratio * rms(sample.v_samples, false);
    r.i_rms = ratios.ct_ratio * rms(sample.i_samples, false);
    // Negative mean product would mean a reversed CT; the station only consumes.
    r.p_watts = std::max(0.0, p);
    r.window_end = window_end;
    return r;
}

/// Ideal 50 Hz sine capture for a given primary-side load, scaled down to the
/// sensor secondaries. One cycle is tabulated and reused across the window.
class WaveformSynth {
public:
    WaveformSynth(SensorRatios ratios, double sample_rate_hz = 2000.0, int window_cycles = 10, double line_hz = 50.0)
        : ratios_(ratios), rate_(sample_rate_hz), cycles_(window_cycles), line_hz_(line_hz) {
        const double spc = sample_rate_hz / line_hz;
        const auto n = static_cast<std::size_t>(std::llround(spc * window_cycles));
        unit_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            unit_[k] = std::numbers::sqrt2 * std::sin(2.0 * std::numbers::pi * line_hz * static_cast<double>(k) / rate_);
        }
    }

    /// Sine fixture: primary RMS voltage and current with the current lagging by `phase_rad`.
    PowerSample sample(double v_rms_primary, double i_rms_primary, double phase_rad = 0.0,
                       double noise_sigma = 0.0, std::mt19937_64* rng = nullptr) const {
        PowerSample s;
        s.sample_rate_hz = rate_;
        s.window_cycles = cycles_;
        s.line_hz = line_hz_;
        const std::size_t n = unit_.size();
        s.v_samples.resize(n);
        s.i_samples.resize(n);
        const double va = v_rms_primary / ratios_.pt_ratio;
        const double ia = i_rms_primary / ratios_.ct_ratio;
        if (phase_rad == 0.0) {
            for (std::size_t k = 0; k < n; ++k) {
                s.v_samples[k] = va * unit_[k];
                s.i_samples[k] = ia * unit_[k];
            }
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                const double w = 2.0 * std::numbers::pi * line_hz_ * static_cast<double>(k) / rate_;
                s.v_samples[k] = va * unit_[k];
                s.i_samples[k] = ia * std::numbers::sqrt2 * std::sin(w - phase_rad);
            }
        }
        if (noise_sigma > 0.0 && rng != nullptr) {
            std::normal_distribution<double> noise(0.0, noise_sigma);
            for (std::size_t k = 0; k < n; ++k) {
                s.v_samples[k] += noise(*rng) / ratios_.pt_ratio;
                s.i_samples[k] += noise(*rng) / ratios_.ct_ratio;
            }
        }
        return s;
    }

    /// Capture for a purely resistive load of `watts` at line voltage `v_rms_primary`.
    PowerSample for_load(double watts, double v_rms_primary) const {
        return sample(v_rms_primary, v_rms_primary > 0.0 ? watts / v_rms_primary : 0.0);
    }

private:
    SensorRatios ratios_;
    double rate_;
    int cycles_;
    double line_hz_;
    std::vector<double> unit_;
};

/// CSV fixture `t,v,i` with a header row; t in seconds from window start.
inline std::string write_waveform_csv(const PowerSample& s) {
    std::ostringstream out;
    out.precision(10);
    out << "t,v,i\n";
    for (std::size_t k = 0; k < s.v_samples.size(); ++k) {
        out << static_cast<double>(k) / s.sample_rate_hz << ',' << s.v_samples[k] << ',' << s.i_samples[k] << '\n';
    }
    return out.str();
}

/// Reads a `t,v,i` fixture; the sample rate is taken from the first time step.
inline PowerSample read_waveform_csv(const std::string& text, double line_hz = 50.0) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,v,i", 0) != 0) throw std::invalid_argument("waveform csv: missing t,v,i header");
    PowerSample s;
    s.line_hz = line_hz;
    std::vector<double> t;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        double tv = 0, vv = 0, iv = 0;
        char c1 = 0, c2 = 0;
        if (!(row >> tv >> c1 >> vv >> c2 >> iv) || c1 != ',' || c2 != ',') {
            throw std::invalid_argument("waveform csv: malformed row: " + line);
        }
        t.push_back(tv);
        s.v_samples.push_back(vv);
        s.i_samples.push_back(iv);
    }
    if (t.size() < 2 || !(t[1] > t[0])) throw TooFewSamples{};
    s.sample_rate_hz = std::round(1.0 / (t[1] - t[0]));
    s.window_cycles = std::max(1, static_cast<int>(std::floor(static_cast<double>(t.size()) / s.samples_per_cycle())));
    return s;
}

struct FaultPolicy {
    double threshold_ratio = 0.80;
    int debounce_ticks = 3;
    std::int64_t realert_interval_seconds = 6 * 3600;

    std::optional<std::string> validation_error() const {
        if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0)) return "threshold_ratio outside (0, 1)";
        if (debounce_ticks < 1) return "debounce_ticks < 1";
        if (realert_interval_seconds < 0) return "negative realert interval";
        return std::nullopt;
    }

    bool operator==(const FaultPolicy&) const = default;
};

struct FaultEpisodeState {
    int below_streak = 0;
    int healthy_streak = 0;
    bool active = false;
    std::optional<Timestamp> last_alert;

    bool operator==(const FaultEpisodeState&) const = default;
};

enum class FaultKind { PowerBelowThreshold };

struct FaultAlert {
    FaultKind kind = FaultKind::PowerBelowThreshold;
    double measured_watts = 0.0;
    double expected_watts = 0.0;
    Timestamp raised_at;
};

/// Debounced threshold check. A fault episode opens after `debounce_ticks`
/// consecutive low readings and closes after as many consecutive healthy ones.
/// While open, the alert repeats no sooner than the re-alert interval.
/// With nothing expected to be lit the evaluation is skipped.
inline std::pair<FaultEpisodeState, std::optional<FaultAlert>> evaluate_fault(const PowerReading& reading,
                                                                             double expected_watts,
                                                                             const FaultPolicy& policy,
                                                                             FaultEpisodeState episode) {
    if (expected_watts <= 0.0) return {episode, std::nullopt};
    const bool below = reading.p_watts < policy.threshold_ratio * expected_watts;
    std::optional<FaultAlert> alert;
    const Timestamp now = reading.window_end;
    if (below) {
        episode.healthy_streak = 0;
        ++episode.below_streak;
        bool fire = false;
        if (!episode.active) {
            if (episode.below_streak >= policy.debounce_ticks) {
                episode.active = true;
                fire = true;
            }
        } else if (!episode.last_alert || now - *episode.last_alert >= policy.realert_interval_seconds) {
            fire = true;
        }
        if (fire) {
            episode.last_alert = now;
            alert = FaultAlert{FaultKind::PowerBelowThreshold, reading.p_watts, expected_watts, now};
        }
    } else {
        episode.below_streak = 0;
        ++episode.healthy_streak;
        if (episode.active && episode.healthy_streak >= policy.debounce_ticks) {
            episode.active = false;
            episode.last_alert.reset();
        }
    }
    return {episode, alert};
}

/// Zone load with `lanes_on` lanes lit, each carrying `lamps_per_lane` lamps.
inline double expected_zone_power(std::span<const Relay> relays, double lamp_watts, int lamps_per_lane) {
    double w = 0.0;
    for (Relay r : relays) {
        if (r == Relay::On) w += lamp_watts * lamps_per_lane;
    }
    return w;
}

}  // namespace streetlight

#endif
