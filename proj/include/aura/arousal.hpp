#pragma once

// Baseline calibration, short-horizon HR trend and hysteretic arousal levels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "aura/biometric.hpp"
#include "aura/error.hpp"

namespace aura {

enum class ArousalLevel { Neutral = 0, NearThreshold = 1, Aroused = 2 };

inline std::string_view to_string(ArousalLevel level) {
    switch (level) {
        case ArousalLevel::Neutral:       return "Neutral";
        case ArousalLevel::NearThreshold: return "NearThreshold";
        case ArousalLevel::Aroused:       return "Aroused";
    }
    return "Neutral";
}

inline std::optional<ArousalLevel> arousal_level_from_string(std::string_view s) {
    if (s == "Neutral") return ArousalLevel::Neutral;
    if (s == "NearThreshold") return ArousalLevel::NearThreshold;
    if (s == "Aroused") return ArousalLevel::Aroused;
    return std::nullopt;
}

struct ArousalConfig {
    double k = 1.5;
    double sigma_floor_bpm = 2.0;
    double near_band_bpm = 3.0;
    double hysteresis_bpm = 2.0;
    int trend_points = 8;
    int min_baseline_estimates = 5;
    double calibration_s = 30.0;
};

struct Baseline {
    double mu_bpm = 0.0;
    double sigma_bpm = 0.0;
    int n_samples = 0;
    bool calibrated = false;

    bool operator==(const Baseline&) const = default;
};

struct ArousalState {
    ArousalLevel level = ArousalLevel::Neutral;
    double predicted_bpm = 0.0;
    double threshold_bpm = 0.0;
    double near_band_bpm = 0.0;
    std::uint64_t at_ms = 0;

    bool operator==(const ArousalState&) const = default;
};

/// Mean and population standard deviation of the estimates' rates.
inline Baseline calibrate_baseline(std::span<const HeartRateEstimate> estimates, int min_baseline_estimates = 5) {
    if (estimates.empty()) throw Error(ErrorCode::EmptyInput, "no estimates to calibrate from");
    const auto n = static_cast<double>(estimates.size());
    double sum = 0.0;
    for (const auto& e : estimates) sum += e.bpm;
    const double mu = sum / n;
    double ss = 0.0;
    for (const auto& e : estimates) ss += (e.bpm - mu) * (e.bpm - mu);
    const int count = static_cast<int>(estimates.size());
    return Baseline{mu, std::sqrt(ss / n), count, count >= min_baseline_estimates};
}

struct HrTrend {
    double slope_bpm_per_s = 0.0;
    double predicted_bpm = 0.0;
};

/// Ordinary least squares of bpm on time (seconds), evaluated at `now_ms`.
inline HrTrend fit_hr_trend(std::span<const HeartRateEstimate> recent, std::uint64_t now_ms) {
    if (recent.empty()) throw Error(ErrorCode::EmptyInput, "no estimates to fit");
    const auto clamp = [](double bpm) { return std::clamp(bpm, kMinBpm, kMaxBpm); };

    const auto n = static_cast<double>(recent.size());
    // Center on the first timestamp; session times in seconds can be large
    // enough to cost precision in the normal equations otherwise.
    const auto origin = recent.front().timestamp_ms;
    const auto secs = [origin](std::uint64_t t) {
        return (static_cast<double>(t) - static_cast<double>(origin)) / 1000.0;
    };

    double mean_t = 0.0;
    double mean_y = 0.0;
    for (const auto& e : recent) {
        mean_t += secs(e.timestamp_ms);
        mean_y += e.bpm;
    }
    mean_t /= n;
    mean_y /= n;

    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& e : recent) {
        const double dt = secs(e.timestamp_ms) - mean_t;
        sxx += dt * dt;
        sxy += dt * (e.bpm - mean_y);
    }
    if (recent.size() == 1 || sxx == 0.0) return HrTrend{0.0, clamp(recent.back().bpm)};

    const double slope = sxy / sxx;
    const double predicted = mean_y + slope * (secs(now_ms) - mean_t);
    return HrTrend{slope, clamp(predicted)};
}

inline double arousal_threshold(const Baseline& baseline, const ArousalConfig& cfg) {
    return baseline.mu_bpm + cfg.k * std::max(baseline.sigma_bpm, cfg.sigma_floor_bpm);
}

/// Level without memory: Aroused at or above the threshold, NearThreshold in
/// the band just below it, Neutral otherwise.
inline ArousalLevel raw_arousal_level(double predicted, double threshold, double band) {
    if (predicted >= threshold) return ArousalLevel::Aroused;
    if (predicted >= threshold - band) return ArousalLevel::NearThreshold;
    return ArousalLevel::Neutral;
}

/// Upward moves apply at once. Leaving Aroused needs p < θ−h; reaching Neutral
/// from either higher level needs p < θ−δ−h. Anything else keeps `prev`.
inline ArousalState classify_arousal(double predicted_bpm, const Baseline& baseline,
                                     const std::optional<ArousalState>& prev, const ArousalConfig& cfg,
                                     std::uint64_t at_ms = 0) {
    if (!baseline.calibrated) throw Error(ErrorCode::NotCalibrated, "baseline not calibrated");

    const double theta = arousal_threshold(baseline, cfg);
    const double band = cfg.near_band_bpm;
    const double h = cfg.hysteresis_bpm;
    const ArousalLevel raw = raw_arousal_level(predicted_bpm, theta, band);

    ArousalLevel level = raw;
    if (prev && raw < prev->level) {
        if (prev->level == ArousalLevel::Aroused) {
            if (predicted_bpm >= theta - h) {
                level = ArousalLevel::Aroused;
            } else if (predicted_bpm >= theta - band - h) {
                level = ArousalLevel::NearThreshold;
            } else {
                level = ArousalLevel::Neutral;
            }
        } else {
            level = predicted_bpm < theta - band - h ? ArousalLevel::Neutral : prev->level;
        }
    }
    return ArousalState{level, predicted_bpm, theta, band, at_ms};
}

}  // namespace aura
