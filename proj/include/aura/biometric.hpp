#pragma once

// Sensor wire protocol, PPG heart-rate estimation and a synthetic PPG source.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aura/error.hpp"

namespace aura {

enum class SampleTag { PG, HR };

inline std::string_view to_string(SampleTag tag) { return tag == SampleTag::PG ? "PG" : "HR"; }

struct BiometricSample {
    SampleTag tag = SampleTag::PG;
    std::uint64_t timestamp_ms = 0;
    double value = 0.0;

    bool operator==(const BiometricSample&) const = default;
};

inline constexpr double kMinBpm = 20.0;
inline constexpr double kMaxBpm = 250.0;

inline bool bpm_in_range(double bpm) { return bpm > kMinBpm && bpm < kMaxBpm; }

namespace detail {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\v\f";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Decodes one `TAG,timestamp_ms,value` line.
inline BiometricSample parse_sensor_line(std::string_view line) {
    const std::string_view body = detail::trim(line);

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = body.find(',', start);
        fields.push_back(detail::trim(body.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (fields.size() != 3) {
        throw Error(ErrorCode::MalformedLine, "expected 3 fields, got " + std::to_string(fields.size()));
    }

    BiometricSample sample;
    if (fields[0] == "PG") {
        sample.tag = SampleTag::PG;
    } else if (fields[0] == "HR") {
        sample.tag = SampleTag::HR;
    } else {
        throw Error(ErrorCode::UnknownTag, std::string(fields[0]));
    }

    const auto ts = fields[1];
    auto [ts_end, ts_ec] = std::from_chars(ts.data(), ts.data() + ts.size(), sample.timestamp_ms);
    if (ts.empty() || ts_ec != std::errc{} || ts_end != ts.data() + ts.size()) {
        throw Error(ErrorCode::MalformedLine, "bad timestamp '" + std::string(ts) + "'");
    }

    const auto val = fields[2];
    auto [val_end, val_ec] = std::from_chars(val.data(), val.data() + val.size(), sample.value);
    if (val.empty() || val_ec != std::errc{} || val_end != val.data() + val.size()) {
        throw Error(ErrorCode::MalformedLine, "bad value '" + std::string(val) + "'");
    }
    if (!std::isfinite(sample.value)) {
        throw Error(ErrorCode::NonFinite, std::string(val));
    }
    if (sample.tag == SampleTag::HR && !bpm_in_range(sample.value)) {
        throw Error(ErrorCode::RangeError, "HR " + std::string(val) + " outside (20, 250)");
    }
    return sample;
}

/// Shortest round-trippable encoding; parse_sensor_line(format_sensor_line(s)) == s.
inline std::string format_sensor_line(const BiometricSample& sample) {
    char buf[64];
    auto* end = buf;
    std::string out(to_string(sample.tag));
    out += ',';
    end = std::to_chars(buf, buf + sizeof buf, sample.timestamp_ms).ptr;
    out.append(buf, end);
    out += ',';
    end = std::to_chars(buf, buf + sizeof buf, sample.value).ptr;
    out.append(buf, end);
    return out;
}

struct DatagramResult {
    std::vector<BiometricSample> samples;
    std::vector<std::string> errors;
};

/// A datagram carries one or more newline-separated lines; blank lines are skipped
/// and bad lines are reported without discarding the good ones.
inline DatagramResult parse_datagram(std::string_view payload) {
    DatagramResult result;
    std::size_t start = 0;
    while (start <= payload.size()) {
        const auto nl = payload.find('\n', start);
        const auto line = payload.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (!detail::trim(line).empty()) {
            try {
                result.samples.push_back(parse_sensor_line(line));
            } catch (const Error& e) {
                result.errors.emplace_back(e.what());
            }
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return result;
}

/// Drops samples whose timestamp is not newer than the last one admitted for
/// the same tag. UDP can reorder and duplicate; neither is an error.
class StreamGate {
public:
    bool admit(const BiometricSample& s) {
        auto& last = s.tag == SampleTag::PG ? last_pg_ : last_hr_;
        if (last && s.timestamp_ms <= *last) {
            ++dropped_;
            return false;
        }
        last = s.timestamp_ms;
        return true;
    }

    std::uint64_t dropped() const { return dropped_; }

private:
    std::optional<std::uint64_t> last_pg_;
    std::optional<std::uint64_t> last_hr_;
    std::uint64_t dropped_ = 0;
};

struct HeartRateEstimate {
    std::uint64_t timestamp_ms = 0;
    double bpm = 0.0;
    double confidence = 0.0;
    int n_peaks = 0;
    double window_s = 0.0;

    bool operator==(const HeartRateEstimate&) const = default;
};

struct EstimatorParams {
    double window_s = 10.0;
    double refractory_s = 0.33;
    double peak_fraction = 0.5;
    double percentile = 90.0;
    double detrend_s = 1.0;
    int min_peaks = 4;
    /// Centered boxcar applied after detrending; 1 turns it off.
    int smooth_samples = 3;
};

inline constexpr double kDirectHrConfidence = 0.9;

/// HR-tagged samples come from hardware that already computed the rate.
inline HeartRateEstimate wrap_direct_hr(const BiometricSample& s) {
    if (s.tag != SampleTag::HR) throw Error(ErrorCode::UnknownTag, "expected HR sample");
    if (!bpm_in_range(s.value)) throw Error(ErrorCode::RangeError, "HR outside (20, 250)");
    return HeartRateEstimate{s.timestamp_ms, s.value, kDirectHrConfidence, 0, 0.0};
}

namespace detail {

/// Linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double pct) {
    std::sort(values.begin(), values.end());
    const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

/// Subtracts a centered moving average, truncated at the window edges.
inline std::vector<double> detrend(std::span<const BiometricSample> window, std::size_t half) {
    const std::size_t n = window.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + window[i].value;

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        const double mean = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
        out[i] = window[i].value - mean;
    }
    return out;
}

/// Centered moving average with `half` samples each side, shrinking at the ends.
inline std::vector<double> smooth(const std::vector<double>& x, std::size_t half) {
    if (half == 0) return x;
    const std::size_t n = x.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
    return out;
}

}  // namespace detail

/// Peak-counting heart-rate estimate over one PPG window ordered by time.
inline HeartRateEstimate estimate_heart_rate(std::span<const BiometricSample> window, double sample_rate_hz,
                                             const EstimatorParams& params = {}) {
    if (!(sample_rate_hz >= 10.0) || !std::isfinite(sample_rate_hz)) {
        throw Error(ErrorCode::BadSampleRate, std::to_string(sample_rate_hz));
    }
    if (window.empty()) throw Error(ErrorCode::WindowTooShort, "empty window");

    const double span_s =
        static_cast<double>(window.back().timestamp_ms - window.front().timestamp_ms) / 1000.0 + 1.0 / sample_rate_hz;
    if (span_s + 1e-9 < params.window_s) {
        throw Error(ErrorCode::WindowTooShort, "window covers " + std::to_string(span_s) + " s");
    }

    if (params.smooth_samples < 1) throw Error(ErrorCode::BadConfig, "smooth_samples must be >= 1");

    const auto half = static_cast<std::size_t>(std::llround(sample_rate_hz * params.detrend_s / 2.0));
    const std::vector<double> d = detail::smooth(detail::detrend(window, half),
                                                 static_cast<std::size_t>(params.smooth_samples / 2));
    const double threshold = params.peak_fraction * detail::percentile(d, params.percentile);

    struct Candidate {
        double t_ms;
        double height;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 1; i + 1 < d.size(); ++i) {
        if (d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > threshold) {
            // Parabola through the three samples puts the peak between them.
            const double curve = d[i - 1] - 2.0 * d[i] + d[i + 1];
            const double offset = curve < 0.0 ? 0.5 * (d[i - 1] - d[i + 1]) / curve : 0.0;
            const double t0 = static_cast<double>(window[i].timestamp_ms);
            const double step = static_cast<double>(offset >= 0.0 ? window[i + 1].timestamp_ms - window[i].timestamp_ms
                                                                   : window[i].timestamp_ms - window[i - 1].timestamp_ms);
            candidates.push_back({t0 + offset * step, d[i]});
        }
    }

    // Tallest peaks claim their refractory neighbourhood first.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.height > b.height; });
    const auto refractory_ms = params.refractory_s * 1000.0;
    std::vector<double> accepted;
    for (const auto& c : candidates) {
        const bool clear = std::none_of(accepted.begin(), accepted.end(),
                                        [&](double a) { return std::abs(c.t_ms - a) < refractory_ms; });
        if (clear) accepted.push_back(c.t_ms);
    }
    std::sort(accepted.begin(), accepted.end());

    const int n_peaks = static_cast<int>(accepted.size());
    if (n_peaks < params.min_peaks) {
        throw Error(ErrorCode::InsufficientData, std::to_string(n_peaks) + " peaks accepted");
    }

    const double span_peaks_s = (accepted.back() - accepted.front()) / 1000.0;
    const double bpm = 60.0 * static_cast<double>(n_peaks - 1) / span_peaks_s;

    std::vector<double> intervals;
    for (std::size_t i = 1; i < accepted.size(); ++i) {
        intervals.push_back(accepted[i] - accepted[i - 1]);
    }
    const double mean = std::accumulate(intervals.begin(), intervals.end(), 0.0) / static_cast<double>(intervals.size());
    double var = 0.0;
    for (double iv : intervals) var += (iv - mean) * (iv - mean);
    var /= static_cast<double>(intervals.size());
    const double cv = std::sqrt(var) / mean;

    const double confidence = std::min(1.0, n_peaks / 10.0) * std::max(0.0, 1.0 - cv);
    if (!bpm_in_range(bpm)) throw Error(ErrorCode::RangeError, "estimate " + std::to_string(bpm) + " bpm");
    if (confidence <= 0.0) throw Error(ErrorCode::InsufficientData, "inter-peak intervals too irregular");

    return HeartRateEstimate{window.back().timestamp_ms, bpm, confidence, n_peaks, params.window_s};
}

/// Standard normal deviates from a 64-bit Mersenne Twister via Box-Muller.
/// std::normal_distribution is not specified bit-for-bit across standard
/// libraries, and replay logs must not depend on which one built the binary.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        } while (u1 <= 0.0);
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Phase-continuous raised-cosine pulse train. Keeps its phase across calls so
/// a caller can change the rate segment by segment without a discontinuity.
class PpgGenerator {
public:
    PpgGenerator(double fs, std::uint64_t start_ms = 0) : fs_(fs), start_ms_(start_ms) {
        if (!(fs >= 10.0) || !std::isfinite(fs)) throw Error(ErrorCode::BadSampleRate, std::to_string(fs));
    }

    double sample_rate() const { return fs_; }
    std::uint64_t next_timestamp() const {
        return start_ms_ + static_cast<std::uint64_t>(std::llround(static_cast<double>(index_) * 1000.0 / fs_));
    }
    double time_s() const { return static_cast<double>(index_) / fs_; }

    BiometricSample next(double bpm, double noise = 0.0) {
        BiometricSample s{SampleTag::PG, next_timestamp(), 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase_)) + noise};
        phase_ += bpm / 60.0 / fs_;
        ++index_;
        return s;
    }

private:
    double fs_;
    std::uint64_t start_ms_;
    std::uint64_t index_ = 0;
    double phase_ = 0.0;
};

/// Piecewise-constant rate: key is the segment start in seconds. Times before
/// the first key use the first segment's rate.
using BpmProfile = std::map<double, double>;

inline void validate_profile(const BpmProfile& profile) {
    if (profile.empty()) throw Error(ErrorCode::BadProfile, "empty profile");
    for (const auto& [t, bpm] : profile) {
        if (!std::isfinite(t) || !bpm_in_range(bpm)) {
            throw Error(ErrorCode::BadProfile, "rate " + std::to_string(bpm) + " outside (20, 250)");
        }
    }
}

inline double profile_rate_at(const BpmProfile& profile, double t_s) {
    auto it = profile.upper_bound(t_s);
    if (it == profile.begin()) return it->second;
    return std::prev(it)->second;
}

inline std::vector<BiometricSample> synth_ppg(const BpmProfile& profile, double fs, double noise_std,
                                              std::uint64_t seed, double duration_s, std::uint64_t start_ms = 0) {
    validate_profile(profile);
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) throw Error(ErrorCode::BadProfile, "bad duration");
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::BadProfile, "negative noise");

    PpgGenerator gen(fs, start_ms);
    GaussianSource noise(seed);
    const auto n = static_cast<std::size_t>(std::floor(duration_s * fs + 1e-9));
    std::vector<BiometricSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double rate = profile_rate_at(profile, gen.time_s());
        out.push_back(gen.next(rate, noise_std > 0.0 ? noise_std * noise.next() : 0.0));
    }
    return out;
}

}  // namespace aura
