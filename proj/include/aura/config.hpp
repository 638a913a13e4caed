#pragma once

// Session configuration: every tunable with its default, JSON I/O and a
// stable hash that replay logs embed.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aura/arousal.hpp"
#include "aura/biometric.hpp"
#include "aura/canvas.hpp"
#include "aura/error.hpp"

namespace aura {

using json = nlohmann::json;

/// Simulated time per tick.
inline constexpr std::uint64_t kTickMs = 100;

struct IngestConfig {
    double sample_rate_hz = 25.0;
    std::uint64_t estimate_interval_ms = 1000;
    EstimatorParams estimator;
};

struct RobotConfig {
    double paint_speed_mm_s = 50.0;
    double travel_speed_mm_s = 100.0;
    double paint_capacity_mm = 400.0;
    int refill_ticks = 20;
    double stroke_width_mm = 2.0;
    Point paint_station{-20.0, 0.0};
    Point home{140.0, 108.0};
};

struct ServerConfig {
    std::string bind = "127.0.0.1";
    int port = 8080;
    int udp_port = 12345;
    std::size_t client_buffer = 1000;
    std::uint64_t snapshot_interval_ms = 500;
    std::size_t max_stroke_points = 10000;
};

struct SessionConfig {
    CanvasSpec canvas;
    IngestConfig ingest;
    ArousalConfig arousal;
    RobotConfig robot;
    ServerConfig server;
    std::vector<Rgb> palette{{20, 20, 20}, {200, 40, 40}, {40, 90, 200}, {30, 150, 70}, {230, 170, 30}};
    std::uint64_t seed = 0;
    double workspace_window_s = 30.0;
    Quadrant initial_active{0, 0};
};

inline json point_to_json(Point p) { return json::array({p.x, p.y}); }

inline Point point_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw Error(ErrorCode::BadFormat, "point must be [x_mm, y_mm]");
    }
    return Point{j[0].get<double>(), j[1].get<double>()};
}

inline json rgb_to_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

inline Rgb rgb_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::BadFormat, "color must be [r, g, b]");
    Rgb c;
    std::uint8_t* channels[3] = {&c.r, &c.g, &c.b};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!j[i].is_number_integer() || j[i].get<int>() < 0 || j[i].get<int>() > 255) {
            throw Error(ErrorCode::BadFormat, "color channels must be integers in [0, 255]");
        }
        *channels[i] = static_cast<std::uint8_t>(j[i].get<int>());
    }
    return c;
}

inline json to_json(const SessionConfig& c) {
    json palette = json::array();
    for (auto rgb : c.palette) palette.push_back(rgb_to_json(rgb));
    const auto& e = c.ingest.estimator;
    return json{
        {"canvas", {{"width_mm", c.canvas.width_mm}, {"height_mm", c.canvas.height_mm}, {"px_per_mm", c.canvas.px_per_mm}}},
        {"ingest",
         {{"sample_rate_hz", c.ingest.sample_rate_hz},
          {"estimate_interval_ms", c.ingest.estimate_interval_ms},
          {"window_s", e.window_s},
          {"refractory_s", e.refractory_s},
          {"peak_fraction", e.peak_fraction},
          {"percentile", e.percentile},
          {"detrend_s", e.detrend_s},
          {"min_peaks", e.min_peaks},
          {"smooth_samples", e.smooth_samples}}},
        {"arousal",
         {{"k", c.arousal.k},
          {"sigma_floor_bpm", c.arousal.sigma_floor_bpm},
          {"near_band_bpm", c.arousal.near_band_bpm},
          {"hysteresis_bpm", c.arousal.hysteresis_bpm},
          {"trend_points", c.arousal.trend_points},
          {"min_baseline_estimates", c.arousal.min_baseline_estimates},
          {"calibration_s", c.arousal.calibration_s}}},
        {"robot",
         {{"paint_speed_mm_s", c.robot.paint_speed_mm_s},
          {"travel_speed_mm_s", c.robot.travel_speed_mm_s},
          {"paint_capacity_mm", c.robot.paint_capacity_mm},
          {"refill_ticks", c.robot.refill_ticks},
          {"stroke_width_mm", c.robot.stroke_width_mm},
          {"paint_station", point_to_json(c.robot.paint_station)},
          {"home", point_to_json(c.robot.home)}}},
        {"server",
         {{"bind", c.server.bind},
          {"port", c.server.port},
          {"udp_port", c.server.udp_port},
          {"client_buffer", c.server.client_buffer},
          {"snapshot_interval_ms", c.server.snapshot_interval_ms},
          {"max_stroke_points", c.server.max_stroke_points}}},
        {"palette", palette},
        {"seed", c.seed},
        {"workspace_window_s", c.workspace_window_s},
        {"initial_active", json::array({c.initial_active.col, c.initial_active.row})},
    };
}

namespace detail {

/// Every key in `overrides` must already exist in `defaults`; typos in a
/// config file should fail loudly rather than silently fall back.
inline void check_known_keys(const json& defaults, const json& overrides, const std::string& path) {
    if (!overrides.is_object()) return;
    for (const auto& [key, value] : overrides.items()) {
        if (!defaults.contains(key)) throw Error(ErrorCode::BadConfig, "unknown config key '" + path + key + "'");
        if (defaults[key].is_object()) check_known_keys(defaults[key], value, path + key + ".");
    }
}

}  // namespace detail

inline void validate_config(const SessionConfig& c) {
    validate_canvas_spec(c.canvas);
    if (c.palette.empty()) throw Error(ErrorCode::BadConfig, "palette must not be empty");
    if (!(c.ingest.sample_rate_hz >= 10.0)) throw Error(ErrorCode::BadConfig, "sample_rate_hz must be >= 10");
    if (c.ingest.estimator.window_s <= 0.0) throw Error(ErrorCode::BadConfig, "window_s must be positive");
    if (c.ingest.estimator.smooth_samples < 1) throw Error(ErrorCode::BadConfig, "smooth_samples must be >= 1");
    if (c.arousal.trend_points < 1) throw Error(ErrorCode::BadConfig, "trend_points must be >= 1");
    if (c.arousal.min_baseline_estimates < 1) throw Error(ErrorCode::BadConfig, "min_baseline_estimates must be >= 1");
    if (c.robot.paint_speed_mm_s <= 0.0 || c.robot.travel_speed_mm_s <= 0.0) {
        throw Error(ErrorCode::BadConfig, "robot speeds must be positive");
    }
    if (c.robot.paint_capacity_mm <= 0.0) throw Error(ErrorCode::BadConfig, "paint_capacity_mm must be positive");
    if (c.robot.refill_ticks < 1) throw Error(ErrorCode::BadConfig, "refill_ticks must be >= 1");
    if (c.robot.stroke_width_mm <= 0.0) throw Error(ErrorCode::BadConfig, "stroke_width_mm must be positive");
    if (c.initial_active.col < 0 || c.initial_active.col > 1 || c.initial_active.row < 0 || c.initial_active.row > 1) {
        throw Error(ErrorCode::BadConfig, "initial_active must be [col, row] with entries 0 or 1");
    }
}

/// Missing keys take their defaults; unknown keys are rejected.
inline SessionConfig config_from_json(const json& overrides) {
    json merged = to_json(SessionConfig{});
    if (!overrides.is_null()) {
        if (!overrides.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
        detail::check_known_keys(merged, overrides, "");
        merged.merge_patch(overrides);
    }

    SessionConfig c;
    try {
        const auto& cv = merged.at("canvas");
        c.canvas = {cv.at("width_mm").get<double>(), cv.at("height_mm").get<double>(), cv.at("px_per_mm").get<double>()};

        const auto& in = merged.at("ingest");
        c.ingest.sample_rate_hz = in.at("sample_rate_hz").get<double>();
        c.ingest.estimate_interval_ms = in.at("estimate_interval_ms").get<std::uint64_t>();
        c.ingest.estimator.window_s = in.at("window_s").get<double>();
        c.ingest.estimator.refractory_s = in.at("refractory_s").get<double>();
        c.ingest.estimator.peak_fraction = in.at("peak_fraction").get<double>();
        c.ingest.estimator.percentile = in.at("percentile").get<double>();
        c.ingest.estimator.detrend_s = in.at("detrend_s").get<double>();
        c.ingest.estimator.min_peaks = in.at("min_peaks").get<int>();
        c.ingest.estimator.smooth_samples = in.at("smooth_samples").get<int>();

        const auto& ar = merged.at("arousal");
        c.arousal.k = ar.at("k").get<double>();
        c.arousal.sigma_floor_bpm = ar.at("sigma_floor_bpm").get<double>();
        c.arousal.near_band_bpm = ar.at("near_band_bpm").get<double>();
        c.arousal.hysteresis_bpm = ar.at("hysteresis_bpm").get<double>();
        c.arousal.trend_points = ar.at("trend_points").get<int>();
        c.arousal.min_baseline_estimates = ar.at("min_baseline_estimates").get<int>();
        c.arousal.calibration_s = ar.at("calibration_s").get<double>();

        const auto& rb = merged.at("robot");
        c.robot.paint_speed_mm_s = rb.at("paint_speed_mm_s").get<double>();
        c.robot.travel_speed_mm_s = rb.at("travel_speed_mm_s").get<double>();
        c.robot.paint_capacity_mm = rb.at("paint_capacity_mm").get<double>();
        c.robot.refill_ticks = rb.at("refill_ticks").get<int>();
        c.robot.stroke_width_mm = rb.at("stroke_width_mm").get<double>();
        c.robot.paint_station = point_from_json(rb.at("paint_station"));
        c.robot.home = point_from_json(rb.at("home"));

        const auto& sv = merged.at("server");
        c.server.bind = sv.at("bind").get<std::string>();
        c.server.port = sv.at("port").get<int>();
        c.server.udp_port = sv.at("udp_port").get<int>();
        c.server.client_buffer = sv.at("client_buffer").get<std::size_t>();
        c.server.snapshot_interval_ms = sv.at("snapshot_interval_ms").get<std::uint64_t>();
        c.server.max_stroke_points = sv.at("max_stroke_points").get<std::size_t>();

        c.palette.clear();
        for (const auto& rgb : merged.at("palette")) c.palette.push_back(rgb_from_json(rgb));
        c.seed = merged.at("seed").get<std::uint64_t>();
        c.workspace_window_s = merged.at("workspace_window_s").get<double>();
        const auto& ia = merged.at("initial_active");
        c.initial_active = Quadrant{ia.at(0).get<int>(), ia.at(1).get<int>()};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadConfig, e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::BadConfig, e.what());
    }
    validate_config(c);
    return c;
}

/// FNV-1a 64 of the canonical (key-sorted, compact) JSON form. Transport
/// settings do not influence the session fold and are left out.
inline std::string config_hash(const SessionConfig& c) {
    json j = to_json(c);
    j.erase("server");
    return hex64(fnv1a64(j.dump()));
}

}  // namespace aura
