#pragma once

// Scripted sessions: a simulated artist's inputs on a simulated clock.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aura/biometric.hpp"
#include "aura/command.hpp"
#include "aura/config.hpp"
#include "aura/error.hpp"
#include "aura/events.hpp"
#include "aura/session.hpp"

namespace aura {

struct PpgSegment {
    double bpm = 70.0;
    double duration_s = 0.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

struct ScenarioStep {
    std::uint64_t t_ms = 0;
    std::string kind;
    json payload;
};

struct Scenario {
    std::string name;
    json config_overrides = json::object();
    std::optional<double> duration_s;
    std::vector<ScenarioStep> steps;
};

inline json to_json(const Scenario& sc) {
    json events = json::array();
    for (const auto& st : sc.steps) events.push_back({{"t_ms", st.t_ms}, {"kind", st.kind}, {"payload", st.payload}});
    json j{{"name", sc.name}, {"config", sc.config_overrides}, {"events", events}};
    if (sc.duration_s) j["duration_s"] = *sc.duration_s;
    return j;
}

namespace detail {

[[noreturn]] inline void scenario_error(std::size_t index, const std::string& what) {
    throw Error(ErrorCode::BadScenario, "event " + std::to_string(index) + ": " + what);
}

inline PpgSegment ppg_segment_from_json(const json& p) {
    PpgSegment seg;
    seg.bpm = p.at("bpm").get<double>();
    seg.duration_s = p.at("duration_s").get<double>();
    seg.noise_std = p.value("noise_std", 0.0);
    seg.seed = p.value("seed", std::uint64_t{0});
    return seg;
}

}  // namespace detail

/// Parses and validates; every problem surfaces as BadScenario.
inline Scenario parse_scenario(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::BadScenario, "scenario must be a JSON object");
    Scenario sc;
    try {
        sc.name = j.value("name", std::string("unnamed"));
        if (j.contains("config")) sc.config_overrides = j.at("config");
        if (j.contains("duration_s")) {
            sc.duration_s = j.at("duration_s").get<double>();
            if (!(*sc.duration_s >= 0.0)) throw Error(ErrorCode::BadScenario, "duration_s must be >= 0");
        }
        const json events = j.value("events", json::array());
        if (!events.is_array()) throw Error(ErrorCode::BadScenario, "events must be an array");
        for (const auto& e : events) {
            sc.steps.push_back({e.at("t_ms").get<std::uint64_t>(), e.at("kind").get<std::string>(),
                                e.value("payload", json::object())});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadScenario, e.what());
    }

    SessionConfig config;
    try {
        config = config_from_json(sc.config_overrides);
    } catch (const Error& e) {
        throw Error(ErrorCode::BadScenario, e.what());
    }

    std::uint64_t last_t = 0;
    std::uint64_t ppg_free_from = 0;
    for (std::size_t i = 0; i < sc.steps.size(); ++i) {
        const auto& st = sc.steps[i];
        if (st.t_ms < last_t) detail::scenario_error(i, "t_ms decreases");
        last_t = st.t_ms;
        try {
            if (st.kind == "ppg_profile") {
                const auto seg = detail::ppg_segment_from_json(st.payload);
                if (!bpm_in_range(seg.bpm)) detail::scenario_error(i, "bpm outside (20, 250)");
                if (!(seg.duration_s > 0.0)) detail::scenario_error(i, "duration_s must be positive");
                if (!(seg.noise_std >= 0.0)) detail::scenario_error(i, "noise_std must be >= 0");
                if (st.t_ms < ppg_free_from) detail::scenario_error(i, "overlaps the previous ppg_profile");
                ppg_free_from = st.t_ms + static_cast<std::uint64_t>(std::llround(seg.duration_s * 1000.0));
            } else if (st.kind == "hr") {
                if (!bpm_in_range(st.payload.at("bpm").get<double>())) detail::scenario_error(i, "bpm outside (20, 250)");
            } else if (st.kind == "command") {
                parse_command(st.payload.at("text").get<std::string>());
            } else if (st.kind == "artist_stroke") {
                validate_stroke(stroke_from_json(st.payload), config.canvas);
            } else if (st.kind == "robot_move") {
                if (!st.payload.value("outside", false)) {
                    const Point p{st.payload.at("x_mm").get<double>(), st.payload.at("y_mm").get<double>()};
                    if (!in_bounds(p, config.canvas)) detail::scenario_error(i, "robot_move outside canvas; use outside:true");
                }
            } else {
                detail::scenario_error(i, "unknown kind '" + st.kind + "'");
            }
        } catch (const json::exception& e) {
            detail::scenario_error(i, e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BadScenario) throw;
            detail::scenario_error(i, e.what());
        }
    }
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BadScenario, "cannot open " + path.string());
    try {
        return parse_scenario(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadScenario, e.what());
    }
}

struct TimedInput {
    std::uint64_t at_ms = 0;
    EventPayload payload;
};

/// Expands scenario steps into time-ordered engine inputs. Back-to-back PPG
/// segments share one phase-continuous pulse generator.
inline std::vector<TimedInput> expand_scenario(const Scenario& sc, const SessionConfig& config) {
    std::vector<TimedInput> out;
    std::optional<PpgGenerator> gen;
    std::uint64_t gen_end_ms = 0;
    for (const auto& st : sc.steps) {
        if (st.kind == "ppg_profile") {
            const auto seg = detail::ppg_segment_from_json(st.payload);
            if (!gen || st.t_ms != gen_end_ms) gen.emplace(config.ingest.sample_rate_hz, st.t_ms);
            GaussianSource noise(seg.seed);
            const auto end_ms = st.t_ms + static_cast<std::uint64_t>(std::llround(seg.duration_s * 1000.0));
            while (gen->next_timestamp() < end_ms) {
                const auto s = gen->next(seg.bpm, seg.noise_std > 0.0 ? seg.noise_std * noise.next() : 0.0);
                out.push_back({s.timestamp_ms, ev::SampleIn{s}});
            }
            gen_end_ms = end_ms;
        } else if (st.kind == "hr") {
            out.push_back({st.t_ms, ev::SampleIn{{SampleTag::HR, st.t_ms, st.payload.at("bpm").get<double>()}}});
        } else if (st.kind == "command") {
            const auto text = st.payload.at("text").get<std::string>();
            out.push_back({st.t_ms, ev::CommandIssued{text, parse_command(text)}});
        } else if (st.kind == "artist_stroke") {
            out.push_back({st.t_ms, ev::ArtistStroke{stroke_from_json(st.payload)}});
        } else if (st.kind == "robot_move") {
            if (st.payload.value("outside", false)) {
                out.push_back({st.t_ms, ev::RobotMoved{std::nullopt}});
            } else {
                out.push_back({st.t_ms, ev::RobotMoved{Point{st.payload.at("x_mm").get<double>(),
                                                             st.payload.at("y_mm").get<double>()}}});
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const TimedInput& a, const TimedInput& b) { return a.at_ms < b.at_ms; });
    return out;
}

struct RunOptions {
    bool fast = true;
    /// Called after every input (including ticks) with the events it produced.
    std::function<void(const Session&, const std::vector<SessionEvent>&)> observer;
};

struct ScenarioRun {
    std::string name;
    SessionConfig config;
    SessionRunner runner;
};

/// Inputs stamped at or before a tick's time are folded before that tick.
inline ScenarioRun run_scenario(const Scenario& sc, const RunOptions& opts = {}) {
    const SessionConfig config = config_from_json(sc.config_overrides);
    ScenarioRun run{sc.name, config, SessionRunner(config)};
    const auto inputs = expand_scenario(sc, config);

    std::uint64_t end_ms = 0;
    if (sc.duration_s) {
        end_ms = static_cast<std::uint64_t>(std::llround(*sc.duration_s * 1000.0));
    } else if (!inputs.empty()) {
        end_ms = inputs.back().at_ms + 2000;
    }

    const auto submit = [&](EventPayload p, std::uint64_t at) {
        const auto events = run.runner.submit(std::move(p), at);
        if (opts.observer) opts.observer(run.runner.session(), events);
    };

    const auto wall_start = std::chrono::steady_clock::now();
    std::size_t next = 0;
    const bool any_ticks = !inputs.empty() || sc.duration_s.has_value();
    for (std::uint64_t t = 0; any_ticks && t <= end_ms; t += kTickMs) {
        while (next < inputs.size() && inputs[next].at_ms <= t) {
            submit(inputs[next].payload, inputs[next].at_ms);
            ++next;
        }
        if (!opts.fast) std::this_thread::sleep_until(wall_start + std::chrono::milliseconds(t));
        submit(ev::Tick{}, t);
    }
    for (; next < inputs.size(); ++next) submit(inputs[next].payload, inputs[next].at_ms);
    return run;
}

struct Transition {
    std::uint64_t seq = 0;
    std::uint64_t at_ms = 0;
    RobotMode from = RobotMode::Idle;
    RobotMode to = RobotMode::Idle;
    std::uint64_t robot_pixels = 0;
};

inline std::vector<Transition> transitions(const std::vector<SessionEvent>& log) {
    std::vector<Transition> out;
    for (const auto& e : log) {
        if (const auto* sc = std::get_if<ev::StateChanged>(&e.payload)) {
            out.push_back({e.seq, e.at_ms, sc->from, sc->to, sc->robot_pixels});
        }
    }
    return out;
}

inline json scenario_summary(const ScenarioRun& run) {
    const auto& s = run.runner.session();
    json trans = json::array();
    for (const auto& t : transitions(run.runner.log())) {
        trans.push_back({{"seq", t.seq},
                         {"at_ms", t.at_ms},
                         {"from", std::string(to_string(t.from))},
                         {"to", std::string(to_string(t.to))},
                         {"robot_pixels", t.robot_pixels}});
    }
    json rejected = json::array();
    for (const auto& e : run.runner.log()) {
        if (const auto* pr = std::get_if<ev::PromptRejected>(&e.payload)) rejected.push_back(pr->text);
    }
    const auto by_q = robot_pixels_by_quadrant(s);
    json quadrants = json::object();
    for (auto q : kAllQuadrants) {
        quadrants[std::to_string(q.col) + "," + std::to_string(q.row)] = by_q[static_cast<std::size_t>(q.index())];
    }
    return json{{"name", run.name},
                {"final_mode", std::string(to_string(s.mode))},
                {"digest", canvas_digest(s.canvas)},
                {"config_hash", config_hash(run.config)},
                {"events", run.runner.log().size()},
                {"transitions", trans},
                {"robot_pixels_by_quadrant", quadrants},
                {"robot_pixel_writes", s.robot_pixel_writes},
                {"zone_violations", s.zone_violations},
                {"rejected_prompts", rejected},
                {"baseline",
                 {{"mu_bpm", s.baseline.mu_bpm},
                  {"sigma_bpm", s.baseline.sigma_bpm},
                  {"n_samples", s.baseline.n_samples},
                  {"calibrated", s.baseline.calibrated}}}};
}

/// Writes session.jsonl, canvas.ppm and summary.json into `out_dir`.
inline void write_scenario_outputs(const ScenarioRun& run, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream log(out_dir / "session.jsonl", std::ios::binary);
        write_log(log, run.config, run.runner.log());
    }
    {
        std::ofstream ppm(out_dir / "canvas.ppm", std::ios::binary);
        const auto bytes = export_ppm(run.runner.session().canvas);
        ppm.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    {
        std::ofstream summary(out_dir / "summary.json", std::ios::binary);
        summary << scenario_summary(run).dump(2) << '\n';
    }
}

}  // namespace aura
