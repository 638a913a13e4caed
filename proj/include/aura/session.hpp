#pragma once

// The event-sourced session: one transition function over session state,
// a fixed-step tick executor for robot motion and painting, replay, snapshots.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aura/arousal.hpp"
#include "aura/biometric.hpp"
#include "aura/canvas.hpp"
#include "aura/command.hpp"
#include "aura/config.hpp"
#include "aura/error.hpp"
#include "aura/events.hpp"
#include "aura/planner.hpp"

namespace aura {

/// A direct command or a physical reposition can pin the effective arousal
/// level until the classifier next reports a change.
enum class LevelOverride { None, ForcedAroused, ForcedNeutral };

/// Mode-affecting inputs arriving within one tick resolve by priority, not
/// arrival order: the higher class decides the outcome.
enum class InputPriority : int { None = 0, Arousal = 1, Direct = 2, RobotMoved = 3 };

struct InFlightStroke {
    Stroke stroke;
    bool pen_down = false;
    std::size_t next_index = 0;  // path index the pen is heading to
    Point cursor;
    bool at_segment_start = true;
};

struct StrokeStart {
    std::uint64_t stroke_id = 0;
    std::uint64_t at_ms = 0;
    Point first;
};

struct Session {
    SessionConfig config;
    std::uint64_t last_seq = 0;
    std::uint64_t now_ms = 0;
    std::optional<std::uint64_t> last_tick_ms;

    RobotMode mode = RobotMode::Idle;
    Point pos;
    bool outside = false;
    double paint_remaining_mm = 0.0;
    int refill_ticks_left = 0;
    Raster canvas;

    StreamGate gate;
    std::deque<BiometricSample> ppg;
    std::optional<std::uint64_t> last_estimate_sample_ms;
    std::uint64_t estimator_rejections = 0;
    std::optional<std::uint64_t> calibration_started_ms;
    std::vector<HeartRateEstimate> calibration_estimates;
    std::deque<HeartRateEstimate> recent_estimates;
    std::optional<HeartRateEstimate> last_hr;
    Baseline baseline;
    std::optional<ArousalState> arousal;
    LevelOverride level_override = LevelOverride::None;

    std::vector<TimedPoint> artist_points;
    Quadrant active;

    StrokePlan plan;
    bool plan_dirty = false;
    std::optional<std::uint8_t> plan_filtered_for;
    std::optional<InFlightStroke> in_flight;
    std::optional<std::uint8_t> in_flight_checked_for;
    /// Where the artist last put the robot; strokes starting in that quadrant
    /// stay at the front of the plan, including ones re-admitted later.
    std::optional<Point> reposition_target;
    std::vector<std::string> queued_prompts;
    int palette_index = 0;
    std::uint64_t next_stroke_id = 1;
    std::uint64_t plans_made = 0;
    std::uint64_t discarded_strokes = 0;

    InputPriority slot_priority = InputPriority::None;
    RobotMode slot_base_mode = RobotMode::Idle;
    LevelOverride slot_base_override = LevelOverride::None;

    std::uint64_t robot_pixel_writes = 0;
    std::uint64_t zone_violations = 0;
    std::uint64_t rejected_inputs = 0;
    std::vector<std::size_t> last_tick_robot_writes;
    std::vector<StrokeStart> stroke_starts;
    std::deque<SessionEvent> recent_events;
};

inline constexpr std::size_t kRecentEventCount = 50;

inline Session make_session(const SessionConfig& config) {
    validate_config(config);
    Session s;
    s.config = config;
    s.pos = config.robot.home;
    s.paint_remaining_mm = config.robot.paint_capacity_mm;
    s.canvas = Raster(config.canvas);
    s.active = config.initial_active;
    return s;
}

inline ArousalLevel effective_level(const Session& s) {
    switch (s.level_override) {
        case LevelOverride::ForcedAroused: return ArousalLevel::Aroused;
        case LevelOverride::ForcedNeutral: return ArousalLevel::Neutral;
        case LevelOverride::None: break;
    }
    return s.arousal ? s.arousal->level : ArousalLevel::Neutral;
}

inline ZonePolicy current_policy(const Session& s) { return zone_policy(effective_level(s), s.active); }

namespace detail {

inline bool engaged(RobotMode m) {
    return m == RobotMode::Painting || m == RobotMode::Withdrawn || m == RobotMode::Refill;
}

/// Where the robot belongs while it is working: finishing a refill, parked
/// away from an aroused artist, or painting.
inline RobotMode engaged_mode(const Session& s) {
    if (s.refill_ticks_left > 0) return RobotMode::Refill;
    return effective_level(s) == ArousalLevel::Aroused ? RobotMode::Withdrawn : RobotMode::Painting;
}

/// Applies one event to the session, collecting what it emits. Derived events
/// pass through the same handler as inputs so a log is one fold.
class Folder {
public:
    Folder(Session& s, std::uint64_t at_ms) : s_(s), at_ms_(at_ms) {}

    std::vector<SessionEvent> take() { return std::move(emitted_); }

    void handle(const SessionEvent& e) { std::visit([this](const auto& p) { on(p); }, e.payload); }

private:
    void emit(EventPayload payload) {
        SessionEvent e{++s_.last_seq, at_ms_, std::move(payload), std::nullopt};
        record(s_, e);
        emitted_.push_back(e);
        handle(emitted_.back());
    }

public:
    static void record(Session& s, const SessionEvent& e) {
        if (std::holds_alternative<ev::Tick>(e.payload) || std::holds_alternative<ev::SampleIn>(e.payload)) return;
        s.recent_events.push_back(e);
        while (s.recent_events.size() > kRecentEventCount) s.recent_events.pop_front();
    }

private:
    void set_mode(RobotMode m) {
        if (m == s_.mode) return;
        const RobotMode from = s_.mode;
        s_.mode = m;
        emit(ev::StateChanged{from, m, s_.robot_pixel_writes});
    }

    /// An outranked input has no mode effect of its own, but an engaged robot
    /// always ends up where the latest reading and override put it.
    template <typename F>
    void mode_effect(InputPriority prio, F&& effect) {
        if (prio >= s_.slot_priority) apply_slot(prio, std::forward<F>(effect));
        if (engaged(s_.mode)) set_mode(engaged_mode(s_));
    }

    template <typename F>
    void apply_slot(InputPriority prio, F&& effect) {
        if (prio > s_.slot_priority) {
            if (s_.slot_priority == InputPriority::None) {
                s_.slot_base_mode = s_.mode;
                s_.slot_base_override = s_.level_override;
            } else {
                s_.level_override = s_.slot_base_override;
                set_mode(s_.slot_base_mode);
            }
            s_.slot_priority = prio;
        }
        effect();
    }

    RobotMode resume_target() const {
        if (s_.baseline.calibrated) return engaged_mode(s_);
        return s_.calibration_started_ms ? RobotMode::Calibrating : RobotMode::Idle;
    }

    // --- biometrics -------------------------------------------------------

    void on(const ev::SampleIn& e) {
        const auto& sample = e.sample;
        if (!s_.gate.admit(sample)) return;
        if (!s_.calibration_started_ms) {
            s_.calibration_started_ms = at_ms_;
            if (s_.mode == RobotMode::Idle) set_mode(RobotMode::Calibrating);
        }
        if (sample.tag == SampleTag::HR) {
            if (!std::isfinite(sample.value) || !bpm_in_range(sample.value)) {
                ++s_.rejected_inputs;
                return;
            }
            emit(ev::HrUpdated{wrap_direct_hr(sample)});
            return;
        }

        const auto& ingest = s_.config.ingest;
        const auto window_ms = static_cast<std::uint64_t>(std::llround(ingest.estimator.window_s * 1000.0));
        s_.ppg.push_back(sample);
        while (!s_.ppg.empty() && sample.timestamp_ms - s_.ppg.front().timestamp_ms >= window_ms) s_.ppg.pop_front();

        const double span_s = static_cast<double>(sample.timestamp_ms - s_.ppg.front().timestamp_ms) / 1000.0 +
                              1.0 / ingest.sample_rate_hz;
        if (span_s + 1e-9 < ingest.estimator.window_s) return;
        if (s_.last_estimate_sample_ms &&
            sample.timestamp_ms - *s_.last_estimate_sample_ms < ingest.estimate_interval_ms) {
            return;
        }
        s_.last_estimate_sample_ms = sample.timestamp_ms;
        const std::vector<BiometricSample> window(s_.ppg.begin(), s_.ppg.end());
        try {
            emit(ev::HrUpdated{estimate_heart_rate(window, ingest.sample_rate_hz, ingest.estimator)});
        } catch (const Error&) {
            ++s_.estimator_rejections;
        }
    }

    void on(const ev::HrUpdated& e) {
        const auto& cfg = s_.config.arousal;
        s_.last_hr = e.estimate;
        s_.recent_estimates.push_back(e.estimate);
        while (s_.recent_estimates.size() > static_cast<std::size_t>(cfg.trend_points)) s_.recent_estimates.pop_front();
        if (!s_.calibration_started_ms) s_.calibration_started_ms = at_ms_;
        if (s_.mode == RobotMode::Idle) set_mode(RobotMode::Calibrating);

        if (!s_.baseline.calibrated) {
            s_.calibration_estimates.push_back(e.estimate);
            const auto elapsed = at_ms_ - *s_.calibration_started_ms;
            if (static_cast<double>(elapsed) >= cfg.calibration_s * 1000.0) {
                s_.baseline = calibrate_baseline(s_.calibration_estimates, cfg.min_baseline_estimates);
                if (s_.baseline.calibrated) on_calibrated();
            }
            return;
        }

        const std::vector<HeartRateEstimate> recent(s_.recent_estimates.begin(), s_.recent_estimates.end());
        const auto trend = fit_hr_trend(recent, e.estimate.timestamp_ms);
        const auto state = classify_arousal(trend.predicted_bpm, s_.baseline, s_.arousal, cfg, at_ms_);
        if (!s_.arousal || s_.arousal->level != state.level) {
            emit(ev::ArousalChanged{state});
        } else {
            s_.arousal = state;
        }
    }

    void on_calibrated() {
        if (s_.mode == RobotMode::Calibrating || s_.mode == RobotMode::Idle) set_mode(engaged_mode(s_));
        auto queued = std::move(s_.queued_prompts);
        s_.queued_prompts.clear();
        for (const auto& text : queued) plan_prompt(text);
    }

    void on(const ev::ArousalChanged& e) {
        s_.arousal = e.state;
        mode_effect(InputPriority::Arousal, [this] {
            s_.level_override = LevelOverride::None;
            if (engaged(s_.mode)) set_mode(engaged_mode(s_));
        });
    }

    // --- commands ---------------------------------------------------------

    void on(const ev::CommandIssued& e) {
        if (const auto* prompt = std::get_if<PaintPrompt>(&e.command)) {
            if (!s_.baseline.calibrated) {
                s_.queued_prompts.push_back(prompt->text);
            } else {
                plan_prompt(prompt->text);
            }
            return;
        }

        const auto cmd = std::get<DirectCommand>(e.command);
        if (cmd == DirectCommand::ChangeColors) {
            s_.palette_index = next_palette_index(s_.palette_index, s_.config.palette.size());
            return;
        }
        mode_effect(InputPriority::Direct, [this, cmd] {
            switch (cmd) {
                case DirectCommand::Stop:
                    set_mode(RobotMode::Stopped);
                    break;
                case DirectCommand::Pause:
                    if (s_.mode == RobotMode::Painting) set_mode(RobotMode::Paused);
                    break;
                case DirectCommand::Resume:
                    if (s_.mode == RobotMode::Paused) set_mode(engaged_mode(s_));
                    if (s_.mode == RobotMode::Stopped && !s_.outside) set_mode(resume_target());
                    break;
                case DirectCommand::MoveAway:
                    s_.level_override = LevelOverride::ForcedAroused;
                    if (engaged(s_.mode)) set_mode(engaged_mode(s_));
                    break;
                case DirectCommand::ComeBack:
                    s_.level_override = LevelOverride::ForcedNeutral;
                    if (engaged(s_.mode)) set_mode(engaged_mode(s_));
                    break;
                case DirectCommand::ChangeColors:
                    break;
            }
        });
    }

    void plan_prompt(const std::string& text) {
        try {
            PlannerOptions opts;
            opts.stroke_width_mm = s_.config.robot.stroke_width_mm;
            opts.first_id = s_.next_stroke_id;
            opts.palette_index = s_.palette_index;
            auto plan = plan_from_prompt(text, region_hint(text), s_.config.palette, s_.config.seed + s_.plans_made,
                                         s_.config.canvas, opts);
            s_.discarded_strokes += s_.plan.pending.size() + s_.plan.deferred.size() + (s_.in_flight ? 1 : 0);
            s_.next_stroke_id += plan.pending.size();
            ++s_.plans_made;
            s_.plan = std::move(plan);
            s_.in_flight.reset();
            s_.reposition_target.reset();
            s_.plan_dirty = true;
        } catch (const Error& err) {
            emit(ev::PromptRejected{text, std::string(to_string(err.code()))});
        }
    }

    // --- canvas inputs ----------------------------------------------------

    void on(const ev::ArtistStroke& e) {
        Stroke stroke = e.stroke;
        stroke.author = Author::Artist;
        stroke.id = s_.next_stroke_id;
        try {
            validate_stroke(stroke, s_.config.canvas);
        } catch (const Error&) {
            ++s_.rejected_inputs;
            return;
        }
        ++s_.next_stroke_id;
        rasterize_path(s_.canvas, stroke, stroke.path, s_.config.canvas, [](std::size_t) {});
        for (const auto& p : stroke.path) s_.artist_points.push_back({p, at_ms_});
        refresh_workspace();
    }

    void on(const ev::RobotMoved& e) {
        mode_effect(InputPriority::RobotMoved, [this, &e] {
            if (!e.pos) {
                s_.outside = true;
                set_mode(RobotMode::Stopped);
                return;
            }
            if (!in_bounds(*e.pos, s_.config.canvas)) {
                ++s_.rejected_inputs;
                return;
            }
            s_.outside = false;
            s_.pos = *e.pos;
            s_.reposition_target = *e.pos;
            abort_in_flight();
            s_.plan = reprioritize_for_position(s_.plan, *e.pos, s_.config.canvas);
            s_.plan_dirty = true;
            if (s_.mode == RobotMode::Painting || s_.mode == RobotMode::Paused || s_.mode == RobotMode::Withdrawn) {
                s_.level_override = LevelOverride::ForcedNeutral;
                set_mode(engaged_mode(s_));
            }
        });
    }

    void refresh_workspace() {
        const auto window_ms = static_cast<std::uint64_t>(std::llround(s_.config.workspace_window_s * 1000.0));
        const std::uint64_t cutoff = at_ms_ > window_ms ? at_ms_ - window_ms : 0;
        std::erase_if(s_.artist_points, [cutoff](const TimedPoint& tp) { return tp.at_ms < cutoff; });
        s_.active = active_workspace(s_.artist_points, at_ms_, s_.config.workspace_window_s, s_.config.canvas, s_.active);
    }

    // --- execution --------------------------------------------------------

    /// Puts the unpainted rest of the current stroke back at the head of the plan.
    void abort_in_flight() {
        if (!s_.in_flight) return;
        const auto& f = *s_.in_flight;
        Stroke rest = f.stroke;
        if (f.pen_down) {
            rest.path.clear();
            rest.path.push_back(f.cursor);
            rest.path.insert(rest.path.end(), f.stroke.path.begin() + static_cast<std::ptrdiff_t>(f.next_index),
                             f.stroke.path.end());
        }
        s_.in_flight.reset();
        if (rest.path.size() >= 2) {
            s_.plan.pending.insert(s_.plan.pending.begin(), std::move(rest));
            s_.plan_dirty = true;
        }
    }

    void on(const ev::Tick&) {
        s_.slot_priority = InputPriority::None;
        s_.last_tick_robot_writes.clear();
        s_.last_tick_ms = at_ms_;
        refresh_workspace();

        const auto& robot = s_.config.robot;
        const double dt_s = static_cast<double>(kTickMs) / 1000.0;
        switch (s_.mode) {
            case RobotMode::Painting:
                paint_for(dt_s);
                break;
            case RobotMode::Withdrawn: {
                abort_in_flight();
                const auto policy = current_policy(s_);
                const Point park = quadrant_center(policy.park.value_or(s_.active.diagonal()), s_.config.canvas);
                travel_toward(park, robot.travel_speed_mm_s * dt_s);
                break;
            }
            case RobotMode::Refill:
                if (--s_.refill_ticks_left <= 0) {
                    s_.refill_ticks_left = 0;
                    s_.paint_remaining_mm = robot.paint_capacity_mm;
                    emit(ev::PaintRefilled{s_.paint_remaining_mm});
                    set_mode(engaged_mode(s_));
                }
                break;
            case RobotMode::Idle:
            case RobotMode::Calibrating:
            case RobotMode::Paused:
            case RobotMode::Stopped:
                break;
        }
    }

    /// Returns the distance actually covered.
    double travel_toward(Point target, double max_mm) {
        const double d = distance(s_.pos, target);
        if (d <= max_mm) {
            s_.pos = target;
            return d;
        }
        const double f = max_mm / d;
        s_.pos = Point{s_.pos.x + (target.x - s_.pos.x) * f, s_.pos.y + (target.y - s_.pos.y) * f};
        return max_mm;
    }

    void refilter(const ZonePolicy& policy) {
        const auto bits = policy.paint_allowed.bits();
        if (s_.plan_dirty || s_.plan_filtered_for != bits) {
            s_.plan = filter_by_zones(s_.plan, policy, s_.config.canvas);
            if (s_.reposition_target) s_.plan = reprioritize_for_position(s_.plan, *s_.reposition_target, s_.config.canvas);
            s_.plan_dirty = false;
            s_.plan_filtered_for = bits;
        }
        if (s_.in_flight && s_.in_flight_checked_for != bits) {
            const auto& f = *s_.in_flight;
            std::vector<Point> rest;
            if (f.pen_down) {
                rest.push_back(f.cursor);
                rest.insert(rest.end(), f.stroke.path.begin() + static_cast<std::ptrdiff_t>(f.next_index),
                            f.stroke.path.end());
            } else {
                rest = f.stroke.path;
            }
            if (rest.size() < 2) rest.push_back(rest.back());
            if (stroke_allowed(rest, f.stroke.width_mm, policy.paint_allowed, s_.config.canvas)) {
                s_.in_flight_checked_for = bits;
            } else {
                abort_in_flight();
                s_.plan = filter_by_zones(s_.plan, policy, s_.config.canvas);
                if (s_.reposition_target) s_.plan = reprioritize_for_position(s_.plan, *s_.reposition_target, s_.config.canvas);
                s_.plan_dirty = false;
            }
        }
    }

    void enter_refill() {
        s_.refill_ticks_left = s_.config.robot.refill_ticks;
        s_.pos = s_.config.robot.paint_station;
        set_mode(RobotMode::Refill);
    }

    void paint_for(double seconds) {
        const auto& robot = s_.config.robot;
        const auto& spec = s_.config.canvas;
        const auto policy = current_policy(s_);
        refilter(policy);

        double time_left = seconds;
        while (time_left > 1e-12) {
            if (!s_.in_flight) {
                if (s_.plan.pending.empty()) break;
                s_.in_flight = InFlightStroke{s_.plan.pending.front(), false, 0, {}, true};
                s_.in_flight_checked_for = policy.paint_allowed.bits();
                s_.plan.pending.erase(s_.plan.pending.begin());
            }
            auto& f = *s_.in_flight;

            if (!f.pen_down) {
                const Point start = f.stroke.path.front();
                const double d = distance(s_.pos, start);
                const double reach = robot.travel_speed_mm_s * time_left;
                if (d > reach) {
                    travel_toward(start, reach);
                    time_left = 0.0;
                    break;
                }
                s_.pos = start;
                time_left -= d / robot.travel_speed_mm_s;
                f.pen_down = true;
                f.cursor = start;
                f.next_index = 1;
                f.at_segment_start = true;
                s_.stroke_starts.push_back({f.stroke.id, at_ms_, start});
            }

            const Point target = f.stroke.path[f.next_index];
            if (f.at_segment_start) {
                const double seg = distance(f.stroke.path[f.next_index - 1], target);
                if (s_.paint_remaining_mm < std::min(seg, robot.paint_capacity_mm)) {
                    enter_refill();
                    return;
                }
                f.at_segment_start = false;
            }

            const double remaining = distance(f.cursor, target);
            const double reach = robot.paint_speed_mm_s * time_left;
            Point next = target;
            if (remaining > reach) {
                const double t = reach / remaining;
                next = Point{f.cursor.x + (target.x - f.cursor.x) * t, f.cursor.y + (target.y - f.cursor.y) * t};
                time_left = 0.0;
            } else {
                time_left -= remaining / robot.paint_speed_mm_s;
            }

            const std::array<Point, 2> piece{f.cursor, next};
            rasterize_path(s_.canvas, f.stroke, piece, spec, [&](std::size_t i) {
                ++s_.robot_pixel_writes;
                s_.last_tick_robot_writes.push_back(i);
                if (!policy.paint_allowed.contains(pixel_quadrant(i, s_.canvas.width(), spec))) ++s_.zone_violations;
            });
            s_.paint_remaining_mm = std::max(0.0, s_.paint_remaining_mm - distance(f.cursor, next));
            f.cursor = next;
            s_.pos = next;

            if (next == target) {
                ++f.next_index;
                f.at_segment_start = true;
                if (f.next_index >= f.stroke.path.size()) s_.in_flight.reset();
            }
        }
    }

    void on(const ev::StateChanged&) {}
    void on(const ev::PromptRejected&) {}
    void on(const ev::PaintRefilled&) {}

    Session& s_;
    std::uint64_t at_ms_;
    std::vector<SessionEvent> emitted_;
};

}  // namespace detail

/// Folds one event into the session and returns the events it derived,
/// already folded and numbered after `event.seq`.
inline std::vector<SessionEvent> apply_event(Session& session, const SessionEvent& event) {
    if (event.seq != session.last_seq + 1) {
        throw Error(ErrorCode::SeqGap,
                    "expected seq " + std::to_string(session.last_seq + 1) + ", got " + std::to_string(event.seq));
    }
    const std::uint64_t at = std::max(event.at_ms, session.now_ms);
    session.last_seq = event.seq;
    session.now_ms = at;
    detail::Folder::record(session, event);
    detail::Folder folder(session, at);
    folder.handle(event);
    return folder.take();
}

/// Advances the session by one fixed step at `now_ms`.
inline std::vector<SessionEvent> tick(Session& session, std::uint64_t now_ms) {
    SessionEvent e{session.last_seq + 1, std::max(now_ms, session.last_tick_ms.value_or(0)), ev::Tick{}, std::nullopt};
    return apply_event(session, e);
}

/// Stamps the next seq on an input and folds it. The single-consumer side of
/// the event queue; also what scenario and test drivers use.
class SessionRunner {
public:
    explicit SessionRunner(const SessionConfig& config) : session_(make_session(config)) {}

    std::vector<SessionEvent> submit(EventPayload payload, std::uint64_t at_ms,
                                     std::optional<std::string> corr = std::nullopt) {
        SessionEvent e{session_.last_seq + 1, std::max(at_ms, session_.now_ms), std::move(payload), std::move(corr)};
        auto emitted = apply_event(session_, e);
        std::vector<SessionEvent> all;
        all.reserve(emitted.size() + 1);
        all.push_back(std::move(e));
        all.insert(all.end(), std::make_move_iterator(emitted.begin()), std::make_move_iterator(emitted.end()));
        log_.insert(log_.end(), all.begin(), all.end());
        return all;
    }

    const Session& session() const { return session_; }
    const std::vector<SessionEvent>& log() const { return log_; }

private:
    Session session_;
    std::vector<SessionEvent> log_;
};

// --- logs and replay ------------------------------------------------------

inline constexpr int kLogVersion = 1;

inline json log_header(const SessionConfig& config) {
    return json{{"type", "header"},
                {"version", kLogVersion},
                {"config_hash", config_hash(config)},
                {"canvas",
                 {{"width_mm", config.canvas.width_mm},
                  {"height_mm", config.canvas.height_mm},
                  {"px_per_mm", config.canvas.px_per_mm}}},
                {"config", to_json(config)}};
}

inline void write_log(std::ostream& out, const SessionConfig& config, const std::vector<SessionEvent>& events) {
    out << log_header(config).dump() << '\n';
    for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

struct SessionLog {
    json header;
    std::vector<SessionEvent> events;

    SessionConfig config() const { return config_from_json(header.at("config")); }
};

inline SessionLog read_log(std::istream& in) {
    SessionLog log;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::BadFormat, "log line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            if (j.value("type", "") != "header") throw Error(ErrorCode::BadFormat, "log must start with a header");
            log.header = std::move(j);
            have_header = true;
            continue;
        }
        log.events.push_back(event_from_json(j));
    }
    if (!have_header) throw Error(ErrorCode::BadFormat, "empty log");
    return log;
}

/// Re-derives the session from the inputs in `events`, checking that every
/// derived event the fold produces matches the one recorded.
inline Session replay_log(const std::vector<SessionEvent>& events, const SessionConfig& config,
                          const std::optional<std::string>& header_hash = std::nullopt) {
    if (header_hash && *header_hash != config_hash(config)) {
        throw Error(ErrorCode::ConfigMismatch, "log recorded with config " + *header_hash + ", replaying with " +
                                                   config_hash(config));
    }
    Session session = make_session(config);
    std::size_t i = 0;
    while (i < events.size()) {
        const auto& e = events[i];
        if (e.seq != session.last_seq + 1) {
            throw Error(ErrorCode::SeqGap, "expected seq " + std::to_string(session.last_seq + 1) + ", got " +
                                               std::to_string(e.seq));
        }
        if (!is_input(e.payload)) {
            throw Error(ErrorCode::ReplayDivergence,
                        "seq " + std::to_string(e.seq) + ": derived event not produced by replay");
        }
        const auto derived = apply_event(session, e);
        ++i;
        for (const auto& d : derived) {
            if (i >= events.size() || !(events[i] == d)) {
                throw Error(ErrorCode::ReplayDivergence, "seq " + std::to_string(d.seq) + ": replay produced " +
                                                             event_to_json(d).dump());
            }
            ++i;
        }
    }
    return session;
}

inline Session replay_log(const SessionLog& log, const SessionConfig& config) {
    return replay_log(log.events, config, log.header.at("config_hash").get<std::string>());
}

// --- snapshots --------------------------------------------------------------

struct Snapshot {
    std::uint64_t last_seq = 0;
    std::uint64_t now_ms = 0;
    RobotMode mode = RobotMode::Idle;
    Point pos;
    bool outside = false;
    std::optional<HeartRateEstimate> last_hr;
    std::optional<ArousalState> arousal;
    Baseline baseline;
    std::optional<double> threshold_bpm;
    ArousalLevel effective_level = ArousalLevel::Neutral;
    Quadrant active;
    ZonePolicy policy;
    std::size_t pending = 0;
    std::size_t deferred = 0;
    std::optional<std::uint64_t> current_stroke;
    double paint_remaining_mm = 0.0;
    int palette_index = 0;
    std::string digest;
    std::uint64_t robot_pixel_writes = 0;
    std::uint64_t zone_violations = 0;
    std::uint64_t dropped_samples = 0;
    std::vector<SessionEvent> recent_events;

    bool operator==(const Snapshot&) const = default;
};

inline Snapshot snapshot(const Session& s) {
    Snapshot snap;
    snap.last_seq = s.last_seq;
    snap.now_ms = s.now_ms;
    snap.mode = s.mode;
    snap.pos = s.pos;
    snap.outside = s.outside;
    snap.last_hr = s.last_hr;
    snap.arousal = s.arousal;
    snap.baseline = s.baseline;
    if (s.baseline.calibrated) snap.threshold_bpm = arousal_threshold(s.baseline, s.config.arousal);
    snap.effective_level = effective_level(s);
    snap.active = s.active;
    snap.policy = current_policy(s);
    snap.pending = s.plan.pending.size();
    snap.deferred = s.plan.deferred.size();
    if (s.in_flight) snap.current_stroke = s.in_flight->stroke.id;
    snap.paint_remaining_mm = s.paint_remaining_mm;
    snap.palette_index = s.palette_index;
    snap.digest = canvas_digest(s.canvas);
    snap.robot_pixel_writes = s.robot_pixel_writes;
    snap.zone_violations = s.zone_violations;
    snap.dropped_samples = s.gate.dropped();
    snap.recent_events.assign(s.recent_events.begin(), s.recent_events.end());
    return snap;
}

inline json quadrant_to_json(Quadrant q) { return json::array({q.col, q.row}); }

inline json to_json(const Snapshot& snap) {
    json allowed = json::array();
    for (auto q : snap.policy.paint_allowed.to_vector()) allowed.push_back(quadrant_to_json(q));
    json events = json::array();
    for (const auto& e : snap.recent_events) events.push_back(event_to_json(e));

    json j{{"last_seq", snap.last_seq},
           {"now_ms", snap.now_ms},
           {"mode", std::string(to_string(snap.mode))},
           {"pos", point_to_json(snap.pos)},
           {"outside", snap.outside},
           {"last_hr", nullptr},
           {"arousal", nullptr},
           {"baseline",
            {{"mu_bpm", snap.baseline.mu_bpm},
             {"sigma_bpm", snap.baseline.sigma_bpm},
             {"n_samples", snap.baseline.n_samples},
             {"calibrated", snap.baseline.calibrated}}},
           {"threshold_bpm", nullptr},
           {"effective_level", std::string(to_string(snap.effective_level))},
           {"active", quadrant_to_json(snap.active)},
           {"paint_allowed", allowed},
           {"park", nullptr},
           {"pending", snap.pending},
           {"deferred", snap.deferred},
           {"current_stroke", nullptr},
           {"paint_remaining_mm", snap.paint_remaining_mm},
           {"palette_index", snap.palette_index},
           {"digest", snap.digest},
           {"robot_pixel_writes", snap.robot_pixel_writes},
           {"zone_violations", snap.zone_violations},
           {"dropped_samples", snap.dropped_samples},
           {"recent_events", events}};
    if (snap.last_hr) j["last_hr"] = payload_to_json(ev::HrUpdated{*snap.last_hr});
    if (snap.arousal) j["arousal"] = payload_to_json(ev::ArousalChanged{*snap.arousal});
    if (snap.threshold_bpm) j["threshold_bpm"] = *snap.threshold_bpm;
    if (snap.policy.park) j["park"] = quadrant_to_json(*snap.policy.park);
    if (snap.current_stroke) j["current_stroke"] = *snap.current_stroke;
    return j;
}

/// Pixels each quadrant currently holds with robot provenance.
inline std::array<std::uint64_t, 4> robot_pixels_by_quadrant(const Session& s) {
    std::array<std::uint64_t, 4> counts{};
    for (std::size_t i = 0; i < s.canvas.pixel_count(); ++i) {
        if (s.canvas.provenance_at(i).author == Author::Robot) {
            ++counts[static_cast<std::size_t>(pixel_quadrant(i, s.canvas.width(), s.config.canvas).index())];
        }
    }
    return counts;
}

}  // namespace aura
