#pragma once

// SessionEvent: the single ordered currency of the engine, and its JSON form
// as written to session logs and the event stream.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "aura/arousal.hpp"
#include "aura/biometric.hpp"
#include "aura/canvas.hpp"
#include "aura/command.hpp"
#include "aura/config.hpp"
#include "aura/error.hpp"

namespace aura {

enum class RobotMode { Idle, Calibrating, Painting, Refill, Withdrawn, Paused, Stopped };

inline std::string_view to_string(RobotMode m) {
    switch (m) {
        case RobotMode::Idle:        return "Idle";
        case RobotMode::Calibrating: return "Calibrating";
        case RobotMode::Painting:    return "Painting";
        case RobotMode::Refill:      return "Refill";
        case RobotMode::Withdrawn:   return "Withdrawn";
        case RobotMode::Paused:      return "Paused";
        case RobotMode::Stopped:     return "Stopped";
    }
    return "Idle";
}

inline std::optional<RobotMode> robot_mode_from_string(std::string_view s) {
    for (auto m : {RobotMode::Idle, RobotMode::Calibrating, RobotMode::Painting, RobotMode::Refill,
                   RobotMode::Withdrawn, RobotMode::Paused, RobotMode::Stopped}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

namespace ev {

struct SampleIn {
    BiometricSample sample;
    bool operator==(const SampleIn&) const = default;
};
struct HrUpdated {
    HeartRateEstimate estimate;
    bool operator==(const HrUpdated&) const = default;
};
struct ArousalChanged {
    ArousalState state;
    bool operator==(const ArousalChanged&) const = default;
};
struct CommandIssued {
    std::string text;
    Command command;
    bool operator==(const CommandIssued&) const = default;
};
struct ArtistStroke {
    Stroke stroke;
    bool operator==(const ArtistStroke&) const = default;
};
/// No position means the robot was moved off the canvas.
struct RobotMoved {
    std::optional<Point> pos;
    bool operator==(const RobotMoved&) const = default;
};
struct Tick {
    bool operator==(const Tick&) const = default;
};
struct StateChanged {
    RobotMode from = RobotMode::Idle;
    RobotMode to = RobotMode::Idle;
    std::uint64_t robot_pixels = 0;
    bool operator==(const StateChanged&) const = default;
};
struct PromptRejected {
    std::string text;
    std::string reason;
    bool operator==(const PromptRejected&) const = default;
};
struct PaintRefilled {
    double paint_remaining_mm = 0.0;
    bool operator==(const PaintRefilled&) const = default;
};

}  // namespace ev

using EventPayload = std::variant<ev::SampleIn, ev::HrUpdated, ev::ArousalChanged, ev::CommandIssued,
                                  ev::ArtistStroke, ev::RobotMoved, ev::Tick, ev::StateChanged, ev::PromptRejected,
                                  ev::PaintRefilled>;

struct SessionEvent {
    std::uint64_t seq = 0;
    std::uint64_t at_ms = 0;
    EventPayload payload;
    /// Set on events that originate from a client request, so the client can
    /// match the acknowledgement to what it sent.
    std::optional<std::string> corr;

    bool operator==(const SessionEvent&) const = default;
};

/// Inputs are what producers enqueue; everything else is derived by the fold.
inline bool is_input(const EventPayload& p) {
    return std::holds_alternative<ev::SampleIn>(p) || std::holds_alternative<ev::CommandIssued>(p) ||
           std::holds_alternative<ev::ArtistStroke>(p) || std::holds_alternative<ev::RobotMoved>(p) ||
           std::holds_alternative<ev::Tick>(p);
}

inline std::string_view event_type(const EventPayload& p) {
    struct Visitor {
        std::string_view operator()(const ev::SampleIn&) const { return "SampleIn"; }
        std::string_view operator()(const ev::HrUpdated&) const { return "HrUpdated"; }
        std::string_view operator()(const ev::ArousalChanged&) const { return "ArousalChanged"; }
        std::string_view operator()(const ev::CommandIssued&) const { return "CommandIssued"; }
        std::string_view operator()(const ev::ArtistStroke&) const { return "ArtistStroke"; }
        std::string_view operator()(const ev::RobotMoved&) const { return "RobotMoved"; }
        std::string_view operator()(const ev::Tick&) const { return "Tick"; }
        std::string_view operator()(const ev::StateChanged&) const { return "StateChanged"; }
        std::string_view operator()(const ev::PromptRejected&) const { return "PromptRejected"; }
        std::string_view operator()(const ev::PaintRefilled&) const { return "PaintRefilled"; }
    };
    return std::visit(Visitor{}, p);
}

inline json stroke_to_json(const Stroke& s) {
    json path = json::array();
    for (const auto& p : s.path) path.push_back(point_to_json(p));
    return json{{"id", s.id},
                {"author", std::string(to_string(s.author))},
                {"color", rgb_to_json(s.color)},
                {"width_mm", s.width_mm},
                {"path", path}};
}

/// `id` and `author` are optional on input; the engine assigns both for
/// artist strokes.
inline Stroke stroke_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::BadFormat, "stroke must be an object");
    Stroke s;
    s.id = j.value("id", std::uint64_t{0});
    const auto author = j.value("author", std::string("Artist"));
    if (author == "Artist") {
        s.author = Author::Artist;
    } else if (author == "Robot") {
        s.author = Author::Robot;
    } else {
        throw Error(ErrorCode::BadFormat, "unknown author '" + author + "'");
    }
    s.color = j.contains("color") ? rgb_from_json(j.at("color")) : Rgb{0, 0, 0};
    if (j.contains("width_mm")) {
        if (!j.at("width_mm").is_number()) throw Error(ErrorCode::BadFormat, "width_mm must be a number");
        s.width_mm = j.at("width_mm").get<double>();
    }
    if (!j.contains("path") || !j.at("path").is_array()) throw Error(ErrorCode::BadFormat, "stroke needs a path array");
    for (const auto& p : j.at("path")) s.path.push_back(point_from_json(p));
    return s;
}

inline json command_to_json(const Command& c) {
    if (const auto* d = std::get_if<DirectCommand>(&c)) {
        return json{{"kind", "direct"}, {"command", std::string(to_string(*d))}};
    }
    return json{{"kind", "prompt"}, {"prompt", std::get<PaintPrompt>(c).text}};
}

inline Command command_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "direct") {
        const auto d = direct_command_from_string(j.at("command").get<std::string>());
        if (!d) throw Error(ErrorCode::BadFormat, "unknown direct command");
        return *d;
    }
    if (kind == "prompt") return PaintPrompt{j.at("prompt").get<std::string>()};
    throw Error(ErrorCode::BadFormat, "unknown command kind '" + kind + "'");
}

inline json payload_to_json(const EventPayload& payload) {
    struct Visitor {
        json operator()(const ev::SampleIn& e) const {
            return {{"tag", std::string(to_string(e.sample.tag))},
                    {"timestamp_ms", e.sample.timestamp_ms},
                    {"value", e.sample.value}};
        }
        json operator()(const ev::HrUpdated& e) const {
            return {{"timestamp_ms", e.estimate.timestamp_ms},
                    {"bpm", e.estimate.bpm},
                    {"confidence", e.estimate.confidence},
                    {"n_peaks", e.estimate.n_peaks},
                    {"window_s", e.estimate.window_s}};
        }
        json operator()(const ev::ArousalChanged& e) const {
            return {{"level", std::string(to_string(e.state.level))},
                    {"predicted_bpm", e.state.predicted_bpm},
                    {"threshold_bpm", e.state.threshold_bpm},
                    {"near_band_bpm", e.state.near_band_bpm},
                    {"at_ms", e.state.at_ms}};
        }
        json operator()(const ev::CommandIssued& e) const {
            json j = command_to_json(e.command);
            j["text"] = e.text;
            return j;
        }
        json operator()(const ev::ArtistStroke& e) const { return stroke_to_json(e.stroke); }
        json operator()(const ev::RobotMoved& e) const {
            if (!e.pos) return {{"outside", true}};
            return {{"x_mm", e.pos->x}, {"y_mm", e.pos->y}};
        }
        json operator()(const ev::Tick&) const { return json::object(); }
        json operator()(const ev::StateChanged& e) const {
            return {{"from", std::string(to_string(e.from))},
                    {"to", std::string(to_string(e.to))},
                    {"robot_pixels", e.robot_pixels}};
        }
        json operator()(const ev::PromptRejected& e) const { return {{"text", e.text}, {"reason", e.reason}}; }
        json operator()(const ev::PaintRefilled& e) const { return {{"paint_remaining_mm", e.paint_remaining_mm}}; }
    };
    return std::visit(Visitor{}, payload);
}

inline EventPayload payload_from_json(std::string_view type, const json& p) {
    if (type == "SampleIn") {
        const auto tag = p.at("tag").get<std::string>();
        if (tag != "PG" && tag != "HR") throw Error(ErrorCode::UnknownTag, tag);
        return ev::SampleIn{{tag == "PG" ? SampleTag::PG : SampleTag::HR, p.at("timestamp_ms").get<std::uint64_t>(),
                             p.at("value").get<double>()}};
    }
    if (type == "HrUpdated") {
        return ev::HrUpdated{{p.at("timestamp_ms").get<std::uint64_t>(), p.at("bpm").get<double>(),
                              p.at("confidence").get<double>(), p.at("n_peaks").get<int>(),
                              p.at("window_s").get<double>()}};
    }
    if (type == "ArousalChanged") {
        const auto level = arousal_level_from_string(p.at("level").get<std::string>());
        if (!level) throw Error(ErrorCode::BadFormat, "unknown arousal level");
        return ev::ArousalChanged{{*level, p.at("predicted_bpm").get<double>(), p.at("threshold_bpm").get<double>(),
                                   p.at("near_band_bpm").get<double>(), p.at("at_ms").get<std::uint64_t>()}};
    }
    if (type == "CommandIssued") return ev::CommandIssued{p.at("text").get<std::string>(), command_from_json(p)};
    if (type == "ArtistStroke") return ev::ArtistStroke{stroke_from_json(p)};
    if (type == "RobotMoved") {
        if (p.value("outside", false)) return ev::RobotMoved{std::nullopt};
        return ev::RobotMoved{Point{p.at("x_mm").get<double>(), p.at("y_mm").get<double>()}};
    }
    if (type == "Tick") return ev::Tick{};
    if (type == "StateChanged") {
        const auto from = robot_mode_from_string(p.at("from").get<std::string>());
        const auto to = robot_mode_from_string(p.at("to").get<std::string>());
        if (!from || !to) throw Error(ErrorCode::BadFormat, "unknown robot mode");
        return ev::StateChanged{*from, *to, p.at("robot_pixels").get<std::uint64_t>()};
    }
    if (type == "PromptRejected") {
        return ev::PromptRejected{p.at("text").get<std::string>(), p.at("reason").get<std::string>()};
    }
    if (type == "PaintRefilled") return ev::PaintRefilled{p.at("paint_remaining_mm").get<double>()};
    throw Error(ErrorCode::BadFormat, "unknown event type '" + std::string(type) + "'");
}

inline json event_to_json(const SessionEvent& e) {
    json j{{"seq", e.seq}, {"at_ms", e.at_ms}, {"type", std::string(event_type(e.payload))},
           {"payload", payload_to_json(e.payload)}};
    if (e.corr) j["corr"] = *e.corr;
    return j;
}

inline SessionEvent event_from_json(const json& j) {
    try {
        SessionEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.at_ms = j.at("at_ms").get<std::uint64_t>();
        e.payload = payload_from_json(j.at("type").get<std::string>(), j.at("payload"));
        if (j.contains("corr")) e.corr = j.at("corr").get<std::string>();
        return e;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::BadFormat, ex.what());
    }
}

}  // namespace aura
