#pragma once

// Artist text is either a direct command (an immediate override) or a
// painting prompt handed to the planner.

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "aura/error.hpp"

namespace aura {

enum class DirectCommand { Stop, Pause, Resume, ChangeColors, MoveAway, ComeBack };

inline std::string_view to_string(DirectCommand c) {
    switch (c) {
        case DirectCommand::Stop:         return "Stop";
        case DirectCommand::Pause:        return "Pause";
        case DirectCommand::Resume:       return "Resume";
        case DirectCommand::ChangeColors: return "ChangeColors";
        case DirectCommand::MoveAway:     return "MoveAway";
        case DirectCommand::ComeBack:     return "ComeBack";
    }
    return "Stop";
}

inline std::optional<DirectCommand> direct_command_from_string(std::string_view s) {
    for (auto c : {DirectCommand::Stop, DirectCommand::Pause, DirectCommand::Resume, DirectCommand::ChangeColors,
                   DirectCommand::MoveAway, DirectCommand::ComeBack}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

/// Reserved phrases, matched after normalization.
inline constexpr std::array<std::pair<std::string_view, DirectCommand>, 9> kDirectGrammar{{
    {"stop", DirectCommand::Stop},
    {"stop painting", DirectCommand::Stop},
    {"pause", DirectCommand::Pause},
    {"resume", DirectCommand::Resume},
    {"continue", DirectCommand::Resume},
    {"change colors", DirectCommand::ChangeColors},
    {"change color", DirectCommand::ChangeColors},
    {"move away", DirectCommand::MoveAway},
    {"come back", DirectCommand::ComeBack},
}};

struct PaintPrompt {
    std::string text;

    bool operator==(const PaintPrompt&) const = default;
};

using Command = std::variant<DirectCommand, PaintPrompt>;

/// Lowercase, trim, and collapse internal whitespace runs to one space.
inline std::string normalize_command_text(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        const auto uch = static_cast<unsigned char>(ch);
        if (std::isspace(uch)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(uch));
    }
    return out;
}

inline Command parse_command(std::string_view text) {
    const std::string norm = normalize_command_text(text);
    if (norm.empty()) throw Error(ErrorCode::EmptyInput, "empty command text");
    for (const auto& [phrase, cmd] : kDirectGrammar) {
        if (norm == phrase) return cmd;
    }
    return PaintPrompt{norm};
}

}  // namespace aura
