#pragma once

// Procedural stroke plans for painting prompts, zone filtering and
// reprioritization after the robot is physically repositioned.
//
// Pattern table (stroke counts are part of the contract, see docs/patterns.md):
//   circle  8   eight 45-degree arcs of one ring
//   grid   16   four horizontal and four vertical lines, each split in two
//   star   10   the ten edges of a five-pointed star
//   flower  7   six petal loops and a stem
//   vase    6   left and right contour, base, two rim arcs, a decorative band

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aura/canvas.hpp"
#include "aura/error.hpp"

namespace aura {

enum class Pattern { Circle, Grid, Star, Flower, Vase };

inline constexpr std::array<std::string_view, 5> kPatternKeywords{"circle", "grid", "star", "flower", "vase"};
inline constexpr std::array<int, 5> kPatternStrokeCounts{8, 16, 10, 7, 6};

inline std::string_view to_string(Pattern p) { return kPatternKeywords[static_cast<std::size_t>(p)]; }

struct StrokePlan {
    std::string prompt;
    std::uint64_t seed = 0;
    std::vector<Stroke> pending;
    std::vector<Stroke> deferred;
    int palette_index = 0;

    bool empty() const { return pending.empty() && deferred.empty(); }
    bool operator==(const StrokePlan&) const = default;
};

struct PlannerOptions {
    double stroke_width_mm = 2.0;
    std::uint64_t first_id = 1;
    int palette_index = 0;
};

namespace detail {

inline std::vector<std::string> words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// splitmix64; a stateless hash is enough for per-stroke jitter.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform in [-1, 1], deterministic in (seed, salt).
inline double jitter(std::uint64_t seed, std::uint64_t salt) {
    const auto bits = mix(seed ^ mix(salt)) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53 * 2.0 - 1.0;
}

using UnitPath = std::vector<Point>;

inline UnitPath arc(Point c, double rx, double ry, double a0, double a1, int segments) {
    UnitPath out;
    for (int i = 0; i <= segments; ++i) {
        const double a = a0 + (a1 - a0) * i / segments;
        out.push_back({c.x + rx * std::cos(a), c.y + ry * std::sin(a)});
    }
    return out;
}

inline std::vector<UnitPath> circle_paths(std::uint64_t seed) {
    const double rot = (jitter(seed, 1) + 1.0) * std::numbers::pi / 8.0;
    std::vector<UnitPath> out;
    for (int k = 0; k < 8; ++k) {
        const double a0 = rot + k * std::numbers::pi / 4.0;
        out.push_back(arc({0.5, 0.5}, 0.42, 0.42, a0, a0 + std::numbers::pi / 4.0, 6));
    }
    return out;
}

inline std::vector<UnitPath> grid_paths(std::uint64_t seed) {
    std::vector<UnitPath> out;
    constexpr std::array<double, 4> lines{0.1, 0.3, 0.7, 0.9};
    std::uint64_t salt = 10;
    for (bool horizontal : {true, false}) {
        for (double u : lines) {
            const double v = u + 0.01 * jitter(seed, salt++);
            for (auto [s0, s1] : {std::pair{0.1, 0.4}, std::pair{0.6, 0.9}}) {
                if (horizontal) {
                    out.push_back({{s0, v}, {(s0 + s1) / 2, v}, {s1, v}});
                } else {
                    out.push_back({{v, s0}, {v, (s0 + s1) / 2}, {v, s1}});
                }
            }
        }
    }
    return out;
}

inline std::vector<UnitPath> star_paths(std::uint64_t seed) {
    const double rot = -std::numbers::pi / 2.0 + 0.1 * jitter(seed, 2);
    std::vector<Point> vertices;
    for (int i = 0; i < 10; ++i) {
        const double r = i % 2 == 0 ? 0.45 : 0.18;
        const double a = rot + i * std::numbers::pi / 5.0;
        vertices.push_back({0.5 + r * std::cos(a), 0.5 + r * std::sin(a)});
    }
    std::vector<UnitPath> out;
    for (int i = 0; i < 10; ++i) {
        const Point a = vertices[static_cast<std::size_t>(i)];
        const Point b = vertices[static_cast<std::size_t>((i + 1) % 10)];
        out.push_back({a, {(a.x + b.x) / 2, (a.y + b.y) / 2}, b});
    }
    return out;
}

inline std::vector<UnitPath> flower_paths(std::uint64_t seed) {
    const Point center{0.5, 0.38};
    const double rot = 0.2 * jitter(seed, 3);
    std::vector<UnitPath> out;
    for (int k = 0; k < 6; ++k) {
        const double dir = rot + k * std::numbers::pi / 3.0;
        const Point pc{center.x + 0.14 * std::cos(dir), center.y + 0.14 * std::sin(dir)};
        UnitPath petal;
        for (int i = 0; i <= 12; ++i) {
            const double a = 2.0 * std::numbers::pi * i / 12.0;
            const double u = 0.12 * std::cos(a);
            const double v = 0.06 * std::sin(a);
            petal.push_back({pc.x + u * std::cos(dir) - v * std::sin(dir), pc.y + u * std::sin(dir) + v * std::cos(dir)});
        }
        out.push_back(std::move(petal));
    }
    UnitPath stem;
    const double sway = 0.03 * (1.0 + 0.5 * jitter(seed, 4));
    for (int i = 0; i <= 8; ++i) {
        const double s = i / 8.0;
        stem.push_back({0.5 + sway * std::sin(std::numbers::pi * s), 0.56 + 0.38 * s});
    }
    out.push_back(std::move(stem));
    return out;
}

inline std::vector<UnitPath> vase_paths(std::uint64_t seed) {
    const double bulge = 0.25 - 0.02 * jitter(seed, 5);
    const UnitPath left{{0.35, 0.3}, {0.3, 0.45}, {bulge, 0.65}, {0.3, 0.85}, {0.38, 0.92}};
    UnitPath right;
    for (auto p : left) right.push_back({1.0 - p.x, p.y});
    const UnitPath base{{0.38, 0.92}, {0.5, 0.92}, {0.62, 0.92}};
    const UnitPath rim_top = arc({0.5, 0.3}, 0.15, 0.04, std::numbers::pi, 2.0 * std::numbers::pi, 8);
    const UnitPath rim_bottom = arc({0.5, 0.3}, 0.15, 0.04, 0.0, std::numbers::pi, 8);
    UnitPath band;
    for (int i = 0; i <= 20; ++i) {
        const double s = i / 20.0;
        band.push_back({0.3 + 0.4 * s, 0.62 + 0.015 * std::sin(10.0 * std::numbers::pi * s)});
    }
    return {left, right, base, rim_top, rim_bottom, band};
}

inline std::vector<UnitPath> pattern_paths(Pattern p, std::uint64_t seed) {
    switch (p) {
        case Pattern::Circle: return circle_paths(seed);
        case Pattern::Grid:   return grid_paths(seed);
        case Pattern::Star:   return star_paths(seed);
        case Pattern::Flower: return flower_paths(seed);
        case Pattern::Vase:   return vase_paths(seed);
    }
    return {};
}

}  // namespace detail

/// First pattern keyword (singular or plural) in reading order.
inline std::optional<Pattern> match_pattern(std::string_view prompt) {
    for (const auto& w : detail::words(prompt)) {
        for (std::size_t i = 0; i < kPatternKeywords.size(); ++i) {
            const auto kw = kPatternKeywords[i];
            if (w == kw || (w.size() == kw.size() + 1 && w.starts_with(kw) && w.back() == 's')) {
                return static_cast<Pattern>(i);
            }
        }
    }
    return std::nullopt;
}

/// "top left", "upper right", "bottom left", "lower right" select a quadrant.
inline std::optional<Quadrant> region_hint(std::string_view prompt) {
    const auto ws = detail::words(prompt);
    for (std::size_t i = 0; i + 1 < ws.size(); ++i) {
        int row = -1;
        int col = -1;
        if (ws[i] == "top" || ws[i] == "upper") row = 0;
        if (ws[i] == "bottom" || ws[i] == "lower") row = 1;
        if (ws[i + 1] == "left") col = 0;
        if (ws[i + 1] == "right") col = 1;
        if (row >= 0 && col >= 0) return Quadrant{col, row};
    }
    return std::nullopt;
}

struct RegionRect {
    double x0, y0, x1, y1;
};

inline RegionRect region_rect(std::optional<Quadrant> region, const CanvasSpec& spec) {
    if (!region) return {0.0, 0.0, spec.width_mm, spec.height_mm};
    const double hw = spec.width_mm / 2.0;
    const double hh = spec.height_mm / 2.0;
    return {region->col * hw, region->row * hh, (region->col + 1) * hw, (region->row + 1) * hh};
}

/// Deterministic procedural plan. Unit-square pattern geometry is scaled into the
/// largest centered square that keeps the brush footprint inside `region`.
inline StrokePlan plan_from_prompt(std::string_view prompt, std::optional<Quadrant> region,
                                   std::span<const Rgb> palette, std::uint64_t seed, const CanvasSpec& spec,
                                   const PlannerOptions& opts = {}) {
    if (detail::trim(prompt).empty()) throw Error(ErrorCode::EmptyInput, "empty prompt");
    const auto pattern = match_pattern(prompt);
    if (!pattern) throw Error(ErrorCode::UnknownPattern, std::string(prompt));
    if (palette.empty()) throw Error(ErrorCode::BadConfig, "empty palette");

    const RegionRect r = region_rect(region, spec);
    const double brush_mm = stamp_radius_px(opts.stroke_width_mm, spec) / spec.px_per_mm;
    const double inset = brush_mm + 2.0 / spec.px_per_mm;
    const double side = std::min(r.x1 - r.x0, r.y1 - r.y0) - 2.0 * inset;
    if (side <= 0.0) throw Error(ErrorCode::BadConfig, "region too small for the brush");
    const double ox = (r.x0 + r.x1 - side) / 2.0;
    const double oy = (r.y0 + r.y1 - side) / 2.0;

    const int palette_index = opts.palette_index;
    const Rgb color = palette[static_cast<std::size_t>(palette_index) % palette.size()];

    StrokePlan plan;
    plan.prompt = std::string(prompt);
    plan.seed = seed;
    plan.palette_index = palette_index;
    std::uint64_t id = opts.first_id;
    for (const auto& unit : detail::pattern_paths(*pattern, seed)) {
        Stroke s;
        s.id = id++;
        s.author = Author::Robot;
        s.color = color;
        s.width_mm = opts.stroke_width_mm;
        for (const auto& u : unit) {
            s.path.push_back({ox + std::clamp(u.x, 0.0, 1.0) * side, oy + std::clamp(u.y, 0.0, 1.0) * side});
        }
        plan.pending.push_back(std::move(s));
    }
    return plan;
}

/// Every path point and every pixel the brush would touch must lie in `allowed`.
inline bool stroke_allowed(std::span<const Point> path, double width_mm, QuadrantSet allowed, const CanvasSpec& spec) {
    if (allowed.empty()) return false;
    for (const auto& p : path) {
        if (!in_bounds(p, spec) || !allowed.contains(quadrant_of(p, spec))) return false;
    }
    if (allowed == QuadrantSet::all()) return true;
    return footprint_quadrants(path, width_mm, spec).subset_of(allowed);
}

/// Executable strokes stay (or return) in `pending`; the rest wait in `deferred`.
/// Pending keeps its current order with re-admitted strokes appended in id order;
/// deferred is always kept in id (planning) order.
inline StrokePlan filter_by_zones(const StrokePlan& plan, const ZonePolicy& policy, const CanvasSpec& spec) {
    StrokePlan out;
    out.prompt = plan.prompt;
    out.seed = plan.seed;
    out.palette_index = plan.palette_index;

    const auto ok = [&](const Stroke& s) { return stroke_allowed(s.path, s.width_mm, policy.paint_allowed, spec); };
    std::vector<Stroke> readmitted;
    for (const auto& s : plan.pending) (ok(s) ? out.pending : out.deferred).push_back(s);
    for (const auto& s : plan.deferred) (ok(s) ? readmitted : out.deferred).push_back(s);

    const auto by_id = [](const Stroke& a, const Stroke& b) { return a.id < b.id; };
    std::stable_sort(readmitted.begin(), readmitted.end(), by_id);
    std::stable_sort(out.deferred.begin(), out.deferred.end(), by_id);
    out.pending.insert(out.pending.end(), readmitted.begin(), readmitted.end());
    return out;
}

/// Stable partition of pending: strokes starting in the quadrant of `pos` first.
inline StrokePlan reprioritize_for_position(const StrokePlan& plan, Point pos, const CanvasSpec& spec) {
    const Quadrant target = quadrant_of(pos, spec);
    StrokePlan out = plan;
    std::stable_partition(out.pending.begin(), out.pending.end(), [&](const Stroke& s) {
        return in_bounds(s.path.front(), spec) && quadrant_of(s.path.front(), spec) == target;
    });
    return out;
}

inline int next_palette_index(int current, std::size_t palette_size) {
    if (palette_size == 0) return 0;
    return static_cast<int>((static_cast<std::size_t>(current) + 1) % palette_size);
}

}  // namespace aura
