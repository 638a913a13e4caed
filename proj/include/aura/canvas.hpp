#pragma once

// Canvas geometry, the four-quadrant partition and proximity policy, stroke
// rasterization with per-pixel authorship, digests and PPM export.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aura/arousal.hpp"
#include "aura/error.hpp"

namespace aura {

struct CanvasSpec {
    double width_mm = 280.0;
    double height_mm = 216.0;
    double px_per_mm = 2.0;

    int pixel_width() const { return static_cast<int>(std::lround(width_mm * px_per_mm)); }
    int pixel_height() const { return static_cast<int>(std::lround(height_mm * px_per_mm)); }

    bool operator==(const CanvasSpec&) const = default;
};

inline void validate_canvas_spec(const CanvasSpec& spec) {
    const bool finite = std::isfinite(spec.width_mm) && std::isfinite(spec.height_mm) && std::isfinite(spec.px_per_mm);
    if (!finite || spec.width_mm <= 0 || spec.height_mm <= 0 || spec.px_per_mm <= 0) {
        throw Error(ErrorCode::BadConfig, "canvas dimensions must be positive");
    }
    if (spec.pixel_width() < 2 || spec.pixel_height() < 2) {
        throw Error(ErrorCode::BadConfig, "canvas must rasterize to at least 2x2 pixels");
    }
}

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

inline double distance(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

inline bool in_bounds(Point p, const CanvasSpec& spec) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= spec.width_mm && p.y <= spec.height_mm;
}

struct Quadrant {
    int col = 0;  // 0 = left
    int row = 0;  // 0 = top

    constexpr Quadrant diagonal() const { return {1 - col, 1 - row}; }
    constexpr std::array<Quadrant, 2> adjacent() const { return {Quadrant{1 - col, row}, Quadrant{col, 1 - row}}; }
    constexpr int index() const { return row * 2 + col; }
    static constexpr Quadrant from_index(int i) { return {i % 2, i / 2}; }

    constexpr bool operator==(const Quadrant&) const = default;
};

inline constexpr std::array<Quadrant, 4> kAllQuadrants{Quadrant{0, 0}, Quadrant{1, 0}, Quadrant{0, 1}, Quadrant{1, 1}};

/// Points on a midline belong to the right column / bottom row.
inline Quadrant quadrant_of(Point p, const CanvasSpec& spec) {
    if (!in_bounds(p, spec)) {
        throw Error(ErrorCode::OutOfBounds, "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
    }
    return Quadrant{p.x < spec.width_mm / 2.0 ? 0 : 1, p.y < spec.height_mm / 2.0 ? 0 : 1};
}

inline Point quadrant_center(Quadrant q, const CanvasSpec& spec) {
    return Point{(0.25 + 0.5 * q.col) * spec.width_mm, (0.25 + 0.5 * q.row) * spec.height_mm};
}

/// Small value set over the four quadrants.
class QuadrantSet {
public:
    constexpr QuadrantSet() = default;
    constexpr QuadrantSet(std::initializer_list<Quadrant> qs) {
        for (auto q : qs) insert(q);
    }
    static constexpr QuadrantSet all() { return QuadrantSet(0b1111); }
    static constexpr QuadrantSet from_bits(std::uint8_t bits) { return QuadrantSet(bits & 0b1111); }

    constexpr void insert(Quadrant q) { bits_ |= static_cast<std::uint8_t>(1u << q.index()); }
    constexpr bool contains(Quadrant q) const { return (bits_ >> q.index()) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr int size() const { return std::popcount(bits_); }
    constexpr bool subset_of(QuadrantSet other) const { return (bits_ & ~other.bits_) == 0; }
    constexpr std::uint8_t bits() const { return bits_; }

    std::vector<Quadrant> to_vector() const {
        std::vector<Quadrant> out;
        for (auto q : kAllQuadrants) {
            if (contains(q)) out.push_back(q);
        }
        return out;
    }

    constexpr bool operator==(const QuadrantSet&) const = default;

private:
    constexpr explicit QuadrantSet(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

struct ZonePolicy {
    Quadrant active;
    QuadrantSet paint_allowed;
    std::optional<Quadrant> park;

    bool operator==(const ZonePolicy&) const = default;
};

inline ZonePolicy zone_policy(ArousalLevel level, Quadrant active) {
    switch (level) {
        case ArousalLevel::Neutral:
            return ZonePolicy{active, QuadrantSet::all(), std::nullopt};
        case ArousalLevel::NearThreshold: {
            const auto adj = active.adjacent();
            return ZonePolicy{active, QuadrantSet{adj[0], adj[1]}, std::nullopt};
        }
        case ArousalLevel::Aroused:
            return ZonePolicy{active, QuadrantSet{}, active.diagonal()};
    }
    return ZonePolicy{active, QuadrantSet::all(), std::nullopt};
}

struct TimedPoint {
    Point p;
    std::uint64_t at_ms = 0;
};

/// Plurality quadrant of artist points seen in the last `window_s`. Ties go to
/// the quadrant holding the most recent point; no points in window keeps `prev`.
inline Quadrant active_workspace(std::span<const TimedPoint> points, std::uint64_t now_ms, double window_s,
                                 const CanvasSpec& spec, Quadrant prev) {
    const auto window_ms = static_cast<std::uint64_t>(std::llround(window_s * 1000.0));
    const std::uint64_t cutoff = now_ms > window_ms ? now_ms - window_ms : 0;

    std::array<int, 4> counts{};
    std::array<std::int64_t, 4> latest{-1, -1, -1, -1};
    std::int64_t order = 0;
    for (const auto& tp : points) {
        ++order;
        if (tp.at_ms < cutoff || tp.at_ms > now_ms || !in_bounds(tp.p, spec)) continue;
        const int q = quadrant_of(tp.p, spec).index();
        ++counts[q];
        // Later in the sequence counts as more recent at equal timestamps.
        latest[q] = std::max(latest[q], static_cast<std::int64_t>(tp.at_ms) * 1'000'000 + order);
    }

    int best = -1;
    for (int q = 0; q < 4; ++q) {
        if (counts[q] == 0) continue;
        if (best < 0 || counts[q] > counts[best] || (counts[q] == counts[best] && latest[q] > latest[best])) best = q;
    }
    return best < 0 ? prev : Quadrant::from_index(best);
}

enum class Author : std::uint8_t { None = 0, Artist = 1, Robot = 2 };

inline std::string_view to_string(Author a) {
    switch (a) {
        case Author::None:   return "None";
        case Author::Artist: return "Artist";
        case Author::Robot:  return "Robot";
    }
    return "None";
}

struct Rgb {
    std::uint8_t r = 255;
    std::uint8_t g = 255;
    std::uint8_t b = 255;

    bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

struct Stroke {
    std::uint64_t id = 0;
    Author author = Author::Robot;
    Rgb color{0, 0, 0};
    double width_mm = 1.0;
    std::vector<Point> path;

    bool operator==(const Stroke&) const = default;
};

inline void validate_stroke(const Stroke& stroke, const CanvasSpec& spec) {
    if (stroke.path.size() < 2) throw Error(ErrorCode::BadFormat, "stroke path needs at least 2 points");
    if (!(stroke.width_mm > 0.0) || !std::isfinite(stroke.width_mm)) {
        throw Error(ErrorCode::BadFormat, "stroke width must be positive");
    }
    for (const auto& p : stroke.path) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !in_bounds(p, spec)) {
            throw Error(ErrorCode::OutOfBounds, "stroke point outside canvas");
        }
    }
}

inline double path_length(std::span<const Point> path) {
    double len = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) len += distance(path[i - 1], path[i]);
    return len;
}

struct Provenance {
    Author author = Author::None;
    std::uint64_t stroke_id = 0;

    bool operator==(const Provenance&) const = default;
};

/// RGB raster plus last-writer provenance for every pixel.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, Rgb fill = kWhite)
        : width_(width), height_(height),
          rgb_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3),
          provenance_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        for (std::size_t i = 0; i < provenance_.size(); ++i) set_rgb(i, fill);
    }
    explicit Raster(const CanvasSpec& spec) : Raster(spec.pixel_width(), spec.pixel_height()) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return provenance_.size(); }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    Rgb at(int x, int y) const { return rgb_at(index(x, y)); }
    Rgb rgb_at(std::size_t i) const { return Rgb{rgb_[3 * i], rgb_[3 * i + 1], rgb_[3 * i + 2]}; }
    const Provenance& provenance(int x, int y) const { return provenance_[index(x, y)]; }
    const Provenance& provenance_at(std::size_t i) const { return provenance_[i]; }

    void set_rgb(std::size_t i, Rgb c) {
        rgb_[3 * i] = c.r;
        rgb_[3 * i + 1] = c.g;
        rgb_[3 * i + 2] = c.b;
    }
    void write(std::size_t i, Rgb c, Provenance p) {
        set_rgb(i, c);
        provenance_[i] = p;
    }

    std::span<const std::uint8_t> bytes() const { return rgb_; }

    bool same_pixels(const Raster& other) const {
        return width_ == other.width_ && height_ == other.height_ && rgb_ == other.rgb_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> rgb_;
    std::vector<Provenance> provenance_;
};

struct PixelCell {
    int x = 0;
    int y = 0;

    bool operator==(const PixelCell&) const = default;
};

/// Every grid cell the segment passes through, in continuous pixel coordinates.
/// Passing exactly through a lattice corner visits both cells that share it.
inline std::vector<PixelCell> supercover_cells(double x0, double y0, double x1, double y1, int width, int height) {
    const auto cell = [](double v, int limit) {
        return std::clamp(static_cast<int>(std::floor(v)), 0, limit - 1);
    };
    int ix = cell(x0, width);
    int iy = cell(y0, height);
    const int ex = cell(x1, width);
    const int ey = cell(y1, height);

    std::vector<PixelCell> out;
    out.push_back({ix, iy});

    const double dx = x1 - x0;
    const double dy = y1 - y0;
    const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double delta_x = step_x != 0 ? 1.0 / std::abs(dx) : inf;
    const double delta_y = step_y != 0 ? 1.0 / std::abs(dy) : inf;
    double t_max_x = inf;
    double t_max_y = inf;
    if (step_x > 0) t_max_x = (std::floor(x0) + 1.0 - x0) * delta_x;
    if (step_x < 0) t_max_x = (x0 - std::floor(x0)) * delta_x;
    if (step_y > 0) t_max_y = (std::floor(y0) + 1.0 - y0) * delta_y;
    if (step_y < 0) t_max_y = (y0 - std::floor(y0)) * delta_y;

    int remaining = std::abs(ex - ix) + std::abs(ey - iy);
    while (remaining > 0) {
        if (t_max_x < t_max_y) {
            ix += step_x;
            t_max_x += delta_x;
            --remaining;
        } else if (t_max_y < t_max_x) {
            iy += step_y;
            t_max_y += delta_y;
            --remaining;
        } else {
            if (remaining < 2) {
                // Clamped end cell: only one axis still has a step left.
                if (ix != ex) ix += step_x; else iy += step_y;
                remaining = 0;
                out.push_back({std::clamp(ix, 0, width - 1), std::clamp(iy, 0, height - 1)});
                break;
            }
            out.push_back({std::clamp(ix + step_x, 0, width - 1), std::clamp(iy, 0, height - 1)});
            out.push_back({std::clamp(ix, 0, width - 1), std::clamp(iy + step_y, 0, height - 1)});
            ix += step_x;
            iy += step_y;
            t_max_x += delta_x;
            t_max_y += delta_y;
            remaining -= 2;
        }
        out.push_back({std::clamp(ix, 0, width - 1), std::clamp(iy, 0, height - 1)});
    }
    return out;
}

inline int stamp_radius_px(double width_mm, const CanvasSpec& spec) {
    return static_cast<int>(std::ceil(width_mm * spec.px_per_mm / 2.0));
}

inline std::vector<PixelCell> disc_offsets(int radius) {
    std::vector<PixelCell> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
        }
    }
    return out;
}

/// Calls `visit(pixel_index)` for every pixel a brush of `width_mm` covers when
/// traced along `path`. Pixels may be visited more than once.
template <typename Visit>
void for_each_stamped_pixel(std::span<const Point> path, double width_mm, const CanvasSpec& spec, int width,
                            int height, Visit&& visit) {
    const auto disc = disc_offsets(stamp_radius_px(width_mm, spec));
    const auto stamp = [&](PixelCell c) {
        for (const auto& o : disc) {
            const int x = c.x + o.x;
            const int y = c.y + o.y;
            if (x < 0 || y < 0 || x >= width || y >= height) continue;
            visit(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
        }
    };
    const double s = spec.px_per_mm;
    for (std::size_t i = 1; i < path.size(); ++i) {
        for (const auto& c : supercover_cells(path[i - 1].x * s, path[i - 1].y * s, path[i].x * s, path[i].y * s,
                                              width, height)) {
            stamp(c);
        }
    }
}

/// Quadrant of a pixel, judged at its center.
inline Quadrant pixel_quadrant(std::size_t index, int width, const CanvasSpec& spec) {
    const auto x = static_cast<double>(index % static_cast<std::size_t>(width));
    const auto y = static_cast<double>(index / static_cast<std::size_t>(width));
    const Point center{(x + 0.5) / spec.px_per_mm, (y + 0.5) / spec.px_per_mm};
    return Quadrant{center.x < spec.width_mm / 2.0 ? 0 : 1, center.y < spec.height_mm / 2.0 ? 0 : 1};
}

/// Quadrants that a brush traced along `path` would touch.
inline QuadrantSet footprint_quadrants(std::span<const Point> path, double width_mm, const CanvasSpec& spec) {
    QuadrantSet touched;
    const int w = spec.pixel_width();
    for_each_stamped_pixel(path, width_mm, spec, w, spec.pixel_height(),
                           [&](std::size_t i) { touched.insert(pixel_quadrant(i, w, spec)); });
    return touched;
}

/// Traces `path` onto the raster in `stroke`'s color, recording provenance.
/// `on_write` sees every pixel write (duplicates included).
template <typename OnWrite>
void rasterize_path(Raster& raster, const Stroke& stroke, std::span<const Point> path, const CanvasSpec& spec,
                    OnWrite&& on_write) {
    const Provenance prov{stroke.author, stroke.id};
    for_each_stamped_pixel(path, stroke.width_mm, spec, raster.width(), raster.height(), [&](std::size_t i) {
        raster.write(i, stroke.color, prov);
        on_write(i);
    });
}

inline void rasterize_stroke(Raster& raster, const Stroke& stroke, const CanvasSpec& spec) {
    validate_stroke(stroke, spec);
    rasterize_path(raster, stroke, stroke.path, spec, [](std::size_t) {});
}

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h = kFnvOffset) {
    for (auto b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// FNV-1a 64 over the RGB bytes, row-major, as 16 lowercase hex digits.
inline std::string canvas_digest(const Raster& raster) { return hex64(fnv1a64(raster.bytes())); }

inline std::string export_ppm(const Raster& raster) {
    std::string out = "P6\n" + std::to_string(raster.width()) + " " + std::to_string(raster.height()) + "\n255\n";
    const auto bytes = raster.bytes();
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return out;
}

/// Reads back what export_ppm writes (P6, maxval 255, optional comments).
inline Raster parse_ppm(std::string_view data) {
    std::size_t pos = 0;
    const auto skip_space = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    const auto read_int = [&]() -> int {
        skip_space();
        int v = 0;
        const auto start = pos;
        while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
            v = v * 10 + (data[pos] - '0');
            ++pos;
        }
        if (pos == start) throw Error(ErrorCode::BadFormat, "PPM header: expected integer");
        return v;
    };

    if (data.substr(0, 2) != "P6") throw Error(ErrorCode::BadFormat, "not a P6 PPM");
    pos = 2;
    const int w = read_int();
    const int h = read_int();
    const int maxval = read_int();
    if (maxval != 255) throw Error(ErrorCode::BadFormat, "only maxval 255 is supported");
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
        throw Error(ErrorCode::BadFormat, "PPM header not terminated");
    }
    ++pos;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (data.size() - pos != n * 3) throw Error(ErrorCode::BadFormat, "PPM body size mismatch");

    Raster raster(w, h);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(data.data() + pos + 3 * i);
        raster.set_rgb(i, Rgb{p[0], p[1], p[2]});
    }
    return raster;
}

}  // namespace aura
