#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "aura/canvas.hpp"

using namespace aura;

namespace {

// Reference value: FNV-1a 64 over twelve 0xFF bytes, computed outside this code base.
constexpr const char* kBlank2x2Digest = "937830ad34fe6de9";

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax;
    const double dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

Stroke make_stroke(std::uint64_t id, Author author, Rgb color, double width, std::vector<Point> path) {
    return Stroke{id, author, color, width, std::move(path)};
}

std::size_t non_white(const Raster& r) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < r.pixel_count(); ++i) n += r.rgb_at(i) != kWhite;
    return n;
}

}  // namespace

TEST(QuadrantOf, Examples) {
    const CanvasSpec spec{200, 200, 1};
    EXPECT_EQ(quadrant_of({0, 0}, spec), (Quadrant{0, 0}));
    EXPECT_EQ(quadrant_of({100, 100}, spec), (Quadrant{1, 1}));
    EXPECT_EQ(quadrant_of({199, 10}, spec), (Quadrant{1, 0}));
    EXPECT_EQ(quadrant_of({200, 200}, spec), (Quadrant{1, 1}));
    EXPECT_THROW(quadrant_of({200.01, 5}, spec), Error);
    EXPECT_THROW(quadrant_of({-0.01, 5}, spec), Error);
}

TEST(QuadrantOf, AgreesWithBruteForceGrid) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dim(1.0, 1000.0);
    for (int c = 0; c < 5; ++c) {
        const CanvasSpec spec{dim(rng), dim(rng), 1.0};
        for (int i = 0; i <= 100; ++i) {
            for (int j = 0; j <= 100; ++j) {
                const Point p{spec.width_mm * i / 100.0, spec.height_mm * j / 100.0};
                const int col = 2 * p.x >= spec.width_mm ? 1 : 0;
                const int row = 2 * p.y >= spec.height_mm ? 1 : 0;
                EXPECT_EQ(quadrant_of(p, spec), (Quadrant{col, row}));
            }
        }
    }
}

TEST(Quadrant, DiagonalAndAdjacentRelations) {
    for (auto q : kAllQuadrants) {
        EXPECT_EQ(q.diagonal().diagonal(), q);
        EXPECT_NE(q.diagonal(), q);
        const auto adj = q.adjacent();
        for (auto a : adj) {
            EXPECT_NE(a, q);
            EXPECT_NE(a, q.diagonal());
            EXPECT_EQ(std::abs(a.col - q.col) + std::abs(a.row - q.row), 1);
        }
        EXPECT_NE(adj[0], adj[1]);
        std::set<int> all{q.index(), q.diagonal().index(), adj[0].index(), adj[1].index()};
        EXPECT_EQ(all.size(), 4u);
        EXPECT_EQ(Quadrant::from_index(q.index()), q);
    }
}

TEST(ZonePolicy, PerLevel) {
    const auto aroused = zone_policy(ArousalLevel::Aroused, {0, 0});
    EXPECT_TRUE(aroused.paint_allowed.empty());
    EXPECT_EQ(aroused.park, (Quadrant{1, 1}));
    const auto near = zone_policy(ArousalLevel::NearThreshold, {0, 0});
    EXPECT_EQ(near.paint_allowed, (QuadrantSet{{1, 0}, {0, 1}}));
    EXPECT_FALSE(near.park.has_value());
    for (auto q : kAllQuadrants) {
        const auto neutral = zone_policy(ArousalLevel::Neutral, q);
        EXPECT_EQ(neutral.paint_allowed, QuadrantSet::all());
        EXPECT_FALSE(neutral.park.has_value());
        EXPECT_EQ(zone_policy(ArousalLevel::Aroused, q).park, q.diagonal());
    }
}

TEST(ActiveWorkspace, Examples) {
    const CanvasSpec spec;
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({{20.0 + i, 150.0}, 1000});
    EXPECT_EQ(active_workspace(pts, 2000, 30, spec, {0, 0}), (Quadrant{0, 1}));
    EXPECT_EQ(active_workspace({}, 2000, 30, spec, {0, 0}), (Quadrant{0, 0}));

    std::vector<TimedPoint> tie;
    for (int i = 0; i < 5; ++i) tie.push_back({{10.0, 10.0}, 1000});
    for (int i = 0; i < 5; ++i) tie.push_back({{200.0, 200.0}, 2000});
    EXPECT_EQ(active_workspace(tie, 3000, 30, spec, {0, 0}), (Quadrant{1, 1}));
}

TEST(ActiveWorkspace, WindowExpiresOldPoints) {
    const CanvasSpec spec;
    std::vector<TimedPoint> pts{{{200, 200}, 0}, {{200, 200}, 1000}, {{10, 10}, 40000}};
    EXPECT_EQ(active_workspace(pts, 40000, 30, spec, {0, 1}), (Quadrant{0, 0}));
    EXPECT_EQ(active_workspace(pts, 100000, 30, spec, {0, 1}), (Quadrant{0, 1}));
}

TEST(Rasterize, HorizontalStrokeMatchesDistanceOracle) {
    const CanvasSpec spec{40, 20, 1};
    Raster r(spec);
    const auto s = make_stroke(1, Author::Artist, {0, 0, 0}, 1.0, {{5.5, 5.5}, {15.5, 5.5}});
    rasterize_stroke(r, s, spec);
    // Brush radius ceil(1 * 1 / 2) = 1 pixel around every traversed cell.
    std::size_t expected = 0;
    for (int y = 0; y < r.height(); ++y) {
        for (int x = 0; x < r.width(); ++x) {
            const bool inside = point_segment_distance(x, y, 5, 5, 15, 5) <= 1.0 + 1e-12;
            expected += inside;
            EXPECT_EQ(r.at(x, y) != kWhite, inside) << x << "," << y;
        }
    }
    EXPECT_EQ(expected, 35u);
    EXPECT_EQ(non_white(r), 35u);
}

TEST(Rasterize, DiagonalStrokeCoversItsLine) {
    const CanvasSpec spec{60, 60, 2};
    Raster r(spec);
    const Point a{3.3, 4.1};
    const Point b{51.7, 38.9};
    rasterize_stroke(r, make_stroke(1, Author::Robot, {10, 20, 30}, 2.0, {a, b}), spec);
    const int rad = stamp_radius_px(2.0, spec);
    EXPECT_EQ(rad, 2);
    for (int y = 0; y < r.height(); ++y) {
        for (int x = 0; x < r.width(); ++x) {
            const double d = point_segment_distance(x + 0.5, y + 0.5, a.x * 2, a.y * 2, b.x * 2, b.y * 2);
            if (d < 0.49) EXPECT_NE(r.at(x, y), kWhite) << x << "," << y;
            if (d > rad + 1.5) EXPECT_EQ(r.at(x, y), kWhite) << x << "," << y;
        }
    }
}

TEST(Rasterize, DegenerateSegmentStampsOneDisc) {
    const CanvasSpec spec{20, 20, 1};
    Raster r(spec);
    rasterize_stroke(r, make_stroke(1, Author::Artist, {0, 0, 0}, 3.0, {{10.5, 10.5}, {10.5, 10.5}}), spec);
    EXPECT_EQ(non_white(r), disc_offsets(2).size());
    EXPECT_EQ(disc_offsets(2).size(), 13u);
}

TEST(Rasterize, LastWriterWinsWithProvenance) {
    const CanvasSpec spec{20, 20, 1};
    Raster r(spec);
    rasterize_stroke(r, make_stroke(1, Author::Artist, {255, 0, 0}, 1.0, {{2, 10}, {18, 10}}), spec);
    rasterize_stroke(r, make_stroke(2, Author::Robot, {0, 0, 255}, 1.0, {{10, 2}, {10, 18}}), spec);
    EXPECT_EQ(r.at(10, 10), (Rgb{0, 0, 255}));
    EXPECT_EQ(r.provenance(10, 10), (Provenance{Author::Robot, 2}));
    EXPECT_EQ(r.at(3, 10), (Rgb{255, 0, 0}));
    EXPECT_EQ(r.provenance(3, 10), (Provenance{Author::Artist, 1}));
    EXPECT_EQ(r.provenance(0, 0).author, Author::None);
}

TEST(Rasterize, RejectsInvalidStrokes) {
    const CanvasSpec spec{20, 20, 1};
    Raster r(spec);
    EXPECT_THROW(rasterize_stroke(r, make_stroke(1, Author::Artist, {}, 1.0, {{1, 1}}), spec), Error);
    EXPECT_THROW(rasterize_stroke(r, make_stroke(1, Author::Artist, {}, 1.0, {{1, 1}, {21, 1}}), spec), Error);
    EXPECT_THROW(rasterize_stroke(r, make_stroke(1, Author::Artist, {}, 0.0, {{1, 1}, {2, 1}}), spec), Error);
}

TEST(Rasterize, NonOverlappingStrokesCommute) {
    const CanvasSpec spec{100, 100, 2};
    std::vector<Stroke> strokes;
    for (int i = 0; i < 6; ++i) {
        const double y = 8.0 + 15.0 * i;
        strokes.push_back(make_stroke(i + 1, Author::Robot, {static_cast<std::uint8_t>(40 * i), 0, 0}, 2.0,
                                      {{10, y}, {50, y + 3}, {90, y}}));
    }
    std::vector<int> order{0, 1, 2, 3, 4, 5};
    Raster ref(spec);
    for (int i : order) rasterize_stroke(ref, strokes[i], spec);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(order.begin(), order.end(), rng);
        Raster r(spec);
        for (int i : order) rasterize_stroke(r, strokes[i], spec);
        EXPECT_EQ(canvas_digest(r), canvas_digest(ref));
    }
}

TEST(SupercoverCells, CornerCrossingVisitsBothNeighbours) {
    const auto cells = supercover_cells(0.5, 0.5, 2.5, 2.5, 10, 10);
    const std::set<std::pair<int, int>> got = [&] {
        std::set<std::pair<int, int>> s;
        for (auto c : cells) s.insert({c.x, c.y});
        return s;
    }();
    for (auto c : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}, {2, 2}}) EXPECT_TRUE(got.count(c));
    EXPECT_EQ(got.size(), 7u);
}

TEST(SupercoverCells, EveryCellTheSegmentEntersIsVisited) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int trial = 0; trial < 300; ++trial) {
        const double x0 = u(rng), y0 = u(rng), x1 = u(rng), y1 = u(rng);
        std::set<std::pair<int, int>> got;
        for (auto c : supercover_cells(x0, y0, x1, y1, 31, 31)) got.insert({c.x, c.y});
        // Dense sampling along the segment finds only cells it passes through.
        for (int k = 0; k <= 4000; ++k) {
            const double t = k / 4000.0;
            const int cx = static_cast<int>(std::floor(x0 + (x1 - x0) * t));
            const int cy = static_cast<int>(std::floor(y0 + (y1 - y0) * t));
            EXPECT_TRUE(got.count({cx, cy})) << trial;
        }
    }
}

TEST(CanvasDigest, BlankTwoByTwoWhite) {
    const Raster r(2, 2);
    EXPECT_EQ(canvas_digest(r), kBlank2x2Digest);
}

TEST(CanvasDigest, DeterministicAndSensitiveToEveryPixel) {
    const CanvasSpec spec{30, 20, 1};
    Raster a(spec), b(spec);
    const auto s = make_stroke(1, Author::Artist, {1, 2, 3}, 2.0, {{2, 2}, {28, 18}, {5, 15}});
    rasterize_stroke(a, s, spec);
    rasterize_stroke(b, s, spec);
    EXPECT_EQ(canvas_digest(a), canvas_digest(b));
    const auto base = canvas_digest(a);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> pix(0, a.pixel_count() - 1);
    std::uniform_int_distribution<int> chan(0, 2), delta(1, 255);
    for (int trial = 0; trial < 500; ++trial) {
        Raster c = a;
        const auto i = pix(rng);
        Rgb v = c.rgb_at(i);
        std::uint8_t* ch[3] = {&v.r, &v.g, &v.b};
        auto& byte = *ch[chan(rng)];
        byte = static_cast<std::uint8_t>(byte + delta(rng));
        c.set_rgb(i, v);
        EXPECT_NE(canvas_digest(c), base);
    }
}

TEST(ExportPpm, Format) {
    const Raster white(2, 2);
    const auto ppm = export_ppm(white);
    EXPECT_EQ(ppm.substr(0, 11), "P6\n2 2\n255\n");
    EXPECT_EQ(ppm.size(), 11u + 12u);
    EXPECT_TRUE(std::all_of(ppm.begin() + 11, ppm.end(), [](char c) { return static_cast<unsigned char>(c) == 0xFF; }));

    const Raster black(1, 1, Rgb{0, 0, 0});
    const auto b = export_ppm(black);
    EXPECT_EQ(b, std::string("P6\n1 1\n255\n") + std::string(3, '\0'));
}

TEST(ExportPpm, RoundTrip) {
    const CanvasSpec spec{40, 30, 2};
    Raster r(spec);
    rasterize_stroke(r, make_stroke(1, Author::Artist, {9, 99, 199}, 3.0, {{1, 1}, {39, 29}}), spec);
    const auto back = parse_ppm(export_ppm(r));
    EXPECT_TRUE(back.same_pixels(r));
    EXPECT_THROW(parse_ppm("P3\n1 1\n255\n"), Error);
    EXPECT_THROW(parse_ppm("P6\n2 2\n255\nabc"), Error);
}

TEST(CanvasSpec, Validation) {
    EXPECT_NO_THROW(validate_canvas_spec(CanvasSpec{}));
    EXPECT_EQ(CanvasSpec{}.pixel_width(), 560);
    EXPECT_EQ(CanvasSpec{}.pixel_height(), 432);
    EXPECT_THROW(validate_canvas_spec(CanvasSpec{1, 1, 1}), Error);
    EXPECT_THROW(validate_canvas_spec(CanvasSpec{-5, 10, 1}), Error);
}

TEST(PixelQuadrant, JudgedAtPixelCenter) {
    const CanvasSpec spec{10, 10, 1};
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) {
            const auto q = pixel_quadrant(static_cast<std::size_t>(y * 10 + x), 10, spec);
            EXPECT_EQ(q, quadrant_of({x + 0.5, y + 0.5}, spec));
        }
    }
}
