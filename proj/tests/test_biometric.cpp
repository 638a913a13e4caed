#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aura/biometric.hpp"

using namespace aura;

namespace {

std::vector<BiometricSample> constant_ppg(double bpm, double noise = 0.0, std::uint64_t seed = 1, double secs = 10.0) {
    return synth_ppg({{0.0, bpm}}, 25.0, noise, seed, secs);
}

// Maxima of 0.5(1 - cos 2*pi*f*t) sit at t = (k + 1/2)/f.
int analytic_peaks_inside(double bpm, double secs, double margin_s) {
    const double period = 60.0 / bpm;
    int n = 0;
    for (double t = 0.5 * period; t < secs; t += period) {
        if (t > margin_s && t < secs - margin_s) ++n;
    }
    return n;
}

int sampled_local_maxima(const std::vector<BiometricSample>& s) {
    int n = 0;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i].value > s[i - 1].value && s[i].value >= s[i + 1].value) ++n;
    }
    return n;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::BadFormat;
}

}  // namespace

TEST(ParseSensorLine, DecodesFields) {
    const auto s = parse_sensor_line("PG,1000,0.52");
    EXPECT_EQ(s.tag, SampleTag::PG);
    EXPECT_EQ(s.timestamp_ms, 1000u);
    EXPECT_DOUBLE_EQ(s.value, 0.52);
}

TEST(ParseSensorLine, TrimsWhitespace) {
    const auto s = parse_sensor_line("  HR , 5000 , 72.5 \r\n");
    EXPECT_EQ(s.tag, SampleTag::HR);
    EXPECT_EQ(s.timestamp_ms, 5000u);
    EXPECT_DOUBLE_EQ(s.value, 72.5);
}

TEST(ParseSensorLine, Errors) {
    EXPECT_EQ(code_of([] { parse_sensor_line("XX,1,2"); }), ErrorCode::UnknownTag);
    EXPECT_EQ(code_of([] { parse_sensor_line("pg,1,2"); }), ErrorCode::UnknownTag);
    EXPECT_EQ(code_of([] { parse_sensor_line("HR,5000,400"); }), ErrorCode::RangeError);
    EXPECT_EQ(code_of([] { parse_sensor_line("HR,5000,20"); }), ErrorCode::RangeError);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,1,nan"); }), ErrorCode::NonFinite);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,1,inf"); }), ErrorCode::NonFinite);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,1"); }), ErrorCode::MalformedLine);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,1,2,3"); }), ErrorCode::MalformedLine);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,abc,2"); }), ErrorCode::MalformedLine);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,-5,2"); }), ErrorCode::MalformedLine);
    EXPECT_EQ(code_of([] { parse_sensor_line("PG,1,2x"); }), ErrorCode::MalformedLine);
    EXPECT_EQ(code_of([] { parse_sensor_line(""); }), ErrorCode::MalformedLine);
}

TEST(ParseSensorLine, RoundTripsFormattedSamples) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pg(-1e6, 1e6);
    std::uniform_real_distribution<double> hr(20.0001, 249.999);
    std::uniform_int_distribution<std::uint64_t> ts(0, 1ULL << 50);
    for (int i = 0; i < 2000; ++i) {
        const bool is_hr = i % 3 == 0;
        const BiometricSample s{is_hr ? SampleTag::HR : SampleTag::PG, ts(rng), is_hr ? hr(rng) : pg(rng)};
        EXPECT_EQ(parse_sensor_line(format_sensor_line(s)), s);
    }
}

TEST(ParseDatagram, KeepsGoodLinesAndReportsBadOnes) {
    const auto r = parse_datagram("PG,1,0.1\nbogus\n\nHR,2,70\nPG,3,nan\n");
    ASSERT_EQ(r.samples.size(), 2u);
    EXPECT_EQ(r.samples[1].tag, SampleTag::HR);
    EXPECT_EQ(r.errors.size(), 2u);
}

TEST(StreamGate, DropsLateAndDuplicatePerTag) {
    StreamGate g;
    EXPECT_TRUE(g.admit({SampleTag::PG, 10, 0}));
    EXPECT_TRUE(g.admit({SampleTag::HR, 5, 70}));
    EXPECT_FALSE(g.admit({SampleTag::PG, 10, 0}));
    EXPECT_FALSE(g.admit({SampleTag::PG, 9, 0}));
    EXPECT_TRUE(g.admit({SampleTag::PG, 11, 0}));
    EXPECT_EQ(g.dropped(), 2u);
}

TEST(SynthPpg, SeventyTwoBpmHasTwelveMaxima) {
    const auto s = constant_ppg(72.0);
    ASSERT_EQ(s.size(), 250u);
    EXPECT_EQ(sampled_local_maxima(s), 12);
    EXPECT_EQ(s.front().timestamp_ms, 0u);
    EXPECT_EQ(s[1].timestamp_ms, 40u);
    EXPECT_EQ(s.back().timestamp_ms, 9960u);
}

TEST(SynthPpg, DegenerateAndDeterministic) {
    EXPECT_TRUE(synth_ppg({{0.0, 72.0}}, 25.0, 0.0, 1, 0.0).empty());
    const auto a = synth_ppg({{0.0, 72.0}, {4.0, 90.0}}, 25.0, 0.3, 42, 10.0);
    const auto b = synth_ppg({{0.0, 72.0}, {4.0, 90.0}}, 25.0, 0.3, 42, 10.0);
    EXPECT_EQ(a, b);
    const auto c = synth_ppg({{0.0, 72.0}, {4.0, 90.0}}, 25.0, 0.3, 43, 10.0);
    EXPECT_NE(a, c);
}

TEST(SynthPpg, RejectsBadProfiles) {
    EXPECT_EQ(code_of([] { synth_ppg({}, 25.0, 0.0, 1, 1.0); }), ErrorCode::BadProfile);
    EXPECT_EQ(code_of([] { synth_ppg({{0.0, 300.0}}, 25.0, 0.0, 1, 1.0); }), ErrorCode::BadProfile);
    EXPECT_EQ(code_of([] { synth_ppg({{0.0, 70.0}}, 5.0, 0.0, 1, 1.0); }), ErrorCode::BadSampleRate);
}

TEST(SynthPpg, UnitAmplitudeWithoutNoise) {
    for (const auto& s : constant_ppg(60.0)) {
        EXPECT_GE(s.value, 0.0);
        EXPECT_LE(s.value, 1.0);
    }
}

TEST(EstimateHeartRate, NoiselessSeventyTwo) {
    const auto s = constant_ppg(72.0);
    const auto e = estimate_heart_rate(s, 25.0);
    EXPECT_GE(e.bpm, 71.0);
    EXPECT_LE(e.bpm, 73.0);
    EXPECT_EQ(e.n_peaks, analytic_peaks_inside(72.0, 10.0, 0.04));
    EXPECT_GT(e.confidence, 0.9);
    EXPECT_EQ(e.timestamp_ms, s.back().timestamp_ms);
}

TEST(EstimateHeartRate, NoiselessOneTwenty) {
    const auto e = estimate_heart_rate(constant_ppg(120.0), 25.0);
    EXPECT_GE(e.bpm, 118.0);
    EXPECT_LE(e.bpm, 122.0);
    EXPECT_EQ(e.n_peaks, analytic_peaks_inside(120.0, 10.0, 0.04));
}

TEST(EstimateHeartRate, FlatLineIsInsufficient) {
    std::vector<BiometricSample> flat;
    for (int i = 0; i < 250; ++i) flat.push_back({SampleTag::PG, static_cast<std::uint64_t>(i * 40), 0.0});
    EXPECT_EQ(code_of([&] { estimate_heart_rate(flat, 25.0); }), ErrorCode::InsufficientData);
}

TEST(EstimateHeartRate, PreconditionErrors) {
    const auto s = constant_ppg(72.0);
    EXPECT_EQ(code_of([&] { estimate_heart_rate(s, 5.0); }), ErrorCode::BadSampleRate);
    const std::vector<BiometricSample> short_window(s.begin(), s.begin() + 200);
    EXPECT_EQ(code_of([&] { estimate_heart_rate(short_window, 25.0); }), ErrorCode::WindowTooShort);
    EXPECT_EQ(code_of([&] { estimate_heart_rate(std::vector<BiometricSample>{}, 25.0); }), ErrorCode::WindowTooShort);
}

TEST(EstimateHeartRate, WithinTwoBpmAcrossRange) {
    for (int bpm = 50; bpm <= 150; ++bpm) {
        const auto e = estimate_heart_rate(constant_ppg(bpm), 25.0);
        EXPECT_LE(std::abs(e.bpm - bpm), 2.0) << bpm;
        EXPECT_GT(e.confidence, 0.0);
    }
}

TEST(EstimateHeartRate, InvariantToAmplitudeScaling) {
    for (double bpm : {55.0, 72.0, 101.0, 140.0}) {
        const auto s = constant_ppg(bpm, 0.1, 9);
        const auto base = estimate_heart_rate(s, 25.0);
        for (double c : {0.001, 0.37, 2.0, 1000.0}) {
            auto scaled = s;
            for (auto& x : scaled) x.value *= c;
            const auto e = estimate_heart_rate(scaled, 25.0);
            EXPECT_EQ(e.n_peaks, base.n_peaks);
            EXPECT_NEAR(e.bpm, base.bpm, 1e-9);
            EXPECT_NEAR(e.confidence, base.confidence, 1e-9);
        }
    }
}

TEST(EstimateHeartRate, ReorderedArrivalGivesSameEstimate) {
    const auto s = constant_ppg(80.0, 0.05, 3);
    std::vector<BiometricSample> shuffled = s;
    std::mt19937_64 rng(11);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::sort(shuffled.begin(), shuffled.end(),
              [](const BiometricSample& a, const BiometricSample& b) { return a.timestamp_ms < b.timestamp_ms; });
    EXPECT_EQ(estimate_heart_rate(shuffled, 25.0), estimate_heart_rate(s, 25.0));
}

TEST(EstimateHeartRate, RefractoryCapsDetectionRate) {
    // 200 bpm pulses are closer than the 0.33 s refractory interval, so
    // every other one is suppressed.
    const auto e = estimate_heart_rate(constant_ppg(200.0), 25.0);
    EXPECT_LT(e.bpm, 200.0 * 0.75);
}

TEST(WrapDirectHr, ConfidenceAndRange) {
    const auto e = wrap_direct_hr({SampleTag::HR, 100, 72.0});
    EXPECT_DOUBLE_EQ(e.bpm, 72.0);
    EXPECT_DOUBLE_EQ(e.confidence, 0.9);
    EXPECT_EQ(code_of([] { wrap_direct_hr({SampleTag::HR, 1, 10.0}); }), ErrorCode::RangeError);
}

TEST(Percentile, LinearInterpolation) {
    EXPECT_DOUBLE_EQ(detail::percentile({1, 2, 3, 4, 5}, 90), 4.6);
    EXPECT_DOUBLE_EQ(detail::percentile({7}, 90), 7.0);
    EXPECT_DOUBLE_EQ(detail::percentile({0, 10}, 50), 5.0);
}
