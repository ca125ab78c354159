#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "pnkit/segmentation.hpp"
#include "pnkit/synthesis.hpp"

using namespace pnkit;
using pnkit::testing::ubx_means;

namespace {

PsdTrace grid_trace(double f_lo, double f_hi, std::size_t n) {
    PsdTrace t;
    t.f0_hz = 2e9;
    const double l0 = std::log10(f_lo), l1 = std::log10(f_hi);
    for (std::size_t i = 0; i < n; ++i) {
        const double lf = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(n - 1);
        t.offsets_hz.push_back(std::pow(10.0, lf));
        t.levels_dbchz.push_back(-100.0);
    }
    return t;
}

std::vector<SectionLabel> labels_of(const PsdTrace& trace, const ClassifyConfig& cfg = {}) {
    auto segments = split_half_decades(trace);
    fit_all_segments(trace, segments);
    return classify_sections(segments, cfg).labels;
}

} // namespace

TEST_CASE("half-decade tiling of the full sweep") {
    const PsdTrace t = grid_trace(100.0, 1e7, 251);
    const auto segments = split_half_decades(t);
    REQUIRE(segments.size() == 10);
    for (std::size_t j = 0; j < 10; ++j) {
        CHECK(segments[j].f_lo_hz ==
              doctest::Approx(100.0 * std::pow(10.0, 0.5 * j)).epsilon(1e-12));
        CHECK_FALSE(segments[j].truncated);
    }
    CHECK(segments.back().f_hi_hz == doctest::Approx(1e7).epsilon(1e-12));

    // tiling: every point in exactly one segment, order preserved
    std::size_t total = 0;
    std::size_t expected_next = 0;
    for (const auto& seg : segments) {
        for (const std::size_t i : seg.point_indices) {
            CHECK(i == expected_next);
            ++expected_next;
        }
        total += seg.point_indices.size();
    }
    CHECK(total == t.offsets_hz.size());
}

TEST_CASE("tiling holds for random spans and point sets") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> log_lo(0.5, 3.0);
    std::uniform_real_distribution<double> span(0.6, 5.5);
    for (int trial = 0; trial < 20; ++trial) {
        const double f_lo = std::pow(10.0, log_lo(rng));
        const double f_hi = f_lo * std::pow(10.0, span(rng));
        std::vector<double> offsets;
        std::uniform_real_distribution<double> lf(std::log10(f_lo), std::log10(f_hi));
        for (int i = 0; i < 40; ++i)
            offsets.push_back(std::pow(10.0, lf(rng)));
        std::sort(offsets.begin(), offsets.end());
        offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

        PsdTrace t;
        t.f0_hz = 2e9;
        t.offsets_hz = offsets;
        t.levels_dbchz.assign(offsets.size(), -100.0);
        const auto segments = split_half_decades(t);

        std::size_t total = 0;
        for (std::size_t j = 0; j < segments.size(); ++j) {
            total += segments[j].point_indices.size();
            const double ratio = segments[j].f_hi_hz / segments[j].f_lo_hz;
            if (j + 1 < segments.size())
                CHECK(std::abs(ratio / std::pow(10.0, 0.5) - 1.0) < 1e-9);
            else
                CHECK(ratio <= std::pow(10.0, 0.5) * (1.0 + 1e-9));
            for (const std::size_t i : segments[j].point_indices) {
                CHECK(t.offsets_hz[i] >= segments[j].f_lo_hz * (1.0 - 1e-12));
                if (j + 1 < segments.size())
                    CHECK(t.offsets_hz[i] < segments[j].f_hi_hz * (1.0 + 1e-12));
            }
        }
        CHECK(total == t.offsets_hz.size()); // every point in exactly one segment
    }
}

TEST_CASE("single half-decade span gives one segment") {
    PsdTrace t;
    t.f0_hz = 2e9;
    for (int i = 0; i < 9; ++i) {
        t.offsets_hz.push_back(100.0 + 25.0 * i);
        t.levels_dbchz.push_back(-90.0);
    }
    CHECK(split_half_decades(t).size() == 1);
}

TEST_CASE("point on an interior boundary joins the upper segment") {
    PsdTrace t;
    t.f0_hz = 2e9;
    const double boundary = 100.0 * std::pow(10.0, 0.5);
    t.offsets_hz = {100.0, 150.0, 200.0, boundary, 400.0, 500.0, 700.0, 1000.0};
    t.levels_dbchz.assign(8, -90.0);
    const auto segments = split_half_decades(t);
    REQUIRE(segments.size() == 2);
    CHECK(segments[0].point_indices == std::vector<std::size_t>{0, 1, 2});
    CHECK(segments[1].point_indices == std::vector<std::size_t>{3, 4, 5, 6, 7});
}

TEST_CASE("short last segment is flagged") {
    const PsdTrace t = grid_trace(100.0, 5000.0, 40);
    const auto segments = split_half_decades(t);
    REQUIRE(segments.size() == 4);
    CHECK(segments.back().truncated);
    CHECK(segments.back().f_hi_hz == doctest::Approx(5000.0));
}

TEST_CASE("segment regression recovers exact lines") {
    PsdTrace t = grid_trace(100.0, 100.0 * std::pow(10.0, 0.5), 24);
    auto segments = split_half_decades(t);
    REQUIRE(segments.size() == 1);

    SUBCASE("-30 dB/decade line with intercept 5") {
        for (std::size_t i = 0; i < t.offsets_hz.size(); ++i)
            t.levels_dbchz[i] = 5.0 - 30.0 * std::log10(t.offsets_hz[i]);
        const SlopeFit fit = fit_segment_slope(t, segments[0]);
        CHECK(std::abs(fit.slope_db_per_decade + 30.0) < 1e-9);
        CHECK(std::abs(fit.intercept_db - 5.0) < 1e-9);
    }
    SUBCASE("flat levels") {
        const SlopeFit fit = fit_segment_slope(t, segments[0]);
        CHECK(std::abs(fit.slope_db_per_decade) < 1e-9);
    }
    SUBCASE("noisy line matches the centered-form oracle") {
        std::mt19937_64 rng(99);
        std::normal_distribution<double> noise(0.0, 0.5);
        Segment five = segments[0];
        five.point_indices = {0, 5, 10, 15, 20};
        for (const std::size_t i : five.point_indices)
            t.levels_dbchz[i] = -12.0 - 30.0 * std::log10(t.offsets_hz[i]) + noise(rng);

        double mx = 0.0, my = 0.0;
        for (const std::size_t i : five.point_indices) {
            mx += std::log10(t.offsets_hz[i]) / 5.0;
            my += t.levels_dbchz[i] / 5.0;
        }
        double sxy = 0.0, sxx = 0.0;
        for (const std::size_t i : five.point_indices) {
            const double dx = std::log10(t.offsets_hz[i]) - mx;
            sxy += dx * (t.levels_dbchz[i] - my);
            sxx += dx * dx;
        }
        const SlopeFit fit = fit_segment_slope(t, five);
        CHECK(std::abs(fit.slope_db_per_decade - sxy / sxx) < 1e-9);
        CHECK(std::abs(fit.intercept_db - (my - (sxy / sxx) * mx)) < 1e-9);
    }
    SUBCASE("fewer than two points is an error") {
        Segment one = segments[0];
        one.point_indices = {0};
        CHECK_THROWS_AS(fit_segment_slope(t, one), std::invalid_argument);
    }
}

TEST_CASE("residual orthogonality of the normal equations") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.5);
    PsdTrace t = grid_trace(100.0, 1e7, 173);
    for (std::size_t i = 0; i < t.offsets_hz.size(); ++i)
        t.levels_dbchz[i] = -80.0 - 11.0 * std::log10(t.offsets_hz[i]) + noise(rng);
    auto segments = split_half_decades(t);
    fit_all_segments(t, segments);
    for (const auto& seg : segments) {
        if (!seg.slope_db_per_decade)
            continue;
        double r0 = 0.0, r1 = 0.0; // X^T (y - X r)
        for (const std::size_t i : seg.point_indices) {
            const double x = std::log10(t.offsets_hz[i]);
            const double resid =
                t.levels_dbchz[i] - (*seg.intercept_db + *seg.slope_db_per_decade * x);
            r0 += resid;
            r1 += resid * x;
        }
        CHECK(std::abs(r0) < 1e-6);
        CHECK(std::abs(r1) < 1e-6);
    }
}

TEST_CASE("section classification of the UBX-shaped curve") {
    const PsdTrace t = synth_psd(ubx_means(), {100.0, 1e7, 50, 0.0, 0, "ubx"});
    auto segments = split_half_decades(t);
    fit_all_segments(t, segments);
    const SectionMap map = classify_sections(segments);

    using SL = SectionLabel;
    const std::vector<SL> expected = {
        SL::reference_dominant, SL::reference_dominant, SL::transition,
        SL::in_band_floor,      SL::in_band_floor,      SL::in_band_floor,
        SL::transition,         SL::vco_dominant,       SL::transition,
        SL::noise_floor};
    REQUIRE(map.labels.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(map.labels[i] == expected[i]);

    REQUIRE(map.ranges.count(SL::reference_dominant));
    CHECK(map.ranges.at(SL::reference_dominant).f_hi_hz <= 3e3 * 1.001);
    REQUIRE(map.ranges.count(SL::in_band_floor));
    CHECK(map.ranges.at(SL::in_band_floor).f_lo_hz >= 3e3 * 0.999);
    CHECK(map.ranges.at(SL::in_band_floor).f_hi_hz <= 100e3 * 1.001);
    REQUIRE(map.ranges.count(SL::vco_dominant));
    CHECK(map.ranges.at(SL::vco_dominant).f_lo_hz >= 300e3 * 0.999);
    CHECK(map.ranges.at(SL::vco_dominant).f_hi_hz <= 1e6 * 1.001);
    REQUIRE(map.ranges.count(SL::noise_floor));
    CHECK(map.ranges.at(SL::noise_floor).f_lo_hz >= 1e6 * 0.999);
    CHECK(map.warnings.empty());
}

TEST_CASE("degenerate traces cannot form the four-section pattern") {
    PsdTrace t = grid_trace(100.0, 1e7, 120);
    SUBCASE("pure -30 dB/decade line") {
        for (std::size_t i = 0; i < t.offsets_hz.size(); ++i)
            t.levels_dbchz[i] = 30.0 - 30.0 * std::log10(t.offsets_hz[i]);
        auto segments = split_half_decades(t);
        fit_all_segments(t, segments);
        try {
            classify_sections(segments);
            FAIL("expected PatternError");
        } catch (const PatternError& e) {
            CHECK(e.run_sequence == "steep");
        }
    }
    SUBCASE("flat everywhere") {
        auto segments = split_half_decades(t);
        fit_all_segments(t, segments);
        try {
            classify_sections(segments);
            FAIL("expected PatternError");
        } catch (const PatternError& e) {
            CHECK(e.run_sequence == "flat");
        }
    }
}

TEST_CASE("classification invariances") {
    const PsdTrace base = synth_psd(ubx_means(), {100.0, 1e7, 50, 0.0, 0, ""});
    const auto base_labels = labels_of(base);

    SUBCASE("level shift leaves labels unchanged") {
        PsdTrace shifted = base;
        for (double& l : shifted.levels_dbchz)
            l += 25.0;
        CHECK(labels_of(shifted) == base_labels);
    }
    SUBCASE("frequency rescaling leaves labels unchanged") {
        PsdTrace scaled = base;
        for (double& f : scaled.offsets_hz)
            f *= 7.3;
        CHECK(labels_of(scaled) == base_labels);
    }
}

TEST_CASE("fewer than four fitted segments is rejected") {
    const PsdTrace t = grid_trace(100.0, 1e3, 40); // one decade = 2 segments
    auto segments = split_half_decades(t);
    fit_all_segments(t, segments);
    CHECK_THROWS_AS(classify_sections(segments), std::invalid_argument);
}

TEST_CASE("segment map JSON shape") {
    const PsdTrace t = synth_psd(ubx_means(), {100.0, 1e7, 50, 0.0, 0, ""});
    auto segments = split_half_decades(t);
    fit_all_segments(t, segments);
    const SectionMap map = classify_sections(segments);
    const nlohmann::json j = segments_to_json(segments, map);
    REQUIRE(j.contains("segments"));
    REQUIRE(j.contains("sections"));
    CHECK(j["segments"].size() == segments.size());
    CHECK(j["segments"][0].contains("slope_db_per_decade"));
    CHECK(j["sections"].contains("ReferenceDominant"));
    CHECK(j["sections"]["NoiseFloor"].contains("f_lo_hz"));
}
