#include <doctest.h>

#include <cmath>

#include "hsnct/errors.hpp"
#include "hsnct/preprocess.hpp"
#include "test_support.hpp"

using namespace hsnct;

namespace {

RawScan one_pixel_scan(std::vector<float> counts, std::vector<float> open) {
    const std::size_t bins = open.size();
    return RawScan(test::test_geometry(1, 1, 1), test::test_axis(bins), std::move(counts), std::move(open));
}

}  // namespace

TEST_CASE("tof_to_wavelength") {
    const ToFConverter c(10.0);
    CHECK(tof_to_wavelength(c, 0.0) == 0.0);
    CHECK(tof_to_wavelength(c, 10.0 * kNeutronMass / kPlanckConstant) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(tof_to_wavelength(c, -1e-6), ValidationError);

    // Direct evaluation with CODATA constants.
    const double h = 6.62607015e-34;
    const double m = 1.67492749804e-27;
    const double expected = (h / m) * (2.5e-3 / 10.0);
    CHECK(std::fabs(tof_to_wavelength(c, 2.5e-3) - expected) <= 1e-12 * expected);
    CHECK(expected == doctest::Approx(9.89e-11).epsilon(1e-3));
}

TEST_CASE("tof_to_wavelength is linear and increasing") {
    const ToFConverter c(16.0);
    const auto dts = test::random_doubles(50, 5, 0.0, 1e-2);
    for (double dt : dts) {
        for (double a : {0.0, 0.5, 2.0, 7.25}) {
            CHECK(tof_to_wavelength(c, a * dt) == doctest::Approx(a * tof_to_wavelength(c, dt)).epsilon(1e-13));
        }
        CHECK(tof_to_wavelength(c, dt + 1e-6) > tof_to_wavelength(c, dt));
    }
}

TEST_CASE("normalize examples") {
    SUBCASE("y equal to the open beam gives zero") {
        const auto p = normalize(one_pixel_scan({100, 7, 0}, {100, 7, 0}));
        for (float v : p.values()) {
            CHECK(v == 0.0f);
        }
    }
    SUBCASE("y = y^o / e gives one") {
        const float open = 1000.0f;
        const auto p = normalize(one_pixel_scan({open / static_cast<float>(std::exp(1.0)), open}, {open, open}));
        CHECK(p.values()[0] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(p.values()[1] == 0.0f);
    }
    SUBCASE("zero counts use the floor") {
        const auto p = normalize(one_pixel_scan({0.0f}, {100.0f}));
        CHECK(p.values()[0] == doctest::Approx(std::log(200.0)).epsilon(1e-6));
        CHECK(p.values()[0] == doctest::Approx(5.2983).epsilon(1e-4));
    }
    SUBCASE("negative attenuation is clamped unless disabled") {
        const auto scan = one_pixel_scan({200.0f}, {100.0f});
        CHECK(normalize(scan).values()[0] == 0.0f);
        NormalizationOptions raw;
        raw.clamp_negative = false;
        CHECK(normalize(scan, raw).values()[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-6));
    }
    SUBCASE("floor must be positive") {
        NormalizationOptions bad;
        bad.count_floor = 0.0;
        CHECK_THROWS_AS(normalize(one_pixel_scan({1.0f}, {1.0f}), bad), ValidationError);
    }
}

TEST_CASE("normalize layout follows the flattened N_p x N_k view") {
    const auto g = test::test_geometry(2, 1, 2);
    const auto a = test::test_axis(2);
    std::vector<float> open{100, 50, 80, 40};
    std::vector<float> counts(2 * 2 * 2);
    for (std::size_t v = 0; v < 2; ++v) {
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t k = 0; k < 2; ++k) {
                counts[(v * 2 + c) * 2 + k] = open[c * 2 + k] * static_cast<float>(std::exp(-0.1 * (v + 1) - 0.2 * k));
            }
        }
    }
    NormalizationOptions raw;
    raw.clamp_negative = false;
    const auto p = normalize(RawScan(g, a, counts, open), raw);
    for (std::size_t v = 0; v < 2; ++v) {
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t k = 0; k < 2; ++k) {
                CHECK(p.spectrum(v * 2 + c)[k] == doctest::Approx(0.1 * (v + 1) + 0.2 * k).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("normalize is non-increasing in y and always finite") {
    const auto open = test::random_floats(16, 3, 0.0f, 300.0f);
    auto y = test::random_floats(16, 4, 0.0f, 300.0f);
    NormalizationOptions raw;
    raw.clamp_negative = false;
    for (bool clamp : {true, false}) {
        NormalizationOptions opts;
        opts.clamp_negative = clamp;
        auto lo = normalize(one_pixel_scan(y, open), opts);
        auto y_up = y;
        for (auto& v : y_up) {
            v += 5.0f;
        }
        auto hi = normalize(one_pixel_scan(y_up, open), opts);
        for (std::size_t i = 0; i < y.size(); ++i) {
            CHECK(hi.values()[i] <= lo.values()[i]);
        }
    }
    const auto zeros = normalize(one_pixel_scan(std::vector<float>(16, 0.0f), std::vector<float>(16, 0.0f)), raw);
    for (float v : zeros.values()) {
        CHECK(std::isfinite(v));
        CHECK(v == 0.0f);
    }
}

TEST_CASE("spectral_rebin") {
    const auto g = test::test_geometry(1, 1, 1);
    const HyperspectralSinogram p(g, test::test_axis(4), {1, 3, 5, 7});

    SUBCASE("factor one is the identity") { CHECK(spectral_rebin(p, 1) == p); }
    SUBCASE("hand-computed means") {
        const auto r = spectral_rebin(p, 2);
        REQUIRE(r.num_bins() == 2);
        CHECK(r.values()[0] == 2.0f);
        CHECK(r.values()[1] == 6.0f);
        const auto edges = p.axis().tof_edges();
        CHECK(r.axis().tof_edges()[0] == edges[0]);
        CHECK(r.axis().tof_edges()[1] == edges[2]);
        CHECK(r.axis().tof_edges()[2] == edges[4]);
    }
    SUBCASE("constant spectrum stays constant") {
        const HyperspectralSinogram c(g, test::test_axis(8), std::vector<float>(8, 0.3f));
        const auto r = spectral_rebin(c, 4);
        REQUIRE(r.num_bins() == 2);
        for (float v : r.values()) {
            CHECK(v == doctest::Approx(0.3f));
        }
    }
    SUBCASE("non-divisible factor") {
        CHECK_THROWS_AS(spectral_rebin(p, 3), ValidationError);
        CHECK_THROWS_AS(spectral_rebin(p, 0), ValidationError);
    }
}
