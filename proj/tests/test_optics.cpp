#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "ronchi/errors.hpp"
#include "ronchi/grid_io.hpp"
#include "ronchi/optics.hpp"

using namespace ronchi;

TEST_SUITE("optics") {

TEST_CASE("zero state gives zero phase") {
    const RealGrid chi = aberration_phase({0.0, 0.0, 0.0}, 64, 2e-3, 0.5);
    for (double v : chi.values) CHECK(v == 0.0);
}

TEST_CASE("phase is odd in the coefficients") {
    Rng rng(11);
    std::uniform_real_distribution<double> uni(-200.0, 200.0);
    for (int trial = 0; trial < 5; ++trial) {
        AberrationState x{uni(rng), uni(rng), uni(rng)};
        const RealGrid a = aberration_phase(x, 64, 5e-5, 0.7);
        const RealGrid b = aberration_phase(-x, 64, 5e-5, 0.7);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values[i] == -b.values[i]);
    }
}

TEST_CASE("defocus phase matches the scalar formula") {
    const int side = 64;
    const double lambda = 2e-3;
    const RealGrid chi = aberration_phase({100.0, 0.0, 0.0}, side, lambda, 0.5);
    const double kn = side / 2.0;
    const double k = kn / 4.0;
    const double expected = std::numbers::pi * lambda * 100.0 * k * k;
    CHECK(chi(side / 2, side / 2 + static_cast<int>(k)) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("astigmatism terms follow the expansion") {
    const int side = 32;
    const double lambda = 1e-3;
    const RealGrid chi = aberration_phase({0.0, 10.0, 20.0}, side, lambda, 1.0);
    const int kx = 3, ky = -2;
    const double expected = std::numbers::pi * lambda * (10.0 * (kx * kx - ky * ky) + 2.0 * 20.0 * kx * ky);
    CHECK(chi(side / 2 + ky, side / 2 + kx) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("phase vanishes outside the aperture") {
    const RealGrid chi = aberration_phase({100.0, 50.0, -20.0}, 64, 5e-5, 0.25);
    CHECK(chi(0, 0) == 0.0);
    CHECK(chi(32, 32 + 9) == 0.0);
    CHECK(chi(32, 32 + 7) != 0.0);
}

TEST_CASE("wrong aberration order is rejected") {
    CHECK_THROWS_AS(aberration_phase({1.0, 2.0}, 64, 5e-5, 0.5), ConfigError);
}

TEST_CASE("config validation") {
    SimConfig c;
    CHECK_NOTHROW(c.validate());
    c.side = 48;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.side = 16;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SimConfig{};
    c.dose = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SimConfig{};
    c.aperture_semiangle = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(parse_sim_mode("analytic") == SimMode::analytic_even);
    CHECK_THROWS_AS(parse_sim_mode("bogus"), ConfigError);
}

TEST_CASE("expected image is deterministic and positive") {
    for (SimMode mode : {SimMode::wave, SimMode::analytic_even}) {
        SimConfig c;
        c.mode = mode;
        const RealGrid a = expected_image({80.0, -30.0, 12.0}, c);
        const RealGrid b = expected_image({80.0, -30.0, 12.0}, c);
        CHECK(a.values == b.values);
        for (double v : a.values) CHECK(v > 0.0);
    }
}

TEST_CASE("wave image sums to dose over the aperture") {
    SimConfig c;
    c.dose = 500.0;
    const RealGrid g = expected_image({60.0, 40.0, -25.0}, c);
    const auto mask = aperture_mask(c.side, c.aperture_semiangle);
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (mask.values[i]) {
            sum += g.values[i];
            ++count;
        }
    }
    CHECK(std::abs(sum - c.dose * count) / (c.dose * count) < 0.01);
}

TEST_CASE("wave mode is not even in the image domain") {
    SimConfig c;
    const RealGrid a = expected_image({150.0, 80.0, 0.0}, c);
    const RealGrid b = expected_image({-150.0, -80.0, 0.0}, c);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
        norm += a.values[i] * a.values[i];
    }
    CHECK(std::sqrt(diff / norm) > 0.01);
}

TEST_CASE("analytic spectrum is exactly even") {
    SimConfig c;
    c.mode = SimMode::analytic_even;
    const RealGrid a = analytic_power_spectrum({123.0, -45.0, 67.0}, c);
    const RealGrid b = analytic_power_spectrum({-123.0, 45.0, -67.0}, c);
    CHECK(a.values == b.values);
}

TEST_CASE("tiny rates give zero counts") {
    RealGrid g(32, 1e-12);
    const Ronchigram y = sample_ronchigram(g, 5);
    for (auto v : y.counts.values) CHECK(v == 0u);
}

TEST_CASE("Poisson moments") {
    RealGrid g(32, 100.0);
    // 1024 pixels x 10 seeds gives >= 1e4 draws at a single rate.
    std::vector<double> draws;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Ronchigram y = sample_ronchigram(g, derive_seed(77, s));
        for (auto v : y.counts.values) draws.push_back(v);
    }
    const auto m = oracle::moments(draws);
    const double tol = 5.0 * std::sqrt(100.0) / std::sqrt(static_cast<double>(draws.size()));
    CHECK(std::abs(m.mean - 100.0) < tol);
    const double ratio = m.variance / m.mean;
    CHECK(ratio > 0.9);
    CHECK(ratio < 1.1);
}

TEST_CASE("sampling is reproducible and rejects bad rates") {
    SimConfig c;
    const RealGrid g = expected_image({10.0, 20.0, 30.0}, c);
    CHECK(sample_ronchigram(g, 9).counts.values == sample_ronchigram(g, 9).counts.values);
    RealGrid bad(32, 1.0);
    bad.values[5] = std::nan("");
    CHECK_THROWS_AS(sample_ronchigram(bad, 1), NumericError);
    bad.values[5] = -1.0;
    CHECK_THROWS_AS(sample_ronchigram(bad, 1), NumericError);
}

TEST_CASE("dataset round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "ronchi_test_dataset";
    std::filesystem::remove_all(dir);
    SimConfig c;
    c.side = 32;
    const io::Dataset d = io::simulate_dataset(c, 5, 200.0, 42);
    io::write_dataset(dir, d);
    const io::Dataset back = io::read_dataset(dir);
    REQUIRE(back.images.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back.images[i].counts.values == d.images[i].counts.values);
        CHECK(back.records[i].state.coeffs == d.records[i].state.coeffs);
        CHECK(back.records[i].seed == d.records[i].seed);
        CHECK(back.records[i].config.side == 32);
    }
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(io::read_dataset(dir), IoError);
}

} // TEST_SUITE
