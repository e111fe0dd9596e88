#include "ronchi/optics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ronchi/errors.hpp"
#include "ronchi/fft.hpp"

namespace ronchi {

namespace {

constexpr double kScreenStrength = 0.2;
constexpr double kScreenSmoothingPx = 2.0;
constexpr double kFloorFraction = 1e-3;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

double signed_frequency(int idx, int side) {
    // natural FFT layout index -> signed frequency in lattice units
    return idx < side / 2 ? idx : idx - side;
}

} // namespace

SimMode parse_sim_mode(const std::string& name) {
    if (name == "wave") return SimMode::wave;
    if (name == "analytic_even" || name == "analytic") return SimMode::analytic_even;
    throw ConfigError("unknown simulation mode '" + name + "'");
}

std::string to_string(SimMode mode) {
    return mode == SimMode::wave ? "wave" : "analytic_even";
}

void SimConfig::validate() const {
    if (side < 32 || !is_power_of_two(side))
        throw ConfigError("SimConfig: side must be a power of two >= 32");
    if (!(dose > 0.0) || !std::isfinite(dose)) throw ConfigError("SimConfig: dose must be > 0");
    if (!(aperture_semiangle > 0.0 && aperture_semiangle <= 1.0))
        throw ConfigError("SimConfig: aperture_semiangle must lie in (0, 1]");
    if (!(wavelength > 0.0) || !std::isfinite(wavelength))
        throw ConfigError("SimConfig: wavelength must be > 0");
}

RealGrid aberration_phase(const AberrationState& state, int side, double wavelength,
                          double aperture_semiangle) {
    if (state.dim() != 3)
        throw ConfigError("aberration_phase: unsupported aberration order (need n = 3, got n = " +
                          std::to_string(state.dim()) + ")");
    const double c1 = state.coeffs[0];
    const double a1x = state.coeffs[1];
    const double a1y = state.coeffs[2];
    const double k_ap = aperture_semiangle * (side / 2);
    const double scale = std::numbers::pi * wavelength;

    RealGrid chi(side, 0.0);
    for (int r = 0; r < side; ++r) {
        const double ky = r - side / 2;
        for (int c = 0; c < side; ++c) {
            const double kx = c - side / 2;
            if (kx * kx + ky * ky > k_ap * k_ap) continue;
            chi(r, c) = scale * (c1 * (kx * kx + ky * ky) + a1x * (kx * kx - ky * ky) +
                                 2.0 * a1y * kx * ky);
        }
    }
    return chi;
}

Grid<std::uint8_t> aperture_mask(int side, double aperture_semiangle) {
    const double k_ap = aperture_semiangle * (side / 2);
    Grid<std::uint8_t> mask(side, 0);
    for (int r = 0; r < side; ++r) {
        const double ky = r - side / 2;
        for (int c = 0; c < side; ++c) {
            const double kx = c - side / 2;
            mask(r, c) = (kx * kx + ky * ky <= k_ap * k_ap) ? 1 : 0;
        }
    }
    return mask;
}

RealGrid phase_screen(int side, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(-std::numbers::pi, std::numbers::pi);
    std::vector<fft::Complex> field(static_cast<std::size_t>(side) * side);
    for (auto& v : field) v = uni(rng);

    fft::transform_2d(field, side, true);
    const double s = kScreenSmoothingPx;
    const double norm = 1.0 / (static_cast<double>(side) * side);
    for (int r = 0; r < side; ++r) {
        const double fy = signed_frequency(r, side) / side;
        for (int c = 0; c < side; ++c) {
            const double fx = signed_frequency(c, side) / side;
            const double g = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * s * s *
                                      (fx * fx + fy * fy));
            field[static_cast<std::size_t>(r) * side + c] *= g * norm;
        }
    }
    fft::transform_2d(field, side, false);

    RealGrid phase(side);
    for (std::size_t i = 0; i < phase.values.size(); ++i)
        phase.values[i] = kScreenStrength * field[i].real();
    return phase;
}

RealGrid analytic_power_spectrum(const AberrationState& state, const SimConfig& config) {
    config.validate();
    const int side = config.side;
    const RealGrid chi = aberration_phase(state, side, config.wavelength, config.aperture_semiangle);
    const double k_ap = config.aperture_semiangle * (side / 2);
    const double floor = kFloorFraction * config.dose;

    RealGrid h(side, floor);
    for (int r = 0; r < side; ++r) {
        const double ky = r - side / 2;
        for (int c = 0; c < side; ++c) {
            const double kx = c - side / 2;
            const double q = std::sqrt(kx * kx + ky * ky);
            if (q >= k_ap) continue;
            const double band = std::cos(0.5 * std::numbers::pi * q / k_ap);
            const double amp = band * band * std::sin(chi(r, c));
            h(r, c) = config.dose * amp * amp + floor;
        }
    }
    return h;
}

namespace {

RealGrid wave_expected_image(const AberrationState& state, const SimConfig& config) {
    const int side = config.side;
    const std::size_t p = static_cast<std::size_t>(side) * side;
    const RealGrid chi = aberration_phase(state, side, config.wavelength, config.aperture_semiangle);
    const auto mask = aperture_mask(side, config.aperture_semiangle);

    // Probe in the sample plane: IFFT{A(k) exp(-i chi(k))}.
    std::vector<fft::Complex> wave(p);
    for (std::size_t i = 0; i < p; ++i)
        wave[i] = mask.values[i] ? std::polar(1.0, -chi.values[i]) : fft::Complex{};
    fft::unshift_center(wave, side);
    fft::transform_2d(wave, side, false);

    const RealGrid screen = phase_screen(side, config.phase_screen_seed);
    for (std::size_t i = 0; i < p; ++i) wave[i] *= std::polar(1.0, screen.values[i]);

    // Detector plane intensity.
    fft::transform_2d(wave, side, true);
    fft::shift_center(wave, side);

    RealGrid intensity(side);
    double aperture_sum = 0.0;
    std::size_t aperture_count = 0;
    for (std::size_t i = 0; i < p; ++i) {
        intensity.values[i] = std::norm(wave[i]);
        if (mask.values[i]) {
            aperture_sum += intensity.values[i];
            ++aperture_count;
        }
    }
    const double mean_in = aperture_sum / static_cast<double>(aperture_count);
    const double floor = kFloorFraction * config.dose;
    for (double& v : intensity.values) v = floor + (config.dose - floor) * v / mean_in;
    return intensity;
}

RealGrid analytic_expected_image(const AberrationState& state, const SimConfig& config) {
    const int side = config.side;
    const std::size_t p = static_cast<std::size_t>(side) * side;
    RealGrid h = analytic_power_spectrum(state, config);
    fft::unshift_center(h.values, side);

    // Hermitian random phases (seeded) so the synthesized image is real.
    Rng rng(config.phase_screen_seed);
    std::uniform_real_distribution<double> uni(-std::numbers::pi, std::numbers::pi);
    std::vector<double> theta(p, 0.0);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const int mr = (side - r) % side;
            const int mc = (side - c) % side;
            const std::size_t i = static_cast<std::size_t>(r) * side + c;
            const std::size_t j = static_cast<std::size_t>(mr) * side + mc;
            if (i < j) {
                theta[i] = uni(rng);
                theta[j] = -theta[i];
            }
        }
    }
    std::vector<fft::Complex> spec(p);
    for (std::size_t i = 0; i < p; ++i) spec[i] = std::polar(std::sqrt(h.values[i]), theta[i]);
    spec[0] = 0.0;  // zero-mean modulation
    fft::transform_2d(spec, side, false);

    double peak = 0.0;
    for (const auto& v : spec) peak = std::max(peak, std::abs(v.real()));
    RealGrid image(side);
    for (std::size_t i = 0; i < p; ++i) {
        const double mod = peak > 0.0 ? spec[i].real() / peak : 0.0;
        image.values[i] = config.dose * (1.0 + 0.5 * mod);
    }
    return image;
}

} // namespace

RealGrid expected_image(const AberrationState& state, const SimConfig& config) {
    config.validate();
    if (!state.finite()) throw NumericError("expected_image: non-finite aberration state");
    return config.mode == SimMode::wave ? wave_expected_image(state, config)
                                        : analytic_expected_image(state, config);
}

Ronchigram sample_ronchigram(const RealGrid& expected, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    Ronchigram y;
    y.counts = Grid<std::uint32_t>(expected.side, 0);
    for (std::size_t i = 0; i < expected.values.size(); ++i) {
        const double rate = expected.values[i];
        if (!std::isfinite(rate) || rate < 0.0)
            throw NumericError("sample_ronchigram: invalid rate at pixel " + std::to_string(i));
        if (rate == 0.0) continue;
        std::poisson_distribution<std::int64_t> draw(rate);
        const std::int64_t k = draw(rng);
        y.counts.values[i] = static_cast<std::uint32_t>(
            std::min<std::int64_t>(k, std::numeric_limits<std::uint32_t>::max()));
    }
    return y;
}

} // namespace ronchi
