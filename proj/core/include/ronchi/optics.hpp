#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ronchi/types.hpp"

namespace ronchi {

enum class SimMode { wave, analytic_even };

SimMode parse_sim_mode(const std::string& name);
std::string to_string(SimMode mode);

struct SimConfig {
    int side = 64;                    // pixels per edge, power of two >= 32
    double wavelength = 5e-5;         // scales chi; k is measured in lattice units
    double aperture_semiangle = 0.5;  // fraction of Nyquist (k_N = side / 2)
    double dose = 1000.0;             // mean electrons per in-aperture pixel
    std::uint64_t phase_screen_seed = 7;
    SimMode mode = SimMode::wave;

    void validate() const;  // throws ConfigError
};

struct Ronchigram {
    Grid<std::uint32_t> counts;
    std::optional<AberrationState> state_tag;
};

// chi(k) = pi*lambda*[C1 (kx^2+ky^2) + A1x (kx^2-ky^2) + 2 A1y kx ky] on the centered
// lattice (kx = col - side/2, ky = row - side/2), zero outside the aperture disc.
// Throws ConfigError unless the state has exactly three coefficients.
RealGrid aberration_phase(const AberrationState& state, int side, double wavelength,
                          double aperture_semiangle);

// Disc |k| <= aperture * side/2 on the centered lattice.
Grid<std::uint8_t> aperture_mask(int side, double aperture_semiangle);

// Expected counts g(x) (strictly positive). Wave mode: Ronchigram of a probe through
// a frozen weak phase screen, normalized so the in-aperture mean equals the dose.
// Analytic mode: a spatial image synthesized from analytic_power_spectrum().
RealGrid expected_image(const AberrationState& state, const SimConfig& config);

// Analytic expected power spectrum, DC-centered:
// h[q] = dose * (B(q) sin chi(q))^2 + 1e-3 * dose. Exactly even in the state.
RealGrid analytic_power_spectrum(const AberrationState& state, const SimConfig& config);

// Independent per-pixel Poisson draws. Throws NumericError on non-finite or negative rates.
Ronchigram sample_ronchigram(const RealGrid& expected, std::uint64_t rng_seed);

// Weak phase screen t(r) = exp(i eps phi_s(r)), eps = 0.2, phi_s a Gaussian-smoothed
// (2 px) field of iid uniform(-pi, pi) draws. Returned as the phase eps*phi_s.
RealGrid phase_screen(int side, std::uint64_t seed);

} // namespace ronchi
