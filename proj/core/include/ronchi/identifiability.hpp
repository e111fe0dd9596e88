#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ronchi/errors.hpp"
#include "ronchi/types.hpp"

namespace ronchi {

class ResolutionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class CounterexampleInvalid : public NumericError {
public:
    using NumericError::NumericError;
};

enum class BasisFamily { symmetric_hat, symmetric_gaussian, cosine, shifted_hat, custom };
std::string to_string(BasisFamily family);
BasisFamily parse_basis_family(const std::string& name);

/// m scalar functions on R^n plus the metadata the spectral checks need.
struct BasisSet {
    BasisFamily family = BasisFamily::custom;
    int dim = 1;
    std::vector<std::function<double(const Vec&)>> functions;
    double support = 1.0;    // half-width of the region carrying the functions
    double bandwidth = 1.0;  // heuristic max angular frequency with significant content
    double period = 0.0;     // > 0 for periodic families

    int size() const { return static_cast<int>(functions.size()); }
    Vec evaluate(const Vec& x) const;  // Phi(x), m entries
};

// centers: m x n. Tensor hats of half-width `width`; symmetric_* variants are
// 1/2 (phi(x - c) + phi(x + c)).
BasisSet symmetric_hats(const Mat& centers, double width);
BasisSet shifted_hats(const Mat& centers, double width);
BasisSet symmetric_gaussians(const Mat& centers, double width);
// frequencies: m x n, phi_i(x) = cos(omega_i^T x).
BasisSet cosines(const Mat& frequencies);

struct EvennessReport {
    bool passed = false;
    double max_violation = 0.0;
};

// Probes uniform in [-support, support]^n (fixed seed); passes iff violation <= tol.
EvennessReport check_evenness(const BasisSet& basis, int probes = 1000, std::uint64_t seed = 1,
                              double tolerance = 1e-12);

struct FourierGrid {
    double extent = 0.0;  // x half-width of the quadrature box; 0 -> 4 * support
    int points = 129;     // odd, per axis; the omega grid uses the same count
};

/// phi_hat_i(omega) on a symmetric frequency grid (row = omega multi-index,
/// first axis fastest).
struct SpectralProfile {
    int dim = 1;
    Vec omega;            // per-axis frequencies, symmetric about 0
    Eigen::MatrixXcd values;  // omega.size()^n x m
    double extent = 0.0;
    double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
    Vec frequency(Eigen::Index row) const;
};

// Trapezoidal quadrature of int phi(x) exp(-i omega^T x) dx over [-extent, extent]^n,
// omega_k = k * pi / extent up to the grid's Nyquist frequency. Throws
// ResolutionError when the basis bandwidth exceeds that Nyquist frequency.
SpectralProfile sampled_fourier(const BasisSet& basis, const FourierGrid& grid = {});

struct RichnessReport {
    bool passed = false;
    int rank = 0;
    Vec singular_values;
};
RichnessReport check_spectral_richness(const SpectralProfile& profile, double rel_threshold = 1e-8);

struct PeriodicityReport {
    bool passed = false;
    double min_offpeak_fraction = 0.0;  // worst case over the probe directions
    int peak_bins = 0;
};
// Energy of S = Phi_hat theta outside its top (m * 2^n) bins must exceed
// `threshold` of the total for theta and for `probes` random unit directions.
PeriodicityReport check_periodicity(const SpectralProfile& profile, const Vec& theta,
                                    int probes = 64, std::uint64_t seed = 1,
                                    double threshold = 0.05);

struct SignalReport {
    bool passed = false;
    double support_fraction = 0.0;
};
// Fraction of bins with |S| > 1e-6 * max |S| must exceed 1%.
SignalReport check_signal(const SpectralProfile& profile, const Vec& theta);

struct AmbiguityReport {
    Vec delta;
    Vec theta_bar;
    double residual = 0.0;  // sup |Phi(x) theta* - Phi(x + delta) theta_bar| on probes
    Vec x0_a, x0_b;         // two joint least-squares minimizers (x0_b = x0_a + delta)
    Vec theta_a, theta_b;
    double objective_a = 0.0, objective_b = 0.0;
};

struct AmbiguityOptions {
    int observations = 20;
    double noise_std = 0.05;
    int profile_points = 201;  // per axis, profile-objective search over x0
    int probe_points = 201;    // per axis, for the shift residual
    std::uint64_t seed = 3;
};

// Requires a periodic basis; delta = period along the first axis, theta_bar = theta*.
// Throws CounterexampleInvalid if the shifted representation misses 1e-8.
AmbiguityReport demonstrate_ambiguity(const BasisSet& basis, const Vec& theta_star,
                                      const AmbiguityOptions& options = {});

// Joint least-squares objective sum_t ||z(t) - Phi(x0 + s(t))^T theta||^2 (scalar z).
double joint_objective(const BasisSet& basis, const Vec& z, const Mat& cumulative, const Vec& x0,
                       const Vec& theta);

// Smallest sup residual of a best (least-squares) theta_bar over shifts
// delta = d * e_1, d on a uniform grid in [lo, hi].
double min_shift_residual(const BasisSet& basis, const Vec& theta_star, double lo, double hi,
                          int count = 200, int probe_points = 201);

struct UniquenessGrid {
    int points = 41;          // per swept coordinate (odd)
    double xi_step = 0.25;
    double theta_step = 0.1;
    int probe_points = 61;    // per axis
    double tolerance = 1e-6;
};

struct UniquenessReport {
    bool passed = false;      // exactly one matching cell
    long matching_cells = 0;
    long cells = 0;
    double true_cell_residual = 0.0;
};

// Exhaustive sweep of (xi', theta') on a grid centered on (xi, theta*); a cell
// matches when sup_x |Phi(x + xi) theta* - Phi(x + xi') theta'| < tolerance.
// n <= 2, m <= 5.
UniquenessReport verify_uniqueness(const BasisSet& basis, const Vec& xi, const Vec& theta_star,
                                   const UniquenessGrid& grid = {});

} // namespace ronchi
