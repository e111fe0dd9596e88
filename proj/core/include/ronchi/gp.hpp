#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "ronchi/types.hpp"

namespace ronchi {

/// Squared-exponential base kernel with diagonal lengthscales (nm):
/// k0(x, x') = sf2 * exp(-1/2 sum_d ((x_d - x'_d) / l_d)^2).
struct KernelConfig {
    double signal_variance = 1.0;
    Vec lengthscales;    // n entries
    Vec noise_variance;  // one per latent dimension

    void validate() const;  // all strictly positive and finite
};

double base_kernel(const KernelConfig& cfg, const Vec& x, const Vec& xp);

// k(x, x') = 1/2 (k0(x, x') + k0(x, -x')).
double kernel_eval(const KernelConfig& cfg, const Vec& x, const Vec& xp);

/// Tensor-product grid of piecewise-linear hats on [-extent, extent]^n with an odd
/// knot count per axis (so the grid is mirror symmetric about 0). Knots that map to
/// each other under x -> -x share a single weight.
class HatBasis {
public:
    HatBasis() = default;
    HatBasis(int dim, int knots_per_axis, double extent);

    int dim() const { return dim_; }
    int knots_per_axis() const { return knots_; }
    double extent() const { return extent_; }
    double spacing() const { return 2.0 * extent_ / (knots_ - 1); }
    int size() const { return static_cast<int>(orbit_count_); }  // m
    int full_size() const { return static_cast<int>(orbit_of_.size()); }

    // Non-zero symmetrized basis values at x as (orbit index, value) pairs; the
    // list for x and -x is the same.
    std::vector<std::pair<int, double>> evaluate(const Vec& x) const;
    // Dense row of basis values (length m).
    Vec row(const Vec& x) const;

    int orbit_of(std::size_t full_index) const { return orbit_of_[full_index]; }
    Vec knot(std::size_t full_index) const;

private:
    // Multilinear hat weights at y: (full knot index, weight) pairs.
    void interpolation_weights(const Vec& y, std::vector<std::pair<std::size_t, double>>& out) const;

    int dim_ = 0;
    int knots_ = 0;
    double extent_ = 0.0;
    std::vector<int> orbit_of_;
    std::size_t orbit_count_ = 0;
};

/// Even prior mean mu_f(x) = W * psi(x), psi the symmetrized hat basis.
struct PriorMean {
    HatBasis basis;
    Mat weights;  // latent_dim x m

    int latent_dim() const { return static_cast<int>(weights.rows()); }
    Vec operator()(const Vec& x) const;
};

struct GPModel {
    KernelConfig kernel;
    PriorMean mean;
    int latent_dim = 0;

    int state_dim() const { return static_cast<int>(kernel.lengthscales.size()); }
    void validate() const;
};

/// Time-indexed latent observations and cumulative inputs (column t of each).
struct LatentDataset {
    Mat z;           // latent_dim x (T+1)
    Mat cumulative;  // n x (T+1), column 0 is the zero vector

    Eigen::Index size() const { return z.cols(); }
    bool empty() const { return z.cols() == 0; }
    void validate(int latent_dim, int state_dim) const;
};

// K_ts = k(x0 + s(t), x0 + s(s)).
Mat gram_matrix(const GPModel& model, const Vec& x0, const Mat& cumulative);

/// GP conditioned on one candidate initial state. Factorizations are shared
/// across latent dimensions whose noise variances coincide.
class CandidatePosterior {
public:
    CandidatePosterior(const GPModel& model, const LatentDataset& data, const Vec& x0);

    double log_likelihood() const { return log_likelihood_; }
    Vec mean(const Vec& x) const;      // posterior mean, latent_dim entries
    Vec variance(const Vec& x) const;  // posterior variance per latent dim, clamped >= 0
    const Vec& x0() const { return x0_; }
    int factorizations() const { return static_cast<int>(factors_.size()); }
    double jitter() const { return jitter_; }

private:
    const GPModel* model_;
    Vec x0_;
    Mat points_;  // n x (T+1)
    std::vector<Eigen::LLT<Mat>> factors_;
    std::vector<int> factor_of_dim_;
    Mat alpha_;  // (T+1) x latent_dim
    double log_likelihood_ = 0.0;
    double jitter_ = 0.0;
};

double log_marginal_likelihood(const GPModel& model, const LatentDataset& data, const Vec& x0);
Vec posterior_mean(const GPModel& model, const LatentDataset& data, const Vec& x0, const Vec& x);
Vec posterior_variance(const GPModel& model, const LatentDataset& data, const Vec& x0,
                       const Vec& x);

// Ridge (1e-8) least squares on the symmetrized hat basis. states: n x N, latents: l x N.
PriorMean fit_prior_mean(const Mat& states, const Mat& latents, const HatBasis& basis,
                         double ridge = 1e-8);

struct HyperGrid {
    std::vector<double> signal_variance;
    std::vector<double> lengthscale_scale;  // multiplies base_lengthscales
    std::vector<double> noise_variance;     // searched independently per latent dim
    Vec base_lengthscales;
};

// Log-spaced grid with `points` values per axis sized from the data spread.
HyperGrid default_hyper_grid(const Mat& states, const Mat& latents, int points = 7);

struct HyperFit {
    KernelConfig kernel;
    double log_likelihood = 0.0;
};

// Grid search maximizing the summed per-dimension log marginal likelihood of the
// labeled data (residuals about the model's prior mean). At most max_points
// samples (evenly strided) enter the likelihood.
HyperFit fit_hyperparameters(const GPModel& model, const Mat& states, const Mat& latents,
                             const HyperGrid& grid, int max_points = 400);

// Log marginal likelihood of labeled data under (model mean, cfg).
double labeled_log_likelihood(const GPModel& model, const KernelConfig& cfg, const Mat& states,
                              const Mat& latents);

// fit_prior_mean followed by fit_hyperparameters on default_hyper_grid.
GPModel fit_gp_model(const Mat& states, const Mat& latents, const HatBasis& basis,
                     int grid_points = 7, int max_points = 400);

// Text manifest at `file` plus binary weight block "<file>.weights" ("RGPW", v1).
void save_gp_model(const std::filesystem::path& file, const GPModel& model);
GPModel load_gp_model(const std::filesystem::path& file);

} // namespace ronchi
