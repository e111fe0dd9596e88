#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ronchi/gp.hpp"
#include "ronchi/types.hpp"

namespace ronchi {

/// Even random-feature map g(x) = 1/2 (c(x) + c(-x)), c(x) = A cos(Omega x + b).
struct EvenFeatureMap {
    Mat frequencies;  // J x n
    Vec phases;       // J
    Mat amplitudes;   // l x J

    bool empty() const { return amplitudes.size() == 0; }
    Vec operator()(const Vec& x) const;
};

/// Truth for the latent observation model z = f(x) + mismatch(x) + nu.
struct SyntheticMap {
    PriorMean base;           // f_true on the symmetrized hat basis
    EvenFeatureMap mismatch;  // may be empty
    double epsilon = 0.0;     // configured sup-norm of the mismatch (x signal scale)
    Vec noise_std;            // per latent dimension

    int latent_dim() const { return base.latent_dim(); }
    int state_dim() const { return base.basis.dim(); }
    Vec truth(const Vec& x) const;  // f_true(x) + mismatch(x)
};

// truth(x) + N(0, diag(noise_std^2)).
Vec sample_latent(const SyntheticMap& map, const Vec& x, Rng& rng);

struct ScenarioOptions {
    int state_dim = 3;
    int latent_dim = 0;           // 0: same as state_dim
    double extent = 300.0;        // hat-grid half width (nm)
    int knots_per_axis = 13;
    double feature_lengthscale = 80.0;
    double mismatch_lengthscale = 250.0;
    int features = 64;
    double noise_std = 0.02;
    double probe_box = 200.0;     // region where scales are normalized
    int probe_points = 13;        // per axis
    std::uint64_t seed = 20240611;
};

struct Scenario {
    std::string name;
    SyntheticMap truth;
    GPModel prior;
    double signal_scale = 1.0;
};

// "exact-prior", "mismatch-0.1", "mismatch-0.3", "wrong-lengthscale".
const std::vector<std::string>& scenario_names();
Scenario make_scenario(const std::string& name, const ScenarioOptions& options = {});

// Symmetric probe grid over [-box, box]^n, points_per_axis^n columns.
Mat probe_grid(int state_dim, double box, int points_per_axis);

// max over probes and latent dims of |a(x) - b(x)|.
template <class A, class B>
double sup_distance(const A& a, const B& b, const Mat& probes) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < probes.cols(); ++i)
        worst = std::max(worst, (a(Vec(probes.col(i))) - b(Vec(probes.col(i)))).cwiseAbs().maxCoeff());
    return worst;
}

} // namespace ronchi
