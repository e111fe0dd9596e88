#pragma once

// Small random models and datasets shared by the test binaries.

#include <random>

#include "ronchi/gp.hpp"

namespace fixture {

using ronchi::GPModel;
using ronchi::HatBasis;
using ronchi::LatentDataset;
using ronchi::Mat;
using ronchi::Rng;
using ronchi::Vec;

inline Vec uniform_vec(int n, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> uni(lo, hi);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uni(rng);
    return v;
}

inline GPModel random_model(int n, int l, Rng& rng, int knots = 5) {
    GPModel m;
    m.latent_dim = l;
    m.kernel.signal_variance = uniform_vec(1, 0.2, 2.0, rng)[0];
    m.kernel.lengthscales = uniform_vec(n, 20.0, 120.0, rng);
    m.kernel.noise_variance = uniform_vec(l, 1e-3, 1e-1, rng);
    m.mean.basis = HatBasis(n, knots, 300.0);
    m.mean.weights = Mat::Zero(l, m.mean.basis.size());
    for (Eigen::Index i = 0; i < m.mean.weights.size(); ++i)
        m.mean.weights.data()[i] = uniform_vec(1, -1.0, 1.0, rng)[0];
    return m;
}

inline LatentDataset random_data(int n, int l, int steps, Rng& rng, double step = 60.0) {
    LatentDataset d;
    d.cumulative = Mat::Zero(n, steps + 1);
    for (int t = 1; t <= steps; ++t)
        d.cumulative.col(t) = d.cumulative.col(t - 1) + uniform_vec(n, -step, step, rng);
    d.z = Mat(l, steps + 1);
    for (Eigen::Index i = 0; i < d.z.size(); ++i) d.z.data()[i] = uniform_vec(1, -2.0, 2.0, rng)[0];
    return d;
}

} // namespace fixture
