#pragma once

#include <vector>

#include "ronchi/preprocess.hpp"
#include "ronchi/types.hpp"

namespace ronchi {

/// Principal directions of centered feature vectors (pooled spectra).
struct PcaBasis {
    int pool = 1;
    Vec mean;
    Mat components;             // latent_dim x features, orthonormal rows
    Vec explained_variance;     // per component
    Vec explained_ratio;        // variance / total variance
};

// Columns of data are samples. Throws ConfigError when latent_dim exceeds the
// attainable rank min(samples - 1, features).
PcaBasis fit_pca(const Mat& data, int latent_dim);
PcaBasis fit_pca(const std::vector<PowerSpectrum>& dataset, int latent_dim, int pool = 4);

Vec encode_pca(const PcaBasis& basis, const Vec& features);
Vec encode_pca(const PcaBasis& basis, const PowerSpectrum& spectrum);
Vec reconstruct_pca(const PcaBasis& basis, const Vec& code);

} // namespace ronchi
