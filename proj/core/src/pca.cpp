#include "ronchi/pca.hpp"

#include <Eigen/SVD>

#include "ronchi/encoder.hpp"
#include "ronchi/errors.hpp"

namespace ronchi {

PcaBasis fit_pca(const Mat& data, int latent_dim) {
    const Eigen::Index samples = data.cols();
    const Eigen::Index features = data.rows();
    if (samples < 1 || features < 1) throw ConfigError("fit_pca: empty dataset");
    const Eigen::Index max_rank = std::min(samples - 1, features);
    if (latent_dim < 1 || latent_dim > max_rank)
        throw ConfigError("fit_pca: latent_dim " + std::to_string(latent_dim) +
                          " exceeds attainable rank " + std::to_string(max_rank));

    PcaBasis basis;
    basis.mean = data.rowwise().mean();
    const Mat centered = data.colwise() - basis.mean;
    Eigen::BDCSVD<Mat> svd(centered.transpose(), Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    const double denom = static_cast<double>(samples > 1 ? samples - 1 : 1);
    const Vec variance = sv.array().square() / denom;
    const double total = variance.sum();

    basis.components = svd.matrixV().leftCols(latent_dim).transpose();
    // Sign convention: largest-magnitude loading of each component is positive.
    for (Eigen::Index k = 0; k < basis.components.rows(); ++k) {
        Eigen::Index arg;
        basis.components.row(k).cwiseAbs().maxCoeff(&arg);
        if (basis.components(k, arg) < 0.0) basis.components.row(k) *= -1.0;
    }
    basis.explained_variance = variance.head(latent_dim);
    basis.explained_ratio = total > 0.0 ? Vec(basis.explained_variance / total)
                                        : Vec(Vec::Zero(latent_dim));
    return basis;
}

PcaBasis fit_pca(const std::vector<PowerSpectrum>& dataset, int latent_dim, int pool) {
    if (dataset.empty()) throw ConfigError("fit_pca: empty dataset");
    Vec first = pool_spectrum(dataset.front(), pool);
    Mat data(first.size(), static_cast<Eigen::Index>(dataset.size()));
    for (std::size_t i = 0; i < dataset.size(); ++i)
        data.col(static_cast<Eigen::Index>(i)) = pool_spectrum(dataset[i], pool);
    PcaBasis basis = fit_pca(data, latent_dim);
    basis.pool = pool;
    return basis;
}

Vec encode_pca(const PcaBasis& basis, const Vec& features) {
    if (features.size() != basis.mean.size()) throw ShapeError("encode_pca: feature size mismatch");
    return basis.components * (features - basis.mean);
}

Vec encode_pca(const PcaBasis& basis, const PowerSpectrum& spectrum) {
    return encode_pca(basis, pool_spectrum(spectrum, basis.pool));
}

Vec reconstruct_pca(const PcaBasis& basis, const Vec& code) {
    return basis.mean + basis.components.transpose() * code;
}

} // namespace ronchi
