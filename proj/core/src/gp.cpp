#include "ronchi/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ronchi/errors.hpp"
#include "ronchi/grid_io.hpp"

namespace ronchi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

} // namespace

void KernelConfig::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(signal_variance)) throw ConfigError("kernel: signal variance must be > 0");
    if (lengthscales.size() == 0) throw ConfigError("kernel: no lengthscales");
    for (double l : lengthscales)
        if (!positive(l)) throw ConfigError("kernel: lengthscales must be > 0");
    if (noise_variance.size() == 0) throw ConfigError("kernel: no noise variances");
    for (double v : noise_variance)
        if (!positive(v)) throw ConfigError("kernel: noise variances must be > 0");
}

double base_kernel(const KernelConfig& cfg, const Vec& x, const Vec& xp) {
    double q = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double r = (x[d] - xp[d]) / cfg.lengthscales[d];
        q += r * r;
    }
    return cfg.signal_variance * std::exp(-0.5 * q);
}

double kernel_eval(const KernelConfig& cfg, const Vec& x, const Vec& xp) {
    double direct = 0.0;
    double mirrored = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double a = (x[d] - xp[d]) / cfg.lengthscales[d];
        const double b = (x[d] + xp[d]) / cfg.lengthscales[d];
        direct += a * a;
        mirrored += b * b;
    }
    return 0.5 * cfg.signal_variance * (std::exp(-0.5 * direct) + std::exp(-0.5 * mirrored));
}

// ---------------------------------------------------------------------------
// Hat basis

HatBasis::HatBasis(int dim, int knots_per_axis, double extent)
    : dim_(dim), knots_(knots_per_axis), extent_(extent) {
    if (dim < 1) throw ConfigError("HatBasis: dimension must be >= 1");
    if (knots_per_axis < 3 || knots_per_axis % 2 == 0)
        throw ConfigError("HatBasis: knots per axis must be odd and >= 3");
    if (!(extent > 0.0)) throw ConfigError("HatBasis: extent must be > 0");

    std::size_t full = 1;
    for (int d = 0; d < dim; ++d) full *= static_cast<std::size_t>(knots_per_axis);
    orbit_of_.assign(full, -1);
    for (std::size_t j = 0; j < full; ++j) {
        if (orbit_of_[j] >= 0) continue;
        // mirror multi-index: k -> K-1-k on every axis
        std::size_t rem = j, mirror = 0, stride = 1;
        for (int d = 0; d < dim; ++d) {
            const std::size_t k = rem % knots_per_axis;
            rem /= knots_per_axis;
            mirror += (knots_per_axis - 1 - k) * stride;
            stride *= knots_per_axis;
        }
        orbit_of_[j] = static_cast<int>(orbit_count_);
        orbit_of_[mirror] = static_cast<int>(orbit_count_);
        ++orbit_count_;
    }
}

Vec HatBasis::knot(std::size_t full_index) const {
    Vec x(dim_);
    for (int d = 0; d < dim_; ++d) {
        x[d] = -extent_ + spacing() * static_cast<double>(full_index % knots_);
        full_index /= knots_;
    }
    return x;
}

void HatBasis::interpolation_weights(const Vec& y,
                                     std::vector<std::pair<std::size_t, double>>& out) const {
    out.clear();
    const double h = spacing();
    std::vector<int> lower(dim_);
    std::vector<double> frac(dim_);
    for (int d = 0; d < dim_; ++d) {
        if (!(y[d] >= -extent_ && y[d] <= extent_)) return;  // outside support (or NaN)
        const double u = (y[d] + extent_) / h;
        int i = static_cast<int>(std::floor(u));
        i = std::clamp(i, 0, knots_ - 2);
        lower[d] = i;
        frac[d] = std::clamp(u - i, 0.0, 1.0);
    }
    const std::size_t corners = std::size_t{1} << dim_;
    for (std::size_t c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t index = 0, stride = 1;
        for (int d = 0; d < dim_; ++d) {
            const bool upper = (c >> d) & 1U;
            w *= upper ? frac[d] : 1.0 - frac[d];
            index += static_cast<std::size_t>(lower[d] + (upper ? 1 : 0)) * stride;
            stride *= static_cast<std::size_t>(knots_);
        }
        if (w != 0.0) out.emplace_back(index, w);
    }
}

std::vector<std::pair<int, double>> HatBasis::evaluate(const Vec& x) const {
    if (x.size() != dim_) throw ShapeError("HatBasis: state dimension mismatch");
    std::vector<std::pair<std::size_t, double>> plus, minus;
    interpolation_weights(x, plus);
    interpolation_weights(-x, minus);

    // Per-orbit sums from each side, then combined symmetrically so that
    // evaluate(x) and evaluate(-x) agree bit for bit.
    std::map<int, std::pair<double, double>> acc;
    for (const auto& [j, w] : plus) acc[orbit_of_[j]].first += w;
    for (const auto& [j, w] : minus) acc[orbit_of_[j]].second += w;
    std::vector<std::pair<int, double>> out;
    out.reserve(acc.size());
    for (const auto& [o, s] : acc) out.emplace_back(o, 0.5 * (s.first + s.second));
    return out;
}

Vec HatBasis::row(const Vec& x) const {
    Vec r = Vec::Zero(size());
    for (const auto& [o, v] : evaluate(x)) r[o] = v;
    return r;
}

Vec PriorMean::operator()(const Vec& x) const {
    Vec out = Vec::Zero(weights.rows());
    for (const auto& [o, v] : basis.evaluate(x)) out += v * weights.col(o);
    return out;
}

void GPModel::validate() const {
    kernel.validate();
    if (latent_dim < 1) throw ConfigError("GPModel: latent_dim must be >= 1");
    if (kernel.noise_variance.size() != latent_dim)
        throw ConfigError("GPModel: need one noise variance per latent dimension");
    if (mean.latent_dim() != latent_dim) throw ConfigError("GPModel: prior mean latent_dim mismatch");
    if (mean.basis.dim() != state_dim()) throw ConfigError("GPModel: prior mean state dim mismatch");
    if (mean.weights.cols() != mean.basis.size())
        throw ConfigError("GPModel: prior mean weight count mismatch");
}

void LatentDataset::validate(int latent_dim, int state_dim) const {
    if (z.cols() != cumulative.cols()) throw ShapeError("LatentDataset: z and s lengths differ");
    if (z.cols() > 0 && z.rows() != latent_dim) throw ShapeError("LatentDataset: latent_dim mismatch");
    if (cumulative.cols() > 0 && cumulative.rows() != state_dim)
        throw ShapeError("LatentDataset: state dimension mismatch");
    if (!z.allFinite() || !cumulative.allFinite())
        throw NumericError("LatentDataset: non-finite entries");
}

Mat gram_matrix(const GPModel& model, const Vec& x0, const Mat& cumulative) {
    const Eigen::Index m = cumulative.cols();
    Mat points = cumulative.colwise() + x0;
    Mat k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel_eval(model.kernel, points.col(i), points.col(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

// ---------------------------------------------------------------------------
// Candidate posterior

CandidatePosterior::CandidatePosterior(const GPModel& model, const LatentDataset& data,
                                       const Vec& x0)
    : model_(&model), x0_(x0) {
    const int l = model.latent_dim;
    data.validate(l, model.state_dim());
    if (x0.size() != model.state_dim()) throw ShapeError("candidate dimension mismatch");
    const Eigen::Index m = data.size();
    points_ = data.cumulative.colwise() + x0;
    alpha_ = Mat::Zero(m, l);
    factor_of_dim_.assign(static_cast<std::size_t>(l), -1);
    if (m == 0) return;

    const Mat k = gram_matrix(model, x0, data.cumulative);
    Mat residual(m, l);
    for (Eigen::Index t = 0; t < m; ++t)
        residual.row(t) = (data.z.col(t) - model.mean(points_.col(t))).transpose();

    const double sf2 = model.kernel.signal_variance;
    std::vector<double> noise_of_factor;
    double log_lik = 0.0;
    for (int d = 0; d < l; ++d) {
        const double noise = model.kernel.noise_variance[d];
        int f = -1;
        for (std::size_t i = 0; i < noise_of_factor.size(); ++i)
            if (noise_of_factor[i] == noise) f = static_cast<int>(i);
        if (f < 0) {
            Mat cov = k;
            cov.diagonal().array() += noise;
            Eigen::LLT<Mat> llt(cov);
            double jitter = 1e-10 * sf2;
            while (llt.info() != Eigen::Success && jitter <= 1e-6 * sf2 * (1.0 + 1e-12)) {
                Mat jittered = cov;
                jittered.diagonal().array() += jitter;
                llt.compute(jittered);
                jitter_ = jitter;
                jitter *= 10.0;
            }
            if (llt.info() != Eigen::Success)
                throw NumericError("GP covariance not positive definite after jitter escalation");
            factors_.push_back(std::move(llt));
            noise_of_factor.push_back(noise);
            f = static_cast<int>(factors_.size()) - 1;
        }
        factor_of_dim_[static_cast<std::size_t>(d)] = f;
        const auto& llt = factors_[static_cast<std::size_t>(f)];
        alpha_.col(d) = llt.solve(residual.col(d));
        const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        log_lik += -0.5 * residual.col(d).dot(alpha_.col(d)) - 0.5 * log_det -
                   0.5 * static_cast<double>(m) * kLog2Pi;
    }
    log_likelihood_ = log_lik;
}

Vec CandidatePosterior::mean(const Vec& x) const {
    Vec out = model_->mean(x);
    const Eigen::Index m = points_.cols();
    if (m == 0) return out;
    Vec kx(m);
    for (Eigen::Index t = 0; t < m; ++t) kx[t] = kernel_eval(model_->kernel, x, points_.col(t));
    out += alpha_.transpose() * kx;
    return out;
}

Vec CandidatePosterior::variance(const Vec& x) const {
    const int l = model_->latent_dim;
    const double prior = kernel_eval(model_->kernel, x, x);
    Vec out = Vec::Constant(l, prior);
    const Eigen::Index m = points_.cols();
    if (m == 0) return out;
    Vec kx(m);
    for (Eigen::Index t = 0; t < m; ++t) kx[t] = kernel_eval(model_->kernel, x, points_.col(t));
    std::vector<double> reduction(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        const Vec v = factors_[f].matrixL().solve(kx);
        reduction[f] = v.squaredNorm();
    }
    for (int d = 0; d < l; ++d)
        out[d] = std::max(0.0, prior - reduction[static_cast<std::size_t>(factor_of_dim_[d])]);
    return out;
}

double log_marginal_likelihood(const GPModel& model, const LatentDataset& data, const Vec& x0) {
    return CandidatePosterior(model, data, x0).log_likelihood();
}

Vec posterior_mean(const GPModel& model, const LatentDataset& data, const Vec& x0, const Vec& x) {
    return CandidatePosterior(model, data, x0).mean(x);
}

Vec posterior_variance(const GPModel& model, const LatentDataset& data, const Vec& x0,
                       const Vec& x) {
    return CandidatePosterior(model, data, x0).variance(x);
}

// ---------------------------------------------------------------------------
// Fitting

PriorMean fit_prior_mean(const Mat& states, const Mat& latents, const HatBasis& basis,
                         double ridge) {
    if (states.cols() != latents.cols()) throw ShapeError("fit_prior_mean: sample count mismatch");
    if (states.rows() != basis.dim()) throw ShapeError("fit_prior_mean: state dimension mismatch");
    const int m = basis.size();
    if (states.cols() < m)
        throw ConfigError("fit_prior_mean: need at least " + std::to_string(m) + " samples");

    Mat normal = Mat::Zero(m, m);
    Mat rhs = Mat::Zero(m, latents.rows());
    for (Eigen::Index i = 0; i < states.cols(); ++i) {
        const auto row = basis.evaluate(states.col(i));
        for (const auto& [a, va] : row) {
            rhs.row(a) += va * latents.col(i).transpose();
            for (const auto& [b, vb] : row) normal(a, b) += va * vb;
        }
    }
    normal.diagonal().array() += ridge;
    Eigen::LDLT<Mat> ldlt(normal);
    if (ldlt.info() != Eigen::Success)
        throw NumericError("fit_prior_mean: singular normal equations (rank error)");
    PriorMean mean;
    mean.basis = basis;
    mean.weights = ldlt.solve(rhs).transpose();
    if (!mean.weights.allFinite())
        throw NumericError("fit_prior_mean: singular normal equations (rank error)");
    return mean;
}

namespace {

std::vector<double> logspace(double lo, double hi, int points) {
    std::vector<double> v;
    if (points == 1) return {std::sqrt(lo * hi)};
    for (int i = 0; i < points; ++i)
        v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
    return v;
}

} // namespace

HyperGrid default_hyper_grid(const Mat& states, const Mat& latents, int points) {
    if (points < 1) throw ConfigError("default_hyper_grid: need at least one point per axis");
    const Vec centered_var =
        ((latents.colwise() - latents.rowwise().mean()).array().square().rowwise().mean()).matrix();
    const double var = std::max(centered_var.maxCoeff(), 1e-12);
    HyperGrid grid;
    grid.signal_variance = logspace(1e-3 * var, 10.0 * var, points);
    grid.noise_variance = logspace(1e-4 * var, 1.0 * var, points);
    grid.lengthscale_scale = logspace(0.05, 2.0, points);
    grid.base_lengthscales = (states.rowwise().maxCoeff() - states.rowwise().minCoeff()).cwiseMax(1e-9);
    return grid;
}

double labeled_log_likelihood(const GPModel& model, const KernelConfig& cfg, const Mat& states,
                              const Mat& latents) {
    GPModel m = model;
    m.kernel = cfg;
    LatentDataset data;
    data.z = latents;
    data.cumulative = states;
    return CandidatePosterior(m, data, Vec::Zero(states.rows())).log_likelihood();
}

HyperFit fit_hyperparameters(const GPModel& model, const Mat& states, const Mat& latents,
                             const HyperGrid& grid, int max_points) {
    if (grid.signal_variance.empty() || grid.lengthscale_scale.empty() || grid.noise_variance.empty())
        throw ConfigError("fit_hyperparameters: empty hyperparameter grid");
    if (states.cols() != latents.cols() || states.cols() == 0)
        throw ShapeError("fit_hyperparameters: bad labeled dataset");
    if (grid.base_lengthscales.size() != states.rows())
        throw ShapeError("fit_hyperparameters: base lengthscale dimension mismatch");

    const Eigen::Index total = states.cols();
    const Eigen::Index stride = std::max<Eigen::Index>(1, (total + max_points - 1) / max_points);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < total; i += stride) keep.push_back(i);
    const Eigen::Index m = static_cast<Eigen::Index>(keep.size());
    Mat x(states.rows(), m);
    Mat residual(latents.rows(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
        x.col(i) = states.col(keep[i]);
        residual.col(i) = latents.col(keep[i]) - model.mean(x.col(i));
    }

    HyperFit best;
    best.log_likelihood = -std::numeric_limits<double>::infinity();
    const Eigen::Index l = latents.rows();
    KernelConfig cfg;
    for (double sf2 : grid.signal_variance) {
        for (double ls : grid.lengthscale_scale) {
            cfg.signal_variance = sf2;
            cfg.lengthscales = grid.base_lengthscales * ls;
            Mat k(m, m);
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j <= i; ++j)
                    k(i, j) = k(j, i) = kernel_eval(cfg, x.col(i), x.col(j));

            // The summed likelihood separates over latent dims for a fixed kernel.
            Vec best_noise = Vec::Zero(l);
            Vec best_dim = Vec::Constant(l, -std::numeric_limits<double>::infinity());
            for (double noise : grid.noise_variance) {
                Mat cov = k;
                cov.diagonal().array() += noise;
                Eigen::LLT<Mat> llt(cov);
                if (llt.info() != Eigen::Success) continue;
                const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
                for (Eigen::Index d = 0; d < l; ++d) {
                    const Vec r = residual.row(d).transpose();
                    const double ll = -0.5 * r.dot(llt.solve(r)) - 0.5 * log_det -
                                      0.5 * static_cast<double>(m) * kLog2Pi;
                    if (ll > best_dim[d]) {
                        best_dim[d] = ll;
                        best_noise[d] = noise;
                    }
                }
            }
            const double total_ll = best_dim.sum();
            if (std::isfinite(total_ll) && total_ll > best.log_likelihood) {
                best.log_likelihood = total_ll;
                best.kernel = cfg;
                best.kernel.noise_variance = best_noise;
            }
        }
    }
    if (!std::isfinite(best.log_likelihood))
        throw NumericError("fit_hyperparameters: no grid point gave a finite likelihood");
    return best;
}

GPModel fit_gp_model(const Mat& states, const Mat& latents, const HatBasis& basis, int grid_points,
                     int max_points) {
    GPModel model;
    model.latent_dim = static_cast<int>(latents.rows());
    model.mean = fit_prior_mean(states, latents, basis);
    const HyperFit fit =
        fit_hyperparameters(model, states, latents, default_hyper_grid(states, latents, grid_points), max_points);
    model.kernel = fit.kernel;
    model.validate();
    return model;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kWeightMagic[4] = {'R', 'G', 'P', 'W'};

std::string join(const Vec& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

Vec split(const std::string& s) {
    std::istringstream is(s);
    std::vector<double> values;
    double v;
    while (is >> v) values.push_back(v);
    return Eigen::Map<Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace

void save_gp_model(const std::filesystem::path& file, const GPModel& model) {
    model.validate();
    std::filesystem::path weights = file;
    weights += ".weights";
    {
        std::ofstream os(file);
        if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
        os << std::setprecision(17);
        os << "[gp]\nformat = ronchi-gp\nversion = 1\n";
        os << "latent_dim = " << model.latent_dim << "\nstate_dim = " << model.state_dim() << "\n";
        os << "signal_variance = " << model.kernel.signal_variance << "\n";
        os << "lengthscales = " << join(model.kernel.lengthscales) << "\n";
        os << "noise_variance = " << join(model.kernel.noise_variance) << "\n";
        os << "[prior_mean]\nknots_per_axis = " << model.mean.basis.knots_per_axis()
           << "\nextent = " << model.mean.basis.extent() << "\nbasis_size = " << model.mean.basis.size()
           << "\nweights_file = " << weights.filename().string() << "\n";
        if (!os) throw IoError("write failed for '" + file.string() + "'");
    }
    std::ofstream ws(weights, std::ios::binary);
    if (!ws) throw IoError("cannot open '" + weights.string() + "' for writing");
    ws.write(kWeightMagic, 4);
    io::put_u32(ws, 1);
    io::put_u32(ws, static_cast<std::uint32_t>(model.mean.weights.rows()));
    io::put_u32(ws, static_cast<std::uint32_t>(model.mean.weights.cols()));
    for (Eigen::Index r = 0; r < model.mean.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < model.mean.weights.cols(); ++c) io::put_f64(ws, model.mean.weights(r, c));
    if (!ws) throw IoError("write failed for '" + weights.string() + "'");
}

GPModel load_gp_model(const std::filesystem::path& file) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(file.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw IoError("cannot parse GP manifest '" + file.string() + "': " + e.what());
    }
    GPModel model;
    try {
        model.latent_dim = tree.get<int>("gp.latent_dim");
        const int n = tree.get<int>("gp.state_dim");
        model.kernel.signal_variance = tree.get<double>("gp.signal_variance");
        model.kernel.lengthscales = split(tree.get<std::string>("gp.lengthscales"));
        model.kernel.noise_variance = split(tree.get<std::string>("gp.noise_variance"));
        const int knots = tree.get<int>("prior_mean.knots_per_axis");
        const double extent = tree.get<double>("prior_mean.extent");
        model.mean.basis = HatBasis(n, knots, extent);
        const auto weights = file.parent_path() / tree.get<std::string>("prior_mean.weights_file");

        std::ifstream ws(weights, std::ios::binary);
        if (!ws) throw IoError("cannot open '" + weights.string() + "'");
        char magic[4];
        ws.read(magic, 4);
        if (!ws || !std::equal(magic, magic + 4, kWeightMagic))
            throw IoError("GP weight block: bad magic bytes");
        if (io::get_u32(ws) != 1) throw IoError("GP weight block: unsupported version");
        const auto rows = io::get_u32(ws);
        const auto cols = io::get_u32(ws);
        if (static_cast<int>(rows) != model.latent_dim || static_cast<int>(cols) != model.mean.basis.size())
            throw IoError("GP weight block: shape does not match manifest");
        model.mean.weights.resize(rows, cols);
        for (Eigen::Index r = 0; r < model.mean.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < model.mean.weights.cols(); ++c) model.mean.weights(r, c) = io::get_f64(ws);
    } catch (const pt::ptree_error& e) {
        throw IoError("GP manifest '" + file.string() + "' is missing keys: " + e.what());
    }
    model.validate();
    return model;
}

} // namespace ronchi
