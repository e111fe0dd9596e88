#include "ronchi/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>

#include "ronchi/errors.hpp"
#include "ronchi/grid_io.hpp"

namespace ronchi {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

struct ForwardCache {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<Mat> pre;     // pre-activation of each layer
    Mat output;
};

Mat leaky(const Mat& z) {
    return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Mat leaky_grad(const Mat& z) {
    return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

ForwardCache forward(const Mlp& net, const Mat& x) {
    ForwardCache cache;
    Mat a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        Mat z = layer.weight * a;
        z.colwise() += layer.bias;
        cache.inputs.push_back(std::move(a));
        a = (l + 1 < net.layers.size()) ? leaky(z) : z;
        cache.pre.push_back(std::move(z));
    }
    cache.output = std::move(a);
    return cache;
}

Mat apply(const Mlp& net, const Mat& x) { return forward(net, x).output; }

// Accumulates parameter gradients into grads (same shape as net) and returns d/d input.
Mat backward(const Mlp& net, const ForwardCache& cache, Mat d_out, Mlp& grads) {
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        Mat dz = std::move(d_out);
        if (l + 1 < net.layers.size()) dz = dz.cwiseProduct(leaky_grad(cache.pre[l]));
        grads.layers[l].weight += dz * cache.inputs[l].transpose();
        grads.layers[l].bias += dz.rowwise().sum();
        d_out = net.layers[l].weight.transpose() * dz;
    }
    return d_out;
}

Mlp zeros_like(const Mlp& net) {
    Mlp z;
    for (const auto& layer : net.layers)
        z.layers.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()),
                            Vec::Zero(layer.bias.size())});
    return z;
}

Mlp make_mlp(const std::vector<int>& widths, Rng& rng) {
    Mlp net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l];
        const int out = widths[l + 1];
        // He-uniform for LeakyReLU layers.
        const double bound = std::sqrt(6.0 / in);
        std::uniform_real_distribution<double> uni(-bound, bound);
        DenseLayer layer{Mat(out, in), Vec::Zero(out)};
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) layer.weight(r, c) = uni(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void append_flat(const Mlp& net, std::vector<double>& out) {
    for (const auto& layer : net.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out.push_back(layer.weight(r, c));
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out.push_back(layer.bias[i]);
    }
}

Eigen::Index read_flat(Mlp& net, const Vec& flat, Eigen::Index pos) {
    for (auto& layer : net.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[pos++];
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = flat[pos++];
    }
    return pos;
}

void check_batch(const VAEParams& params, const Mat& batch, const Mat& eps) {
    if (batch.cols() == 0) throw ConfigError("elbo: empty batch");
    if (batch.rows() != params.feature_dim())
        throw ShapeError("elbo: batch feature dimension does not match the network");
    if (eps.rows() != params.latent_dim || eps.cols() != batch.cols())
        throw ShapeError("elbo: noise matrix must be latent_dim x batch");
}

struct ElboPass {
    ForwardCache enc;
    ForwardCache dec;
    Mat mu, logvar, sigma;
    ElboTerms terms;
};

ElboPass elbo_pass(const VAEParams& params, const Mat& batch, const Mat& eps) {
    check_batch(params, batch, eps);
    const Eigen::Index l = params.latent_dim;
    const double n = static_cast<double>(batch.cols());
    const double p = static_cast<double>(batch.rows());
    const double var = std::exp(params.decoder_logvar);

    ElboPass pass;
    pass.enc = forward(params.encoder, batch);
    pass.mu = pass.enc.output.topRows(l);
    pass.logvar = pass.enc.output.bottomRows(l);
    pass.sigma = (0.5 * pass.logvar.array()).exp().matrix();
    const Mat z = pass.mu + pass.sigma.cwiseProduct(eps);
    pass.dec = forward(params.decoder, z);

    const double sq = (batch - pass.dec.output).squaredNorm();
    const double rec = -0.5 * sq / var / n -
                       0.5 * p * (std::log(2.0 * std::numbers::pi) + params.decoder_logvar);
    const double kl = 0.5 *
                      (pass.mu.array().square() + pass.logvar.array().exp() - pass.logvar.array() - 1.0)
                          .sum() /
                      n;
    pass.terms = {rec - kl, rec, kl};
    return pass;
}

} // namespace

Eigen::Index Mlp::parameter_count() const {
    Eigen::Index count = 0;
    for (const auto& layer : layers) count += layer.weight.size() + layer.bias.size();
    return count;
}

VAEParams make_vae_features(int feature_dim, int latent_dim, const std::vector<int>& hidden,
                            std::uint64_t seed) {
    if (feature_dim < 1 || latent_dim < 1) throw ConfigError("make_vae: dimensions must be >= 1");
    Rng rng(seed);
    VAEParams params;
    params.latent_dim = latent_dim;
    std::vector<int> enc{feature_dim};
    enc.insert(enc.end(), hidden.begin(), hidden.end());
    enc.push_back(2 * latent_dim);
    std::vector<int> dec{latent_dim};
    dec.insert(dec.end(), hidden.rbegin(), hidden.rend());
    dec.push_back(feature_dim);
    params.encoder = make_mlp(enc, rng);
    params.decoder = make_mlp(dec, rng);
    params.feature_mean = Vec::Zero(feature_dim);
    params.feature_scale = Vec::Ones(feature_dim);
    return params;
}

VAEParams make_vae(int input_side, int pool, int latent_dim, const std::vector<int>& hidden,
                   std::uint64_t seed) {
    if (pool < 1 || input_side < pool || input_side % pool != 0)
        throw ConfigError("make_vae: input side must be a positive multiple of the pool factor");
    const int pooled = input_side / pool;
    VAEParams params = make_vae_features(pooled * pooled, latent_dim, hidden, seed);
    params.input_side = input_side;
    params.pool = pool;
    return params;
}

Vec pool_spectrum(const PowerSpectrum& spectrum, int pool) {
    const int side = spectrum.side;
    if (pool < 1 || side % pool != 0) throw ShapeError("pool_spectrum: side not divisible by pool");
    const int out_side = side / pool;
    Vec out = Vec::Zero(static_cast<Eigen::Index>(out_side) * out_side);
    const double norm = 1.0 / (pool * pool);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            out[(r / pool) * out_side + c / pool] += spectrum.at(r, c) * norm;
    return out;
}

Vec featurize(const VAEParams& params, const PowerSpectrum& spectrum) {
    if (spectrum.side != params.input_side)
        throw ShapeError("encode: spectrum side " + std::to_string(spectrum.side) +
                         " does not match encoder side " + std::to_string(params.input_side));
    Vec f = pool_spectrum(spectrum, params.pool);
    return (f - params.feature_mean).cwiseQuotient(params.feature_scale);
}

EncoderOutput encode_features(const VAEParams& params, const Vec& features) {
    if (features.size() != params.feature_dim())
        throw ShapeError("encode: feature dimension does not match the network");
    const Mat out = apply(params.encoder, features);
    return {out.col(0).head(params.latent_dim), out.col(0).tail(params.latent_dim)};
}

EncoderOutput encode(const VAEParams& params, const PowerSpectrum& spectrum) {
    return encode_features(params, featurize(params, spectrum));
}

Vec decode(const VAEParams& params, const Vec& z) {
    if (z.size() != params.latent_dim) throw ShapeError("decode: latent dimension mismatch");
    if (!z.allFinite()) throw NumericError("decode: non-finite latent vector");
    return apply(params.decoder, z).col(0);
}

double kl_standard_normal(const Vec& mu, const Vec& logvar) {
    return 0.5 * (mu.array().square() + logvar.array().exp() - logvar.array() - 1.0).sum();
}

Mat draw_noise(Eigen::Index latent_dim, Eigen::Index batch, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat eps(latent_dim, batch);
    for (Eigen::Index b = 0; b < batch; ++b)
        for (Eigen::Index d = 0; d < latent_dim; ++d) eps(d, b) = normal(rng);
    return eps;
}

ElboTerms elbo(const VAEParams& params, const Mat& batch, const Mat& eps) {
    return elbo_pass(params, batch, eps).terms;
}

ElboTerms elbo(const VAEParams& params, const Mat& batch, Rng& rng) {
    return elbo(params, batch, draw_noise(params.latent_dim, batch.cols(), rng));
}

Vec elbo_gradient(const VAEParams& params, const Mat& batch, const Mat& eps) {
    const ElboPass pass = elbo_pass(params, batch, eps);
    const double n = static_cast<double>(batch.cols());
    const double var = std::exp(params.decoder_logvar);

    Mlp g_enc = zeros_like(params.encoder);
    Mlp g_dec = zeros_like(params.decoder);

    const Mat d_out = (batch - pass.dec.output) / (var * n);
    const Mat d_z = backward(params.decoder, pass.dec, d_out, g_dec);

    const Eigen::Index l = params.latent_dim;
    Mat d_enc(2 * l, batch.cols());
    d_enc.topRows(l) = d_z - pass.mu / n;
    d_enc.bottomRows(l) = 0.5 * d_z.cwiseProduct(eps).cwiseProduct(pass.sigma) -
                          0.5 * (pass.logvar.array().exp() - 1.0).matrix() / n;
    backward(params.encoder, pass.enc, d_enc, g_enc);

    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(params.encoder.parameter_count() +
                                          params.decoder.parameter_count()));
    append_flat(g_enc, flat);
    append_flat(g_dec, flat);
    return Eigen::Map<Vec>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

Vec elbo_gradient(const VAEParams& params, const Mat& batch, Rng& rng) {
    return elbo_gradient(params, batch, draw_noise(params.latent_dim, batch.cols(), rng));
}

Vec flatten(const VAEParams& params) {
    std::vector<double> flat;
    append_flat(params.encoder, flat);
    append_flat(params.decoder, flat);
    return Eigen::Map<Vec>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void unflatten(VAEParams& params, const Vec& flat) {
    const Eigen::Index expected = params.encoder.parameter_count() + params.decoder.parameter_count();
    if (flat.size() != expected) throw ShapeError("unflatten: parameter count mismatch");
    const Eigen::Index pos = read_flat(params.encoder, flat, 0);
    read_flat(params.decoder, flat, pos);
}

TrainingLog train_vae_features(VAEParams& params, const Mat& dataset, const TrainConfig& config,
                               std::size_t min_samples) {
    if (static_cast<std::size_t>(dataset.cols()) < min_samples)
        throw ConfigError("train_vae: dataset needs at least " + std::to_string(min_samples) +
                          " samples");
    if (config.batch_size < 1 || config.epochs < 1)
        throw ConfigError("train_vae: batch_size and epochs must be >= 1");
    params.train = config;

    Rng rng(config.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(dataset.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    Vec theta = flatten(params);
    Vec velocity = Vec::Zero(theta.size());
    TrainingLog log;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            Mat batch(dataset.rows(), static_cast<Eigen::Index>(stop - start));
            for (std::size_t j = start; j < stop; ++j)
                batch.col(static_cast<Eigen::Index>(j - start)) = dataset.col(order[j]);

            const Mat eps = draw_noise(params.latent_dim, batch.cols(), rng);
            const double value = elbo(params, batch, eps).elbo;
            Vec grad = elbo_gradient(params, batch, eps);
            if (!std::isfinite(value) || !grad.allFinite())
                throw TrainingError("train_vae: non-finite ELBO at epoch " + std::to_string(epoch),
                                    epoch);
            const double norm = grad.norm();
            if (config.grad_clip > 0.0 && norm > config.grad_clip) grad *= config.grad_clip / norm;

            velocity = config.momentum * velocity + config.learning_rate * grad;
            theta += velocity;
            unflatten(params, theta);
            sum += value;
            ++batches;
        }
        const double mean = sum / batches;
        if (!std::isfinite(mean))
            throw TrainingError("train_vae: non-finite ELBO at epoch " + std::to_string(epoch), epoch);
        log.epoch_elbo.push_back(mean);
    }
    return log;
}

TrainedVae train_vae(const std::vector<PowerSpectrum>& dataset, int latent_dim, int pool,
                     const std::vector<int>& hidden, const TrainConfig& config) {
    constexpr std::size_t kMinSamples = 200;
    if (dataset.size() < kMinSamples)
        throw ConfigError("train_vae: dataset needs at least 200 spectra");
    const int side = dataset.front().side;
    for (const auto& s : dataset)
        if (s.side != side) throw ShapeError("train_vae: spectra differ in side length");

    TrainedVae out;
    out.params = make_vae(side, pool, latent_dim, hidden, config.seed);

    Mat features(out.params.feature_dim(), static_cast<Eigen::Index>(dataset.size()));
    for (std::size_t i = 0; i < dataset.size(); ++i)
        features.col(static_cast<Eigen::Index>(i)) = pool_spectrum(dataset[i], pool);
    const Vec mean = features.rowwise().mean();
    const Mat centered = features.colwise() - mean;
    Vec scale = (centered.array().square().rowwise().sum() / features.cols()).sqrt().matrix();
    for (auto& s : scale) s = std::max(s, 1e-6);
    out.params.feature_mean = mean;
    out.params.feature_scale = scale;
    const Mat standardized = centered.array().colwise() / scale.array();

    out.log = train_vae_features(out.params, standardized, config, kMinSamples);
    return out;
}

namespace {

void write_mlp(std::ostream& os, const Mlp& net) {
    io::put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        io::put_u32(os, static_cast<std::uint32_t>(layer.weight.rows()));
        io::put_u32(os, static_cast<std::uint32_t>(layer.weight.cols()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) io::put_f64(os, layer.weight(r, c));
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) io::put_f64(os, layer.bias[i]);
    }
}

Mlp read_mlp(std::istream& is) {
    Mlp net;
    const std::uint32_t count = io::get_u32(is);
    if (count == 0 || count > 64) throw IoError("load_vae: implausible layer count");
    for (std::uint32_t l = 0; l < count; ++l) {
        const auto rows = io::get_u32(is);
        const auto cols = io::get_u32(is);
        if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
            throw IoError("load_vae: implausible layer shape");
        DenseLayer layer{Mat(rows, cols), Vec(rows)};
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = io::get_f64(is);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = io::get_f64(is);
        if (!net.layers.empty() && net.layers.back().weight.rows() != layer.weight.cols())
            throw IoError("load_vae: inconsistent layer shapes");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

} // namespace

void save_vae(const std::filesystem::path& file, const VAEParams& params, const TrainingLog* log) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    os.write(kMagic, 4);
    io::put_u32(os, kVersion);
    io::put_u32(os, static_cast<std::uint32_t>(params.input_side));
    io::put_u32(os, static_cast<std::uint32_t>(params.pool));
    io::put_u32(os, static_cast<std::uint32_t>(params.latent_dim));
    io::put_f64(os, params.decoder_logvar);
    io::put_u32(os, static_cast<std::uint32_t>(params.feature_mean.size()));
    for (double v : params.feature_mean) io::put_f64(os, v);
    for (double v : params.feature_scale) io::put_f64(os, v);
    write_mlp(os, params.encoder);
    write_mlp(os, params.decoder);
    if (!os) throw IoError("write failed for '" + file.string() + "'");

    std::filesystem::path manifest = file;
    manifest += ".manifest";
    std::ofstream ms(manifest);
    if (!ms) throw IoError("cannot open '" + manifest.string() + "' for writing");
    ms << std::setprecision(17);
    ms << "format = RVAE\nversion = " << kVersion << "\n";
    ms << "input_side = " << params.input_side << "\npool = " << params.pool
       << "\nlatent_dim = " << params.latent_dim << "\ndecoder_logvar = " << params.decoder_logvar
       << "\nfeature_dim = " << params.feature_mean.size() << "\n";
    ms << "encoder_layers =";
    for (const auto& layer : params.encoder.layers) ms << ' ' << layer.weight.cols() << 'x' << layer.weight.rows();
    ms << "\ndecoder_layers =";
    for (const auto& layer : params.decoder.layers) ms << ' ' << layer.weight.cols() << 'x' << layer.weight.rows();
    ms << "\nlearning_rate = " << params.train.learning_rate << "\nmomentum = " << params.train.momentum
       << "\nbatch_size = " << params.train.batch_size << "\nepochs = " << params.train.epochs
       << "\nseed = " << params.train.seed << "\n";
    if (log != nullptr && !log->epoch_elbo.empty())
        ms << "final_elbo = " << log->epoch_elbo.back() << "\n";
}

VAEParams load_vae(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot open '" + file.string() + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || !std::equal(magic, magic + 4, kMagic)) throw IoError("load_vae: bad magic bytes");
    if (io::get_u32(is) != kVersion) throw IoError("load_vae: unsupported container version");
    VAEParams params;
    params.input_side = static_cast<int>(io::get_u32(is));
    params.pool = static_cast<int>(io::get_u32(is));
    params.latent_dim = static_cast<int>(io::get_u32(is));
    params.decoder_logvar = io::get_f64(is);
    const auto features = io::get_u32(is);
    if (features == 0 || features > (1u << 24)) throw IoError("load_vae: implausible feature count");
    params.feature_mean.resize(features);
    params.feature_scale.resize(features);
    for (auto& v : params.feature_mean) v = io::get_f64(is);
    for (auto& v : params.feature_scale) v = io::get_f64(is);
    params.encoder = read_mlp(is);
    params.decoder = read_mlp(is);
    if (params.encoder.input_dim() != features || params.decoder.output_dim() != features ||
        params.encoder.output_dim() != 2 * params.latent_dim ||
        params.decoder.input_dim() != params.latent_dim)
        throw IoError("load_vae: network shapes inconsistent with header");
    return params;
}

} // namespace ronchi
