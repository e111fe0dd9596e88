#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ronchi/preprocess.hpp"
#include "ronchi/types.hpp"

namespace ronchi {

struct DenseLayer {
    Mat weight;  // out x in
    Vec bias;    // out
};

/// Fully connected net with LeakyReLU between layers and a linear output layer.
struct Mlp {
    std::vector<DenseLayer> layers;

    Eigen::Index input_dim() const { return layers.front().weight.cols(); }
    Eigen::Index output_dim() const { return layers.back().weight.rows(); }
    Eigen::Index parameter_count() const;
};

inline constexpr double kLeakySlope = 0.01;

struct TrainConfig {
    double learning_rate = 2e-4;
    double momentum = 0.9;
    int batch_size = 32;
    int epochs = 20;
    std::uint64_t seed = 1;
    double grad_clip = 1e3;  // max L2 norm of one batch gradient; <= 0 disables
};

/// Desk-scale VAE: spectra are average-pooled, standardized per feature, then
/// encoded to (mu, log sigma^2) in R^latent_dim. Decoder variance is fixed.
struct VAEParams {
    int input_side = 0;   // spectrum edge length the encoder accepts
    int pool = 1;         // average-pooling factor; features = (input_side / pool)^2
    int latent_dim = 0;
    double decoder_logvar = 0.0;  // log sigma_beta^2 (fixed)
    Vec feature_mean;
    Vec feature_scale;
    Mlp encoder;  // features -> 2 * latent_dim
    Mlp decoder;  // latent_dim -> features
    TrainConfig train;

    Eigen::Index feature_dim() const { return encoder.input_dim(); }
};

struct EncoderOutput {
    Vec mu;
    Vec logvar;
};

// Random (seeded) initialization. hidden lists encoder hidden widths; the decoder
// mirrors them. feature_mean/scale default to 0/1.
VAEParams make_vae(int input_side, int pool, int latent_dim, const std::vector<int>& hidden,
                   std::uint64_t seed);
// Same, for an arbitrary flat feature dimension (input_side/pool unused).
VAEParams make_vae_features(int feature_dim, int latent_dim, const std::vector<int>& hidden,
                            std::uint64_t seed);

// Average-pool + standardize. Throws ShapeError on side mismatch.
Vec featurize(const VAEParams& params, const PowerSpectrum& spectrum);
Vec pool_spectrum(const PowerSpectrum& spectrum, int pool);

EncoderOutput encode(const VAEParams& params, const PowerSpectrum& spectrum);
EncoderOutput encode_features(const VAEParams& params, const Vec& features);

// Decoder mean in standardized feature units.
Vec decode(const VAEParams& params, const Vec& z);

struct ElboTerms {
    double elbo = 0.0;            // mean over the batch
    double reconstruction = 0.0;  // mean E_q[log p(y|z)] (one sample)
    double kl = 0.0;              // mean KL(q || N(0, I))
};

// KL(N(mu, diag exp(logvar)) || N(0, I)) in closed form.
double kl_standard_normal(const Vec& mu, const Vec& logvar);

// ELBO of a feature batch (columns are samples) with explicit reparameterization
// noise eps (latent_dim x batch).
ElboTerms elbo(const VAEParams& params, const Mat& batch, const Mat& eps);
ElboTerms elbo(const VAEParams& params, const Mat& batch, Rng& rng);

// Exact gradient of elbo(params, batch, eps) w.r.t. flatten(params).
Vec elbo_gradient(const VAEParams& params, const Mat& batch, const Mat& eps);
Vec elbo_gradient(const VAEParams& params, const Mat& batch, Rng& rng);

// Trainable parameters (encoder then decoder; per layer weight row-major then bias).
Vec flatten(const VAEParams& params);
void unflatten(VAEParams& params, const Vec& flat);

// Draws the eps matrix exactly as the Rng overloads do.
Mat draw_noise(Eigen::Index latent_dim, Eigen::Index batch, Rng& rng);

struct TrainingLog {
    std::vector<double> epoch_elbo;  // mean batch ELBO per epoch
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

struct TrainedVae {
    VAEParams params;
    TrainingLog log;
};

// Fits feature standardization on the dataset, then runs fixed-epoch minibatch
// gradient ascent with momentum. Requires >= 200 spectra.
TrainedVae train_vae(const std::vector<PowerSpectrum>& dataset, int latent_dim, int pool,
                     const std::vector<int>& hidden, const TrainConfig& config);
// Feature-level variant (no standardization fitted; dataset columns are samples).
TrainingLog train_vae_features(VAEParams& params, const Mat& dataset, const TrainConfig& config,
                               std::size_t min_samples = 1);

// Versioned binary container ("RVAE", v1, little-endian f64) plus <file>.manifest.
void save_vae(const std::filesystem::path& file, const VAEParams& params,
              const TrainingLog* log = nullptr);
VAEParams load_vae(const std::filesystem::path& file);

} // namespace ronchi
