#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ronchi/em.hpp"
#include "ronchi/optics.hpp"
#include "ronchi/preprocess.hpp"
#include "ronchi/testbed.hpp"

namespace ronchi {

/// Produces one latent observation z for the column's current aberration state.
class LatentSource {
public:
    virtual ~LatentSource() = default;
    virtual int latent_dim() const = 0;
    virtual Vec observe(const Vec& state, Rng& rng) = 0;
};

/// Latents drawn directly from a synthetic even map (no images).
class TestbedSource : public LatentSource {
public:
    explicit TestbedSource(SyntheticMap map) : map_(std::move(map)) {}
    int latent_dim() const override { return map_.latent_dim(); }
    Vec observe(const Vec& state, Rng& rng) override { return sample_latent(map_, state, rng); }

private:
    SyntheticMap map_;
};

using SpectrumEncoder = std::function<Vec(const PowerSpectrum&)>;

/// simulate -> (Poisson) -> preprocess -> encode.
class ImageSource : public LatentSource {
public:
    ImageSource(SimConfig sim, SpectrumEncoder encoder, int latent_dim,
                PreprocessOptions preprocess = {}, bool poisson = true);
    int latent_dim() const override { return latent_dim_; }
    Vec observe(const Vec& state, Rng& rng) override;

private:
    SimConfig sim_;
    SpectrumEncoder encoder_;
    int latent_dim_;
    PreprocessOptions preprocess_;
    bool poisson_;
};

enum class Method { full_em, hard_em, fixed_prior };
std::string to_string(Method method);
Method parse_method(const std::string& name);

struct CalibrationConfig {
    EMConfig em;
    Method method = Method::full_em;
    bool select_inputs = true;  // false forces u = 0
    bool refine = true;
    bool stop_on_convergence = true;
    std::uint64_t seed = 1;
};

struct TraceStep {
    int step = 0;
    Vec estimate;
    double error = 0.0;  // ||estimate - x0||
    double elbo = 0.0;
    Vec input;           // applied after this observation (zero on the last step)
    double max_weight = 0.0;
    int m_step_factorizations = 0;
};

struct CalibrationTrace {
    Method method = Method::full_em;
    Vec true_x0;
    std::vector<TraceStep> steps;  // one per acquired observation
    CandidateSet final_candidates;  // weights from the last E-step
    LatentDataset data;
    bool converged = false;
};

// Acquire -> preprocess/encode (inside the source) -> EM -> estimate -> select input
// -> refine, for at most horizon + 1 observations. Component errors are rethrown
// with the step index prepended.
CalibrationTrace run_calibration(LatentSource& source, const GPModel& model, const Vec& true_x0,
                                 const CalibrationConfig& config);

// Same loop with the M-step disabled: f is taken to be the prior mean.
CalibrationTrace baseline_fixed_prior(LatentSource& source, const GPModel& model,
                                      const Vec& true_x0, CalibrationConfig config);

// step, xhat_0..xhat_{n-1}, error, elbo, u_0..u_{n-1}
void write_trace_csv(const std::filesystem::path& file, const CalibrationTrace& trace);

} // namespace ronchi
