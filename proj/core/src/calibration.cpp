#include "ronchi/calibration.hpp"

#include <fstream>
#include <iomanip>

#include "ronchi/errors.hpp"

namespace ronchi {

ImageSource::ImageSource(SimConfig sim, SpectrumEncoder encoder, int latent_dim,
                         PreprocessOptions preprocess, bool poisson)
    : sim_(sim), encoder_(std::move(encoder)), latent_dim_(latent_dim), preprocess_(preprocess),
      poisson_(poisson) {
    sim_.validate();
    if (!encoder_) throw ConfigError("ImageSource: no encoder");
    if (latent_dim < 1) throw ConfigError("ImageSource: latent_dim must be >= 1");
}

Vec ImageSource::observe(const Vec& state, Rng& rng) {
    const RealGrid g = expected_image(AberrationState(state), sim_);
    const std::uint64_t seed = rng();
    const PowerSpectrum spec = poisson_ ? preprocess(sample_ronchigram(g, seed), preprocess_)
                                        : preprocess(g, preprocess_);
    Vec z = encoder_(spec);
    if (z.size() != latent_dim_) throw ShapeError("ImageSource: encoder returned wrong latent size");
    return z;
}

std::string to_string(Method method) {
    switch (method) {
    case Method::full_em: return "full_em";
    case Method::hard_em: return "hard_em";
    case Method::fixed_prior: return "fixed_prior";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "full_em" || name == "full") return Method::full_em;
    if (name == "hard_em" || name == "hard") return Method::hard_em;
    if (name == "fixed_prior" || name == "baseline") return Method::fixed_prior;
    throw ConfigError("unknown method '" + name + "'");
}

namespace {

EMResult iterate(Method method, const GPModel& model, const LatentDataset& data,
                 const CandidateSet& candidates, const EMConfig& em) {
    switch (method) {
    case Method::full_em: return em_iterate(model, data, candidates, em);
    case Method::hard_em: return hard_em_iterate(model, data, candidates, em);
    case Method::fixed_prior: return fixed_prior_iterate(model, data, candidates, em);
    }
    throw ConfigError("unknown method");
}

Vec report_estimate(Method method, const EMResult& r, const EMConfig& em) {
    if (method == Method::hard_em) return r.candidates.states.col(r.map_index);
    return point_estimate(r.candidates, em.mirror_mass_threshold);
}

} // namespace

CalibrationTrace run_calibration(LatentSource& source, const GPModel& model, const Vec& true_x0,
                                 const CalibrationConfig& config) {
    config.em.validate();
    model.validate();
    const int n = model.state_dim();
    if (true_x0.size() != n) throw ShapeError("run_calibration: state dimension mismatch");
    if (source.latent_dim() != model.latent_dim)
        throw ShapeError("run_calibration: source and model latent dimensions differ");

    Rng rng(derive_seed(config.seed, 0));
    Rng obs_rng(derive_seed(config.seed, 1));

    CalibrationTrace trace;
    trace.method = config.method;
    trace.true_x0 = true_x0;
    trace.data.z.resize(model.latent_dim, 0);
    trace.data.cumulative.resize(n, 0);

    Trajectory traj(n);
    CandidateSet candidates = uniform_candidates(n, config.em.candidate_count, config.em.state_box, rng);
    int calm_steps = 0;

    for (int t = 0; t <= config.em.horizon; ++t) {
        try {
            const Vec s = traj.current();
            const Vec z = source.observe(true_x0 + s, obs_rng);
            if (!z.allFinite()) throw NumericError("non-finite latent observation");
            auto& d = trace.data;
            d.z.conservativeResize(Eigen::NoChange, d.z.cols() + 1);
            d.z.col(d.z.cols() - 1) = z;
            d.cumulative.conservativeResize(Eigen::NoChange, d.cumulative.cols() + 1);
            d.cumulative.col(d.cumulative.cols() - 1) = s;

            EMResult r;
            for (int k = 0; k < config.em.em_iterations; ++k) {
                r = iterate(config.method, model, d, candidates, config.em);
                candidates = r.candidates;
            }
            TraceStep step;
            step.step = t;
            step.estimate = report_estimate(config.method, r, config.em);
            step.error = (step.estimate - true_x0).norm();
            step.elbo = r.elbo;
            step.max_weight = r.candidates.weights.maxCoeff();
            step.m_step_factorizations = r.m_step_factorizations;
            step.input = Vec::Zero(n);

            if (!trace.steps.empty()) {
                const double change = (step.estimate - trace.steps.back().estimate).norm();
                calm_steps = change < config.em.convergence_threshold ? calm_steps + 1 : 0;
            }
            trace.final_candidates = r.candidates;
            const bool last = t == config.em.horizon;
            if (calm_steps >= config.em.convergence_patience) trace.converged = true;
            const bool stop = last || (trace.converged && config.stop_on_convergence);

            if (!stop) {
                if (config.select_inputs) {
                    const auto& map_post = r.posterior.components() == 1
                                               ? r.posterior.component(0)
                                               : r.posterior.component(r.map_index);
                    step.input = select_input(map_post, s, config.em, rng);
                }
                traj.apply(step.input);
                if (config.refine) candidates = refine_candidates(r.candidates, config.em, rng);
            }
            trace.steps.push_back(std::move(step));
            if (stop) break;
        } catch (const ConfigError& e) {
            throw ConfigError("calibration step " + std::to_string(t) + ": " + e.what());
        } catch (const IoError& e) {
            throw IoError("calibration step " + std::to_string(t) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("calibration step " + std::to_string(t) + ": " + e.what());
        }
    }
    return trace;
}

CalibrationTrace baseline_fixed_prior(LatentSource& source, const GPModel& model,
                                      const Vec& true_x0, CalibrationConfig config) {
    config.method = Method::fixed_prior;
    return run_calibration(source, model, true_x0, config);
}

void write_trace_csv(const std::filesystem::path& file, const CalibrationTrace& trace) {
    std::ofstream os(file);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    const auto n = trace.true_x0.size();
    os << "step";
    for (Eigen::Index d = 0; d < n; ++d) os << ",xhat_" << d;
    os << ",error,elbo";
    for (Eigen::Index d = 0; d < n; ++d) os << ",u_" << d;
    os << "\n" << std::setprecision(10);
    for (const auto& s : trace.steps) {
        os << s.step;
        for (Eigen::Index d = 0; d < n; ++d) os << "," << s.estimate[d];
        os << "," << s.error << "," << s.elbo;
        for (Eigen::Index d = 0; d < n; ++d) os << "," << s.input[d];
        os << "\n";
    }
    if (!os) throw IoError("write failed for '" + file.string() + "'");
}

} // namespace ronchi
