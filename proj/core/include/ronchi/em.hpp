#pragma once

#include <memory>
#include <vector>

#include "ronchi/gp.hpp"
#include "ronchi/types.hpp"

namespace ronchi {

/// Applied inputs u(t) and their prefix sums s(t), s(0) = 0.
class Trajectory {
public:
    explicit Trajectory(int state_dim);

    void apply(const Vec& u);  // s(T+1) = s(T) + u
    int state_dim() const { return static_cast<int>(cumulative_.rows()); }
    int steps() const { return static_cast<int>(inputs_.size()); }
    const std::vector<Vec>& inputs() const { return inputs_; }
    const Mat& cumulative() const { return cumulative_; }  // n x (steps + 1)
    Vec current() const { return cumulative_.col(cumulative_.cols() - 1); }

private:
    std::vector<Vec> inputs_;
    Mat cumulative_;
};

/// Candidate initial states (columns) with simplex weights.
struct CandidateSet {
    Mat states;  // n x N
    Vec weights;

    Eigen::Index size() const { return states.cols(); }
    int state_dim() const { return static_cast<int>(states.rows()); }
    void validate() const;  // N >= 1, weights >= 0, sum within 1e-12 of 1
    // Highest weight; ties go to the lowest index.
    Eigen::Index map_index() const;
};

struct EMConfig {
    // refinement
    double keep_fraction = 0.3;
    double perturb_fraction = 0.5;
    double uniform_fraction = 0.2;
    double sigma = 10.0;  // nm
    // Perturbed children cycle through these multiples of sigma.
    std::vector<double> perturb_scales{1.0, 0.2, 0.04};
    double state_box = 200.0;  // candidates / states live in [-box, box]^n
    int candidate_count = 128;

    // input selection
    double input_bound = 100.0;  // U = [-bound, bound]^n
    int input_samples = 256;

    // loop control
    int em_iterations = 1;
    int horizon = 30;
    double convergence_threshold = 2.0;  // nm
    int convergence_patience = 3;
    // Weighted-mean estimate falls back to the MAP candidate when more than this
    // much weight sits in the half-space opposite the MAP candidate.
    double mirror_mass_threshold = 0.05;

    void validate() const;
};

// N candidates uniform over [-box, box]^n, generated as mirror pairs (x, -x) so a
// freshly drawn set is symmetric; weights uniform.
CandidateSet uniform_candidates(int state_dim, int count, double box, Rng& rng);

// log p(Z | x0) when f is taken to equal the prior mean (no GP update).
double fixed_prior_log_likelihood(const GPModel& model, const LatentDataset& data, const Vec& x0);

// Posterior weights from per-candidate log likelihoods (log-sum-exp, uniform
// prior). Throws DegenerateWeights if no likelihood is finite.
Vec posterior_weights(const Vec& log_likelihoods);

// Sum_i w_i log p_i - KL(w || uniform). Equals the log evidence when w are the
// posterior weights.
double elbo_value(const Vec& weights, const Vec& log_likelihoods);

CandidateSet e_step(const GPModel& model, const LatentDataset& data, const CandidateSet& candidates);

/// mu_{f|Z}(x) = sum_i w_i mu^{(i)}_{f|Z}(x).
class MixturePosterior {
public:
    void add(std::shared_ptr<const CandidatePosterior> posterior, double weight);

    Vec mean(const Vec& x) const;
    Eigen::Index components() const { return static_cast<Eigen::Index>(parts_.size()); }
    const CandidatePosterior& component(Eigen::Index i) const { return *parts_[i]; }
    double weight(Eigen::Index i) const { return weights_[i]; }
    // Gram factorizations performed to build this posterior (one per component).
    int factorizations() const { return static_cast<int>(parts_.size()); }

private:
    std::vector<std::shared_ptr<const CandidatePosterior>> parts_;
    std::vector<double> weights_;
};

MixturePosterior m_step(const GPModel& model, const LatentDataset& data,
                        const CandidateSet& candidates);

struct EMResult {
    CandidateSet candidates;
    MixturePosterior posterior;
    Vec log_likelihoods;
    double elbo = 0.0;
    Eigen::Index map_index = 0;
    int likelihood_evaluations = 0;  // E-step
    int m_step_factorizations = 0;
};

enum class Likelihood { gp_marginal, fixed_prior };

// One E-step + one M-step. The M-step reuses the E-step's per-candidate factors.
EMResult em_iterate(const GPModel& model, const LatentDataset& data, const CandidateSet& candidates,
                    const EMConfig& config);
// Point-mass weights at i*, single-GP M-step.
EMResult hard_em_iterate(const GPModel& model, const LatentDataset& data,
                         const CandidateSet& candidates, const EMConfig& config);
// E-step with the fixed-prior likelihood; the posterior is the prior-mean GP of the
// MAP candidate (used only for input selection).
EMResult fixed_prior_iterate(const GPModel& model, const LatentDataset& data,
                             const CandidateSet& candidates, const EMConfig& config);

CandidateSet refine_candidates(const CandidateSet& candidates, const EMConfig& config, Rng& rng);

// Argmax over sampled u in U of the summed posterior variance at x0^{i*} + s(T) + u.
// Inputs that would leave the state box under the MAP hypothesis are rejected.
Vec select_input(const CandidatePosterior& map_posterior, const Vec& current_cumulative,
                 const EMConfig& config, Rng& rng);
Vec select_input(const GPModel& model, const LatentDataset& data, const CandidateSet& candidates,
                 const EMConfig& config, Rng& rng);

// Weighted candidate mean, or the MAP candidate under mirror bimodality.
Vec point_estimate(const CandidateSet& candidates, double mirror_mass_threshold = 0.05);

} // namespace ronchi
