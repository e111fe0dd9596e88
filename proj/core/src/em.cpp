#include "ronchi/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ronchi/errors.hpp"

namespace ronchi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

} // namespace

Trajectory::Trajectory(int state_dim) : cumulative_(Mat::Zero(state_dim, 1)) {
    if (state_dim < 1) throw ConfigError("Trajectory: state dimension must be >= 1");
}

void Trajectory::apply(const Vec& u) {
    if (u.size() != cumulative_.rows()) throw ShapeError("Trajectory: input dimension mismatch");
    if (!u.allFinite()) throw NumericError("Trajectory: non-finite input");
    inputs_.push_back(u);
    const Vec next = current() + u;
    cumulative_.conservativeResize(Eigen::NoChange, cumulative_.cols() + 1);
    cumulative_.col(cumulative_.cols() - 1) = next;
}

void CandidateSet::validate() const {
    if (states.cols() < 1) throw ConfigError("CandidateSet: need at least one candidate");
    if (weights.size() != states.cols()) throw ShapeError("CandidateSet: weight count mismatch");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw NumericError("CandidateSet: weights must be finite and non-negative");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw NumericError("CandidateSet: weights do not sum to 1");
}

Eigen::Index CandidateSet::map_index() const {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < weights.size(); ++i)
        if (weights[i] > weights[best]) best = i;
    return best;
}

void EMConfig::validate() const {
    if (keep_fraction < 0 || perturb_fraction < 0 || uniform_fraction < 0 ||
        std::abs(keep_fraction + perturb_fraction + uniform_fraction - 1.0) > 1e-9)
        throw ConfigError("EMConfig: refinement fractions must be >= 0 and sum to 1");
    if (!(sigma >= 0.0)) throw ConfigError("EMConfig: sigma must be >= 0");
    if (perturb_scales.empty()) throw ConfigError("EMConfig: perturb_scales must not be empty");
    for (double s : perturb_scales)
        if (!(s >= 0.0)) throw ConfigError("EMConfig: perturb_scales must be >= 0");
    if (!(state_box > 0.0)) throw ConfigError("EMConfig: state_box must be > 0");
    if (candidate_count < 1) throw ConfigError("EMConfig: candidate_count must be >= 1");
    if (!(input_bound >= 0.0)) throw ConfigError("EMConfig: input_bound must be >= 0");
    if (input_samples < 1) throw ConfigError("EMConfig: input_samples must be >= 1");
    if (em_iterations < 1) throw ConfigError("EMConfig: em_iterations must be >= 1");
    if (horizon < 1) throw ConfigError("EMConfig: horizon must be >= 1");
    if (convergence_patience < 1) throw ConfigError("EMConfig: convergence_patience must be >= 1");
}

CandidateSet uniform_candidates(int state_dim, int count, double box, Rng& rng) {
    if (count < 1) throw ConfigError("uniform_candidates: count must be >= 1");
    std::uniform_real_distribution<double> uni(-box, box);
    CandidateSet set;
    set.states.resize(state_dim, count);
    for (int i = 0; i + 1 < count; i += 2) {
        for (int d = 0; d < state_dim; ++d) set.states(d, i) = uni(rng);
        set.states.col(i + 1) = -set.states.col(i);
    }
    if (count % 2 == 1)
        for (int d = 0; d < state_dim; ++d) set.states(d, count - 1) = uni(rng);
    set.weights = Vec::Constant(count, 1.0 / count);
    return set;
}

double fixed_prior_log_likelihood(const GPModel& model, const LatentDataset& data, const Vec& x0) {
    data.validate(model.latent_dim, model.state_dim());
    double ll = 0.0;
    for (Eigen::Index t = 0; t < data.size(); ++t) {
        const Vec r = data.z.col(t) - model.mean(x0 + data.cumulative.col(t));
        for (Eigen::Index d = 0; d < r.size(); ++d) {
            const double v = model.kernel.noise_variance[d];
            ll += -0.5 * (r[d] * r[d] / v + std::log(v) + kLog2Pi);
        }
    }
    return ll;
}

Vec posterior_weights(const Vec& log_likelihoods) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double l : log_likelihoods)
        if (std::isfinite(l)) peak = std::max(peak, l);
    if (!std::isfinite(peak)) throw DegenerateWeights("E-step: every candidate likelihood is non-finite");
    Vec w(log_likelihoods.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w[i] = std::isfinite(log_likelihoods[i]) ? std::exp(log_likelihoods[i] - peak) : 0.0;
    w /= w.sum();
    return w;
}

double elbo_value(const Vec& weights, const Vec& log_likelihoods) {
    const double log_prior = -std::log(static_cast<double>(weights.size()));
    double total = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        total += weights[i] * (log_likelihoods[i] + log_prior - std::log(weights[i]));
    }
    return total;
}

namespace {

std::vector<std::shared_ptr<const CandidatePosterior>> build_posteriors(
    const GPModel& model, const LatentDataset& data, const CandidateSet& candidates) {
    std::vector<std::shared_ptr<const CandidatePosterior>> out;
    out.reserve(static_cast<std::size_t>(candidates.size()));
    for (Eigen::Index i = 0; i < candidates.size(); ++i)
        out.push_back(std::make_shared<const CandidatePosterior>(model, data, candidates.states.col(i)));
    return out;
}

Vec log_likelihoods_of(const std::vector<std::shared_ptr<const CandidatePosterior>>& posts) {
    Vec ll(static_cast<Eigen::Index>(posts.size()));
    for (std::size_t i = 0; i < posts.size(); ++i) ll[static_cast<Eigen::Index>(i)] = posts[i]->log_likelihood();
    return ll;
}

} // namespace

CandidateSet e_step(const GPModel& model, const LatentDataset& data, const CandidateSet& candidates) {
    if (candidates.size() < 1) throw ConfigError("e_step: empty candidate set");
    Vec ll(candidates.size());
    for (Eigen::Index i = 0; i < candidates.size(); ++i)
        ll[i] = log_marginal_likelihood(model, data, candidates.states.col(i));
    CandidateSet out{candidates.states, posterior_weights(ll)};
    return out;
}

void MixturePosterior::add(std::shared_ptr<const CandidatePosterior> posterior, double weight) {
    parts_.push_back(std::move(posterior));
    weights_.push_back(weight);
}

Vec MixturePosterior::mean(const Vec& x) const {
    if (parts_.empty()) throw ConfigError("MixturePosterior: no components");
    Vec out = weights_[0] * parts_[0]->mean(x);
    for (std::size_t i = 1; i < parts_.size(); ++i)
        if (weights_[i] != 0.0) out += weights_[i] * parts_[i]->mean(x);
    return out;
}

MixturePosterior m_step(const GPModel& model, const LatentDataset& data,
                        const CandidateSet& candidates) {
    candidates.validate();
    MixturePosterior mix;
    const auto posts = build_posteriors(model, data, candidates);
    for (std::size_t i = 0; i < posts.size(); ++i) mix.add(posts[i], candidates.weights[static_cast<Eigen::Index>(i)]);
    return mix;
}

EMResult em_iterate(const GPModel& model, const LatentDataset& data, const CandidateSet& candidates,
                    const EMConfig& /*config*/) {
    if (candidates.size() < 1) throw ConfigError("em_iterate: empty candidate set");
    const auto posts = build_posteriors(model, data, candidates);
    EMResult r;
    r.log_likelihoods = log_likelihoods_of(posts);
    r.candidates = CandidateSet{candidates.states, posterior_weights(r.log_likelihoods)};
    r.elbo = elbo_value(r.candidates.weights, r.log_likelihoods);
    r.map_index = r.candidates.map_index();
    r.likelihood_evaluations = static_cast<int>(posts.size());
    for (std::size_t i = 0; i < posts.size(); ++i)
        r.posterior.add(posts[i], r.candidates.weights[static_cast<Eigen::Index>(i)]);
    r.m_step_factorizations = r.posterior.factorizations();
    return r;
}

EMResult hard_em_iterate(const GPModel& model, const LatentDataset& data,
                         const CandidateSet& candidates, const EMConfig& /*config*/) {
    if (candidates.size() < 1) throw ConfigError("hard_em_iterate: empty candidate set");
    EMResult r;
    r.log_likelihoods.resize(candidates.size());
    for (Eigen::Index i = 0; i < candidates.size(); ++i)
        r.log_likelihoods[i] = log_marginal_likelihood(model, data, candidates.states.col(i));
    const Vec soft = posterior_weights(r.log_likelihoods);
    r.map_index = CandidateSet{candidates.states, soft}.map_index();
    r.candidates.states = candidates.states;
    r.candidates.weights = Vec::Zero(candidates.size());
    r.candidates.weights[r.map_index] = 1.0;
    r.elbo = elbo_value(r.candidates.weights, r.log_likelihoods);
    r.likelihood_evaluations = static_cast<int>(candidates.size());
    r.posterior.add(std::make_shared<const CandidatePosterior>(model, data, candidates.states.col(r.map_index)),
                    1.0);
    r.m_step_factorizations = r.posterior.factorizations();
    return r;
}

EMResult fixed_prior_iterate(const GPModel& model, const LatentDataset& data,
                             const CandidateSet& candidates, const EMConfig& /*config*/) {
    if (candidates.size() < 1) throw ConfigError("fixed_prior_iterate: empty candidate set");
    EMResult r;
    r.log_likelihoods.resize(candidates.size());
    for (Eigen::Index i = 0; i < candidates.size(); ++i)
        r.log_likelihoods[i] = fixed_prior_log_likelihood(model, data, candidates.states.col(i));
    r.candidates = CandidateSet{candidates.states, posterior_weights(r.log_likelihoods)};
    r.elbo = elbo_value(r.candidates.weights, r.log_likelihoods);
    r.map_index = r.candidates.map_index();
    r.likelihood_evaluations = static_cast<int>(candidates.size());
    r.posterior.add(std::make_shared<const CandidatePosterior>(model, data, candidates.states.col(r.map_index)),
                    1.0);
    r.m_step_factorizations = 0;
    return r;
}

CandidateSet refine_candidates(const CandidateSet& candidates, const EMConfig& config, Rng& rng) {
    config.validate();
    candidates.validate();
    const Eigen::Index total = candidates.size();
    const int n = candidates.state_dim();
    auto keep = static_cast<Eigen::Index>(std::llround(config.keep_fraction * total));
    auto perturb = static_cast<Eigen::Index>(std::llround(config.perturb_fraction * total));
    keep = std::min(keep, total);
    perturb = std::min(perturb, total - keep);
    const Eigen::Index fresh = total - keep - perturb;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return candidates.weights[a] > candidates.weights[b];
    });

    CandidateSet out;
    out.states.resize(n, total);
    Eigen::Index k = 0;
    for (; k < keep; ++k) out.states.col(k) = candidates.states.col(order[static_cast<std::size_t>(k)]);

    std::discrete_distribution<Eigen::Index> parent(candidates.weights.data(),
                                                    candidates.weights.data() + total);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index c = 0; c < perturb; ++c, ++k) {
        const double scale =
            config.sigma * config.perturb_scales[static_cast<std::size_t>(c) % config.perturb_scales.size()];
        const Eigen::Index p = parent(rng);
        for (int d = 0; d < n; ++d) out.states(d, k) = candidates.states(d, p) + scale * gauss(rng);
    }

    std::uniform_real_distribution<double> uni(-config.state_box, config.state_box);
    for (Eigen::Index c = 0; c < fresh; ++c, ++k)
        for (int d = 0; d < n; ++d) out.states(d, k) = uni(rng);

    out.weights = Vec::Constant(total, 1.0 / static_cast<double>(total));
    return out;
}

Vec select_input(const CandidatePosterior& map_posterior, const Vec& current_cumulative,
                 const EMConfig& config, Rng& rng) {
    const Vec origin = map_posterior.x0() + current_cumulative;
    const Eigen::Index n = origin.size();
    std::uniform_real_distribution<double> uni(-config.input_bound, config.input_bound);

    Vec best_u = Vec::Zero(n);
    double best_score = -std::numeric_limits<double>::infinity();
    Vec fallback_u = Vec::Zero(n);
    double fallback_reach = std::numeric_limits<double>::infinity();
    bool feasible = false;
    Vec u(n);
    for (int k = 0; k < config.input_samples; ++k) {
        for (Eigen::Index d = 0; d < n; ++d) u[d] = uni(rng);
        const Vec target = origin + u;
        const double reach = target.cwiseAbs().maxCoeff();
        if (reach > config.state_box) {
            if (!feasible && reach < fallback_reach) {
                fallback_reach = reach;
                fallback_u = u;
            }
            continue;
        }
        feasible = true;
        const double score = map_posterior.variance(target).sum();
        if (score > best_score) {
            best_score = score;
            best_u = u;
        }
    }
    return feasible ? best_u : fallback_u;
}

Vec select_input(const GPModel& model, const LatentDataset& data, const CandidateSet& candidates,
                 const EMConfig& config, Rng& rng) {
    candidates.validate();
    const CandidatePosterior post(model, data, candidates.states.col(candidates.map_index()));
    const Vec current = data.empty() ? Vec::Zero(model.state_dim())
                                     : Vec(data.cumulative.col(data.size() - 1));
    return select_input(post, current, config, rng);
}

Vec point_estimate(const CandidateSet& candidates, double mirror_mass_threshold) {
    candidates.validate();
    const Eigen::Index map = candidates.map_index();
    const Vec anchor = candidates.states.col(map);
    double opposite = 0.0;
    for (Eigen::Index i = 0; i < candidates.size(); ++i)
        if (candidates.states.col(i).dot(anchor) < 0.0) opposite += candidates.weights[i];
    if (opposite > mirror_mass_threshold) return anchor;
    return candidates.states * candidates.weights;
}

} // namespace ronchi
