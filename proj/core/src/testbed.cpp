#include "ronchi/testbed.hpp"

#include <cmath>
#include <numbers>

#include "ronchi/errors.hpp"

namespace ronchi {

Vec EvenFeatureMap::operator()(const Vec& x) const {
    if (empty()) return Vec();
    const Vec plus = ((frequencies * x + phases).array().cos()).matrix();
    const Vec minus = ((frequencies * (-x) + phases).array().cos()).matrix();
    return 0.5 * (amplitudes * plus + amplitudes * minus);
}

Vec SyntheticMap::truth(const Vec& x) const {
    Vec f = base(x);
    if (!mismatch.empty()) f += mismatch(x);
    return f;
}

Vec sample_latent(const SyntheticMap& map, const Vec& x, Rng& rng) {
    if (!x.allFinite()) throw NumericError("sample_latent: non-finite state");
    Vec z = map.truth(x);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index d = 0; d < z.size(); ++d) z[d] += map.noise_std[d] * gauss(rng);
    return z;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"exact-prior", "mismatch-0.1", "mismatch-0.3",
                                                "wrong-lengthscale"};
    return names;
}

Mat probe_grid(int state_dim, double box, int points_per_axis) {
    if (points_per_axis < 2) throw ConfigError("probe_grid: need >= 2 points per axis");
    Eigen::Index total = 1;
    for (int d = 0; d < state_dim; ++d) total *= points_per_axis;
    Mat probes(state_dim, total);
    for (Eigen::Index i = 0; i < total; ++i) {
        Eigen::Index rem = i;
        for (int d = 0; d < state_dim; ++d) {
            const auto k = rem % points_per_axis;
            rem /= points_per_axis;
            probes(d, i) = -box + 2.0 * box * static_cast<double>(k) / (points_per_axis - 1);
        }
    }
    return probes;
}

namespace {

EvenFeatureMap random_features(int latent_dim, int state_dim, int count, double lengthscale, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    EvenFeatureMap map;
    map.frequencies.resize(count, state_dim);
    map.phases.resize(count);
    map.amplitudes.resize(latent_dim, count);
    for (int j = 0; j < count; ++j) {
        for (int d = 0; d < state_dim; ++d) map.frequencies(j, d) = gauss(rng) / lengthscale;
        map.phases[j] = phase(rng);
    }
    const double a = std::sqrt(2.0 / count);
    for (int l = 0; l < latent_dim; ++l)
        for (int j = 0; j < count; ++j) map.amplitudes(l, j) = a * gauss(rng);
    return map;
}

} // namespace

Scenario make_scenario(const std::string& name, const ScenarioOptions& options) {
    double epsilon = 0.0;
    double signal_variance = 1e-4;
    double lengthscale_factor = 1.0;
    if (name == "exact-prior") {
    } else if (name == "mismatch-0.1") {
        epsilon = 0.1;
    } else if (name == "mismatch-0.3") {
        epsilon = 0.3;
    } else if (name == "wrong-lengthscale") {
        epsilon = 0.1;
        lengthscale_factor = 0.25;
    } else {
        throw ConfigError("unknown scenario '" + name + "'");
    }
    if (epsilon > 0.0) signal_variance = epsilon * epsilon;

    const int n = options.state_dim;
    const int l = options.latent_dim > 0 ? options.latent_dim : n;
    if (n < 1) throw ConfigError("make_scenario: state_dim must be >= 1");
    if (!(options.noise_std >= 0.0)) throw ConfigError("make_scenario: noise_std must be >= 0");
    if (options.features < 1) throw ConfigError("make_scenario: need at least one feature");

    Rng base_rng(derive_seed(options.seed, 1));
    const EvenFeatureMap smooth =
        random_features(l, n, options.features, options.feature_lengthscale, base_rng);

    Scenario sc;
    sc.name = name;
    PriorMean& f = sc.truth.base;
    f.basis = HatBasis(n, options.knots_per_axis, options.extent);
    f.weights.resize(l, f.basis.size());
    std::vector<bool> seen(static_cast<std::size_t>(f.basis.size()), false);
    for (int j = 0; j < f.basis.full_size(); ++j) {
        const int o = f.basis.orbit_of(static_cast<std::size_t>(j));
        if (seen[static_cast<std::size_t>(o)]) continue;
        seen[static_cast<std::size_t>(o)] = true;
        f.weights.col(o) = smooth(f.basis.knot(static_cast<std::size_t>(j)));
    }

    // Unit RMS per latent dimension over the probe region.
    const Mat probes = probe_grid(n, options.probe_box, options.probe_points);
    Vec sumsq = Vec::Zero(l);
    for (Eigen::Index i = 0; i < probes.cols(); ++i) sumsq += f(probes.col(i)).array().square().matrix();
    const Vec rms = (sumsq / static_cast<double>(probes.cols())).cwiseSqrt();
    for (int d = 0; d < l; ++d) f.weights.row(d) /= rms[d];

    sc.truth.epsilon = epsilon;
    sc.truth.noise_std = Vec::Constant(l, options.noise_std);
    if (epsilon > 0.0) {
        Rng mis_rng(derive_seed(options.seed, 2));
        sc.truth.mismatch = random_features(l, n, options.features, options.mismatch_lengthscale, mis_rng);
        Vec peak = Vec::Zero(l);
        for (Eigen::Index i = 0; i < probes.cols(); ++i)
            peak = peak.cwiseMax(sc.truth.mismatch(probes.col(i)).cwiseAbs());
        for (int d = 0; d < l; ++d) sc.truth.mismatch.amplitudes.row(d) *= epsilon / peak[d];
    }

    sc.prior.latent_dim = l;
    sc.prior.mean = f;
    sc.prior.kernel.signal_variance = signal_variance;
    sc.prior.kernel.lengthscales = Vec::Constant(n, options.mismatch_lengthscale * lengthscale_factor);
    sc.prior.kernel.noise_variance =
        Vec::Constant(l, std::max(options.noise_std * options.noise_std, 1e-8));
    sc.prior.validate();
    return sc;
}

} // namespace ronchi
