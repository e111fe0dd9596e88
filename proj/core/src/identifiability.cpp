#include "ronchi/identifiability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace ronchi {

namespace {

using Complex = std::complex<double>;

double hat(const Vec& y, double width) {
    double v = 1.0;
    for (Eigen::Index d = 0; d < y.size(); ++d) v *= std::max(0.0, 1.0 - std::abs(y[d]) / width);
    return v;
}

double gaussian(const Vec& y, double width) {
    return std::exp(-0.5 * y.squaredNorm() / (width * width));
}

double max_center(const Mat& centers) {
    return centers.size() ? centers.cwiseAbs().maxCoeff() : 0.0;
}

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

// Per-axis sample grid x_j = (j - K) dx, exactly symmetric about 0.
Vec symmetric_axis(int points, double half_width) {
    const int k = (points - 1) / 2;
    const double dx = half_width / k;
    Vec x(points);
    for (int j = 0; j < points; ++j) x[j] = (j - k) * dx;
    return x;
}

// All points of the tensor grid axis^n (first axis fastest), as columns.
Mat tensor_grid(const Vec& axis, int dim) {
    Eigen::Index total = 1;
    for (int d = 0; d < dim; ++d) total *= axis.size();
    Mat pts(dim, total);
    for (Eigen::Index i = 0; i < total; ++i) {
        Eigen::Index rem = i;
        for (int d = 0; d < dim; ++d) {
            pts(d, i) = axis[rem % axis.size()];
            rem /= axis.size();
        }
    }
    return pts;
}

// Design matrix rows Phi(x_i + shift)^T.
Mat design(const BasisSet& basis, const Mat& points, const Vec& shift) {
    Mat a(points.cols(), basis.size());
    for (Eigen::Index i = 0; i < points.cols(); ++i) a.row(i) = basis.evaluate(points.col(i) + shift).transpose();
    return a;
}

} // namespace

std::string to_string(BasisFamily family) {
    switch (family) {
    case BasisFamily::symmetric_hat: return "symmetric_hat";
    case BasisFamily::symmetric_gaussian: return "symmetric_gaussian";
    case BasisFamily::cosine: return "cosine";
    case BasisFamily::shifted_hat: return "shifted_hat";
    case BasisFamily::custom: return "custom";
    }
    return "custom";
}

BasisFamily parse_basis_family(const std::string& name) {
    if (name == "symmetric_hat" || name == "hat") return BasisFamily::symmetric_hat;
    if (name == "symmetric_gaussian" || name == "gaussian") return BasisFamily::symmetric_gaussian;
    if (name == "cosine" || name == "cos") return BasisFamily::cosine;
    if (name == "shifted_hat") return BasisFamily::shifted_hat;
    throw ConfigError("unknown basis family '" + name + "'");
}

Vec BasisSet::evaluate(const Vec& x) const {
    Vec out(size());
    for (int i = 0; i < size(); ++i) out[i] = functions[static_cast<std::size_t>(i)](x);
    return out;
}

BasisSet symmetric_hats(const Mat& centers, double width) {
    require(width > 0.0, "symmetric_hats: width must be > 0");
    BasisSet b;
    b.family = BasisFamily::symmetric_hat;
    b.dim = static_cast<int>(centers.cols());
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        const Vec c = centers.row(i).transpose();
        b.functions.push_back([c, width](const Vec& x) { return 0.5 * (hat(x - c, width) + hat(x + c, width)); });
    }
    b.support = max_center(centers) + width;
    b.bandwidth = 4.0 * std::numbers::pi / width;
    return b;
}

BasisSet shifted_hats(const Mat& centers, double width) {
    require(width > 0.0, "shifted_hats: width must be > 0");
    BasisSet b = symmetric_hats(centers, width);
    b.family = BasisFamily::shifted_hat;
    b.functions.clear();
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        const Vec c = centers.row(i).transpose();
        b.functions.push_back([c, width](const Vec& x) { return hat(x - c, width); });
    }
    return b;
}

BasisSet symmetric_gaussians(const Mat& centers, double width) {
    require(width > 0.0, "symmetric_gaussians: width must be > 0");
    BasisSet b;
    b.family = BasisFamily::symmetric_gaussian;
    b.dim = static_cast<int>(centers.cols());
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        const Vec c = centers.row(i).transpose();
        b.functions.push_back(
            [c, width](const Vec& x) { return 0.5 * (gaussian(x - c, width) + gaussian(x + c, width)); });
    }
    b.support = max_center(centers) + 4.0 * width;
    b.bandwidth = 6.0 / width;
    return b;
}

BasisSet cosines(const Mat& frequencies) {
    BasisSet b;
    b.family = BasisFamily::cosine;
    b.dim = static_cast<int>(frequencies.cols());
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index i = 0; i < frequencies.rows(); ++i) {
        const Vec w = frequencies.row(i).transpose();
        b.functions.push_back([w](const Vec& x) { return std::cos(w.dot(x)); });
        const double norm = w.norm();
        if (norm > 0.0) lo = std::min(lo, norm);
        hi = std::max(hi, norm);
    }
    // Common period when every frequency is an integer multiple of the lowest one
    // along the first axis.
    bool harmonic = std::isfinite(lo) && b.dim >= 1;
    for (Eigen::Index i = 0; harmonic && i < frequencies.rows(); ++i) {
        const double ratio = frequencies(i, 0) / lo;
        harmonic = std::abs(ratio - std::round(ratio)) < 1e-12 &&
                   frequencies.row(i).tail(b.dim - 1).cwiseAbs().sum() == 0.0;
    }
    b.period = harmonic ? 2.0 * std::numbers::pi / lo : 0.0;
    b.support = std::isfinite(lo) ? 2.0 * std::numbers::pi / lo : 1.0;
    b.bandwidth = std::max(hi, 1e-12);
    return b;
}

EvennessReport check_evenness(const BasisSet& basis, int probes, std::uint64_t seed, double tolerance) {
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(-basis.support, basis.support);
    EvennessReport r;
    Vec x(basis.dim);
    for (int p = 0; p < probes; ++p) {
        for (int d = 0; d < basis.dim; ++d) x[d] = uni(rng);
        const Vec plus = basis.evaluate(x);
        const Vec minus = basis.evaluate(-x);
        if (plus.size()) r.max_violation = std::max(r.max_violation, (plus - minus).cwiseAbs().maxCoeff());
    }
    r.passed = r.max_violation <= tolerance;
    return r;
}

Vec SpectralProfile::frequency(Eigen::Index row) const {
    Vec w(dim);
    for (int d = 0; d < dim; ++d) {
        w[d] = omega[row % omega.size()];
        row /= omega.size();
    }
    return w;
}

SpectralProfile sampled_fourier(const BasisSet& basis, const FourierGrid& grid) {
    require(grid.points >= 3 && grid.points % 2 == 1, "sampled_fourier: points must be odd and >= 3");
    require(basis.dim >= 1 && basis.dim <= 3, "sampled_fourier: supports 1 <= n <= 3");
    const double extent = grid.extent > 0.0 ? grid.extent : 4.0 * basis.support;
    const int p = grid.points;
    const int k = (p - 1) / 2;
    const double nyquist = k * std::numbers::pi / extent;
    if (basis.bandwidth > nyquist)
        throw ResolutionError("sampled_fourier: basis bandwidth " + std::to_string(basis.bandwidth) +
                              " exceeds grid Nyquist frequency " + std::to_string(nyquist));

    SpectralProfile prof;
    prof.dim = basis.dim;
    prof.extent = extent;
    const Vec x = symmetric_axis(p, extent);
    prof.omega.resize(p);
    for (int j = 0; j < p; ++j) prof.omega[j] = (j - k) * std::numbers::pi / extent;

    const double dx = extent / k;
    Eigen::MatrixXcd e(p, p);
    for (int r = 0; r < p; ++r) {
        for (int j = 0; j < p; ++j) {
            const double w = (j == 0 || j == p - 1) ? 0.5 * dx : dx;
            e(r, j) = w * std::polar(1.0, -prof.omega[r] * x[j]);
        }
    }

    const Mat pts = tensor_grid(x, basis.dim);
    const Eigen::Index total = pts.cols();
    prof.values.resize(total, basis.size());
    std::vector<Complex> buf(static_cast<std::size_t>(total)), next(buf.size());
    for (int i = 0; i < basis.size(); ++i) {
        for (Eigen::Index q = 0; q < total; ++q)
            buf[static_cast<std::size_t>(q)] = basis.functions[static_cast<std::size_t>(i)](pts.col(q));
        Eigen::Index inner = 1;
        for (int axis = 0; axis < basis.dim; ++axis) {
            const Eigen::Index outer = total / (inner * p);
            for (Eigen::Index o = 0; o < outer; ++o) {
                for (Eigen::Index in = 0; in < inner; ++in) {
                    const Eigen::Index base = o * inner * p + in;
                    for (int r = 0; r < p; ++r) {
                        Complex acc{};
                        for (int j = 0; j < p; ++j) acc += e(r, j) * buf[static_cast<std::size_t>(base + j * inner)];
                        next[static_cast<std::size_t>(base + r * inner)] = acc;
                    }
                }
            }
            std::swap(buf, next);
            inner *= p;
        }
        for (Eigen::Index q = 0; q < total; ++q) prof.values(q, i) = buf[static_cast<std::size_t>(q)];
    }
    return prof;
}

RichnessReport check_spectral_richness(const SpectralProfile& profile, double rel_threshold) {
    RichnessReport r;
    const auto m = profile.values.cols();
    if (m == 0) return r;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(profile.values);
    r.singular_values = svd.singularValues();
    const double top = r.singular_values.size() ? r.singular_values[0] : 0.0;
    for (Eigen::Index i = 0; i < r.singular_values.size(); ++i)
        if (top > 0.0 && r.singular_values[i] > rel_threshold * top) ++r.rank;
    r.passed = r.rank == m;
    return r;
}

PeriodicityReport check_periodicity(const SpectralProfile& profile, const Vec& theta, int probes,
                                    std::uint64_t seed, double threshold) {
    const auto m = profile.values.cols();
    if (theta.size() != m) throw ShapeError("check_periodicity: theta size mismatch");
    PeriodicityReport r;
    r.peak_bins = static_cast<int>(m) * (1 << profile.dim);
    r.min_offpeak_fraction = 1.0;

    std::vector<Vec> directions;
    if (theta.norm() > 0.0) directions.push_back(theta / theta.norm());
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int p = 0; p < probes; ++p) {
        Vec c(m);
        for (Eigen::Index i = 0; i < m; ++i) c[i] = gauss(rng);
        if (c.norm() > 0.0) directions.push_back(c / c.norm());
    }
    for (const Vec& c : directions) {
        const Eigen::VectorXcd s = profile.values * c.cast<Complex>();
        std::vector<double> energy(static_cast<std::size_t>(s.size()));
        for (Eigen::Index q = 0; q < s.size(); ++q) energy[static_cast<std::size_t>(q)] = std::norm(s[q]);
        const double total = std::accumulate(energy.begin(), energy.end(), 0.0);
        if (!(total > 0.0)) {
            r.min_offpeak_fraction = 0.0;
            continue;
        }
        const auto top = std::min<std::size_t>(static_cast<std::size_t>(r.peak_bins), energy.size());
        std::partial_sort(energy.begin(), energy.begin() + static_cast<std::ptrdiff_t>(top), energy.end(),
                          std::greater<>());
        const double peak = std::accumulate(energy.begin(), energy.begin() + static_cast<std::ptrdiff_t>(top), 0.0);
        r.min_offpeak_fraction = std::min(r.min_offpeak_fraction, std::max(0.0, total - peak) / total);
    }
    r.passed = r.min_offpeak_fraction > threshold;
    return r;
}

SignalReport check_signal(const SpectralProfile& profile, const Vec& theta) {
    if (theta.size() != profile.values.cols()) throw ShapeError("check_signal: theta size mismatch");
    SignalReport r;
    const Eigen::VectorXd mag = (profile.values * theta.cast<Complex>()).cwiseAbs();
    const double peak = mag.size() ? mag.maxCoeff() : 0.0;
    if (!(peak > 0.0)) return r;
    const auto count = (mag.array() > 1e-6 * peak).count();
    r.support_fraction = static_cast<double>(count) / static_cast<double>(mag.size());
    r.passed = r.support_fraction > 0.01;
    return r;
}

double joint_objective(const BasisSet& basis, const Vec& z, const Mat& cumulative, const Vec& x0,
                       const Vec& theta) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < z.size(); ++t) {
        const double r = z[t] - basis.evaluate(x0 + cumulative.col(t)).dot(theta);
        total += r * r;
    }
    return total;
}

AmbiguityReport demonstrate_ambiguity(const BasisSet& basis, const Vec& theta_star,
                                      const AmbiguityOptions& options) {
    if (!(basis.period > 0.0)) throw ConfigError("demonstrate_ambiguity: basis has no known period");
    if (theta_star.size() != basis.size()) throw ShapeError("demonstrate_ambiguity: theta size mismatch");
    const int n = basis.dim;

    AmbiguityReport rep;
    rep.delta = Vec::Zero(n);
    rep.delta[0] = basis.period;
    rep.theta_bar = theta_star;

    const double box = 4.0 * basis.support;
    const Mat probes = tensor_grid(symmetric_axis(options.probe_points | 1, box), n);
    const Mat a0 = design(basis, probes, Vec::Zero(n));
    const Mat a1 = design(basis, probes, rep.delta);
    rep.residual = (a0 * theta_star - a1 * rep.theta_bar).cwiseAbs().maxCoeff();
    if (!(rep.residual < 1e-8))
        throw CounterexampleInvalid("demonstrate_ambiguity: shifted representation residual " +
                                    std::to_string(rep.residual) + " exceeds 1e-8");

    // Noisy joint least-squares instance.
    Rng rng(options.seed);
    std::uniform_real_distribution<double> uni(-basis.support, basis.support);
    std::normal_distribution<double> gauss(0.0, options.noise_std);
    Vec x0_true(n);
    for (int d = 0; d < n; ++d) x0_true[d] = uni(rng);
    Mat s = Mat::Zero(n, options.observations);
    for (int t = 1; t < options.observations; ++t)
        for (int d = 0; d < n; ++d) s(d, t) = uni(rng);
    Vec z(options.observations);
    for (int t = 0; t < options.observations; ++t)
        z[t] = basis.evaluate(x0_true + s.col(t)).dot(theta_star) + gauss(rng);

    // Profile objective: theta solved exactly for each x0 on the search grid.
    const Mat search = tensor_grid(symmetric_axis(options.profile_points | 1, basis.support), n);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < search.cols(); ++i) {
        const Vec x0 = search.col(i);
        const Mat a = design(basis, s, x0);
        const Vec theta = a.colPivHouseholderQr().solve(z);
        const double obj = joint_objective(basis, z, s, x0, theta);
        if (obj < best) {
            best = obj;
            rep.x0_a = x0;
            rep.theta_a = theta;
        }
    }
    rep.objective_a = best;
    rep.x0_b = rep.x0_a + rep.delta;
    rep.theta_b = rep.theta_a;  // theta_bar = theta for a pure period shift
    rep.objective_b = joint_objective(basis, z, s, rep.x0_b, rep.theta_b);
    return rep;
}

double min_shift_residual(const BasisSet& basis, const Vec& theta_star, double lo, double hi, int count,
                          int probe_points) {
    if (count < 1) throw ConfigError("min_shift_residual: count must be >= 1");
    const int n = basis.dim;
    const Mat probes = tensor_grid(symmetric_axis(probe_points | 1, 4.0 * basis.support), n);
    const Vec target = design(basis, probes, Vec::Zero(n)) * theta_star;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i) {
        Vec delta = Vec::Zero(n);
        delta[0] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        const Mat a = design(basis, probes, delta);
        const Vec theta = a.colPivHouseholderQr().solve(target);
        best = std::min(best, (a * theta - target).cwiseAbs().maxCoeff());
    }
    return best;
}

UniquenessReport verify_uniqueness(const BasisSet& basis, const Vec& xi, const Vec& theta_star,
                                   const UniquenessGrid& grid) {
    const int n = basis.dim;
    const int m = basis.size();
    if (n > 2 || m > 5) throw ConfigError("verify_uniqueness: limited to n <= 2 and m <= 5");
    if (grid.points < 1 || grid.points % 2 == 0) throw ConfigError("verify_uniqueness: points must be odd");
    if (xi.size() != n || theta_star.size() != m) throw ShapeError("verify_uniqueness: size mismatch");

    const Mat probes = tensor_grid(symmetric_axis(grid.probe_points | 1, 2.0 * basis.support), n);
    const Vec target = design(basis, probes, xi) * theta_star;
    const int half = grid.points / 2;

    long xi_cells = 1, theta_cells = 1;
    for (int d = 0; d < n; ++d) xi_cells *= grid.points;
    for (int i = 0; i < m; ++i) theta_cells *= grid.points;

    UniquenessReport rep;
    rep.cells = xi_cells * theta_cells;
    Vec xi_p(n), theta_p(m);
    for (long a = 0; a < xi_cells; ++a) {
        long rem = a;
        bool centre_xi = true;
        for (int d = 0; d < n; ++d) {
            const int k = static_cast<int>(rem % grid.points) - half;
            rem /= grid.points;
            xi_p[d] = xi[d] + k * grid.xi_step;
            centre_xi = centre_xi && k == 0;
        }
        const Mat design_p = design(basis, probes, xi_p);
        for (long b = 0; b < theta_cells; ++b) {
            long r2 = b;
            bool centre = centre_xi;
            for (int i = 0; i < m; ++i) {
                const int k = static_cast<int>(r2 % grid.points) - half;
                r2 /= grid.points;
                theta_p[i] = theta_star[i] + k * grid.theta_step;
                centre = centre && k == 0;
            }
            double worst = 0.0;
            for (Eigen::Index q = 0; q < probes.cols() && worst < grid.tolerance; ++q)
                worst = std::max(worst, std::abs(design_p.row(q).dot(theta_p) - target[q]));
            if (centre) rep.true_cell_residual = worst;
            if (worst < grid.tolerance) ++rep.matching_cells;
        }
    }
    rep.passed = rep.matching_cells == 1;
    return rep;
}

} // namespace ronchi
