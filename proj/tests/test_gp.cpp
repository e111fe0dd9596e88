#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ronchi/errors.hpp"
#include "ronchi/gp.hpp"

using namespace ronchi;
using fixture::random_data;
using fixture::random_model;
using fixture::uniform_vec;

TEST_SUITE("gp") {

TEST_CASE("kernel values at the origin and far away") {
    KernelConfig k;
    k.signal_variance = 1.7;
    k.lengthscales = Vec::Constant(3, 10.0);
    k.noise_variance = Vec::Constant(1, 0.1);
    CHECK(kernel_eval(k, Vec::Zero(3), Vec::Zero(3)) == 1.7);
    Vec far = Vec::Zero(3);
    far[0] = 1000.0;
    CHECK(std::abs(kernel_eval(k, far, far) - 0.85) < 1e-6 * 1.7);
}

TEST_CASE("kernel symmetry identities") {
    Rng rng(1);
    KernelConfig k;
    k.signal_variance = 0.9;
    k.lengthscales = uniform_vec(3, 10.0, 100.0, rng);
    k.noise_variance = Vec::Constant(1, 0.1);
    for (int i = 0; i < 100; ++i) {
        const Vec x = uniform_vec(3, -150, 150, rng), y = uniform_vec(3, -150, 150, rng);
        const double a = kernel_eval(k, x, y);
        CHECK(std::abs(kernel_eval(k, -x, y) - a) <= 1e-12 * std::abs(a));
        CHECK(std::abs(kernel_eval(k, x, -y) - a) <= 1e-12 * std::abs(a));
        CHECK(std::abs(oracle::sym_se(0.9, k.lengthscales, x, y) - a) <= 1e-12 * std::abs(a) + 1e-300);
    }
}

TEST_CASE("kernel config validation") {
    KernelConfig k;
    k.lengthscales = Vec::Constant(2, 1.0);
    k.noise_variance = Vec::Constant(1, 0.1);
    CHECK_NOTHROW(k.validate());
    k.lengthscales[1] = 0.0;
    CHECK_THROWS_AS(k.validate(), ConfigError);
}

TEST_CASE("gram matrix shapes and PSD") {
    Rng rng(2);
    const GPModel m = random_model(3, 1, rng);
    const Vec x0 = uniform_vec(3, -100, 100, rng);
    const Mat k1 = gram_matrix(m, x0, Mat::Zero(3, 1));
    CHECK(k1.rows() == 1);
    CHECK(k1(0, 0) == kernel_eval(m.kernel, x0, x0));

    Mat dup(3, 3);
    dup.col(0) = Vec::Zero(3);
    dup.col(1) = uniform_vec(3, -50, 50, rng);
    dup.col(2) = dup.col(1);
    const Mat kd = gram_matrix(m, x0, dup);
    CHECK(kd.row(1) == kd.row(2));
    CHECK(Eigen::FullPivLU<Mat>(kd).rank() == 2);

    const LatentDataset d = random_data(3, 1, 4, rng);
    const Mat k = gram_matrix(m, x0, d.cumulative);
    CHECK((k - k.transpose()).norm() == 0.0);
    const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(k).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-8 * m.kernel.signal_variance);
    Mat cov = k;
    cov.diagonal().array() += m.kernel.noise_variance[0];
    Eigen::LLT<Mat> llt(cov);
    REQUIRE(llt.info() == Eigen::Success);
    const Mat l = llt.matrixL();
    CHECK((l * l.transpose() - cov).cwiseAbs().maxCoeff() < 1e-10 * cov.cwiseAbs().maxCoeff());
}

TEST_CASE("T = 0 likelihood reduces to a scalar Gaussian") {
    Rng rng(3);
    const GPModel m = random_model(3, 1, rng);
    const Vec x0 = uniform_vec(3, -100, 100, rng);
    LatentDataset d;
    d.cumulative = Mat::Zero(3, 1);
    d.z = Mat::Constant(1, 1, 0.4);
    const double var = kernel_eval(m.kernel, x0, x0) + m.kernel.noise_variance[0];
    const double mu = m.mean(x0)[0];
    const double expected = -0.5 * (0.4 - mu) * (0.4 - mu) / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
    CHECK(log_marginal_likelihood(m, d, x0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("marginal likelihood matches the dense oracle") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const int l = 1 + trial % 3;
        const GPModel m = random_model(3, l, rng);
        const LatentDataset d = random_data(3, l, 5, rng);
        const Vec x0 = uniform_vec(3, -150, 150, rng);
        const double ours = log_marginal_likelihood(m, d, x0);
        const double ref = oracle::gp_log_likelihood(m, d, x0);
        CHECK(std::abs(ours - ref) < 1e-8 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("zero inputs make mirrored candidates equally likely") {
    Rng rng(5);
    const GPModel m = random_model(3, 2, rng);
    LatentDataset d = random_data(3, 2, 4, rng);
    d.cumulative.setZero();
    for (int i = 0; i < 10; ++i) {
        const Vec x0 = uniform_vec(3, -200, 200, rng);
        CHECK(log_marginal_likelihood(m, d, x0) == log_marginal_likelihood(m, d, -x0));
    }
}

TEST_CASE("posterior mean limits and evenness") {
    Rng rng(6);
    GPModel m = random_model(2, 1, rng);
    const Vec x0 = uniform_vec(2, -100, 100, rng);
    LatentDataset empty;
    empty.z = Mat(1, 0);
    empty.cumulative = Mat(2, 0);
    const Vec q = uniform_vec(2, -100, 100, rng);
    CHECK(posterior_mean(m, empty, x0, q) == m.mean(q));
    CHECK(posterior_variance(m, empty, x0, q)[0] == kernel_eval(m.kernel, q, q));

    const LatentDataset d = random_data(2, 1, 4, rng);
    m.kernel.noise_variance[0] = 1e-10;
    const CandidatePosterior post(m, d, x0);
    for (Eigen::Index t = 0; t < d.size(); ++t) {
        const Vec at = x0 + d.cumulative.col(t);
        CHECK(post.mean(at)[0] == doctest::Approx(d.z(0, t)).epsilon(1e-5));
    }
    for (int i = 0; i < 20; ++i) {
        const Vec x = uniform_vec(2, -250, 250, rng);
        CHECK(post.mean(x) == post.mean(-x));
        CHECK(post.variance(x) == post.variance(-x));
    }
}

TEST_CASE("posterior mean and variance match dense formulas") {
    Rng rng(7);
    const GPModel m = random_model(3, 1, rng);
    const LatentDataset d = random_data(3, 1, 6, rng);
    const Vec x0 = uniform_vec(3, -100, 100, rng);
    const Eigen::Index T = d.size();
    Mat k(T, T);
    for (Eigen::Index i = 0; i < T; ++i)
        for (Eigen::Index j = 0; j < T; ++j)
            k(i, j) = oracle::sym_se(m.kernel.signal_variance, m.kernel.lengthscales, Vec(x0 + d.cumulative.col(i)),
                                     Vec(x0 + d.cumulative.col(j)));
    k.diagonal().array() += m.kernel.noise_variance[0];
    const Mat inv = k.inverse();
    Vec resid(T);
    for (Eigen::Index t = 0; t < T; ++t) resid[t] = d.z(0, t) - m.mean(Vec(x0 + d.cumulative.col(t)))[0];
    const CandidatePosterior post(m, d, x0);
    for (int i = 0; i < 10; ++i) {
        const Vec x = uniform_vec(3, -200, 200, rng);
        Vec kx(T);
        for (Eigen::Index t = 0; t < T; ++t)
            kx[t] = oracle::sym_se(m.kernel.signal_variance, m.kernel.lengthscales, x, Vec(x0 + d.cumulative.col(t)));
        const double mean = m.mean(x)[0] + kx.dot(inv * resid);
        const double var = oracle::sym_se(m.kernel.signal_variance, m.kernel.lengthscales, x, x) - kx.dot(inv * kx);
        CHECK(post.mean(x)[0] == doctest::Approx(mean).epsilon(1e-9));
        CHECK(post.variance(x)[0] == doctest::Approx(std::max(var, 0.0)).epsilon(1e-7).scale(m.kernel.signal_variance));
    }
}

TEST_CASE("conditioning reduces variance") {
    Rng rng(8);
    const GPModel m = random_model(2, 1, rng);
    const Vec x0 = uniform_vec(2, -100, 100, rng);
    LatentDataset d = random_data(2, 1, 5, rng);
    const CandidatePosterior full(m, d, x0);
    for (Eigen::Index t = 0; t < d.size(); ++t)
        CHECK(full.variance(Vec(x0 + d.cumulative.col(t)))[0] <= m.kernel.noise_variance[0] + 1e-6);

    LatentDataset smaller;
    smaller.z = d.z.leftCols(4);
    smaller.cumulative = d.cumulative.leftCols(4);
    const CandidatePosterior part(m, smaller, x0);
    for (int i = -5; i <= 5; ++i)
        for (int j = -5; j <= 5; ++j) {
            Vec q(2);
            q << 40.0 * i, 40.0 * j;
            CHECK(full.variance(q)[0] <= part.variance(q)[0] + 1e-12);
        }
}

TEST_CASE("factorizations are shared across equal noise levels") {
    Rng rng(9);
    GPModel m = random_model(3, 3, rng);
    const LatentDataset d = random_data(3, 3, 4, rng);
    m.kernel.noise_variance = Vec::Constant(3, 0.01);
    CHECK(CandidatePosterior(m, d, Vec::Zero(3)).factorizations() == 1);
    m.kernel.noise_variance[2] = 0.02;
    CHECK(CandidatePosterior(m, d, Vec::Zero(3)).factorizations() == 2);
}

TEST_CASE("jitter rescues a singular covariance") {
    Rng rng(10);
    GPModel m = random_model(1, 1, rng);
    m.kernel.noise_variance[0] = 1e-300;
    LatentDataset d;
    d.cumulative = Mat::Zero(1, 3);
    d.z = Mat::Constant(1, 3, 0.1);
    const CandidatePosterior p(m, d, Vec::Constant(1, 5.0));
    CHECK(p.jitter() > 0.0);
    CHECK(std::isfinite(p.log_likelihood()));
}

TEST_CASE("hat basis is exactly even and interpolates knots") {
    const HatBasis b(2, 7, 300.0);
    CHECK(b.full_size() == 49);
    CHECK(b.size() == 25);
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const Vec x = uniform_vec(2, -300, 300, rng);
        CHECK(b.row(x) == b.row(-x));
        CHECK(b.row(x).sum() == doctest::Approx(1.0));
    }
    CHECK(b.row(Vec::Constant(2, 1000.0)).sum() == 0.0);
}

TEST_CASE("prior mean fit round trip, evenness and constants") {
    const HatBasis b(2, 5, 200.0);
    Rng rng(12);
    Mat w(2, b.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform_vec(1, -1, 1, rng)[0];
    PriorMean truth{b, w};
    Mat states(2, 400), latents(2, 400);
    for (int i = 0; i < 400; ++i) {
        states.col(i) = uniform_vec(2, -200, 200, rng);
        latents.col(i) = truth(states.col(i));
    }
    const PriorMean fit = fit_prior_mean(states, latents, b);
    CHECK((fit.weights - w).cwiseAbs().maxCoeff() < 1e-6);
    for (int i = 0; i < 30; ++i) {
        const Vec x = uniform_vec(2, -250, 250, rng);
        CHECK(fit(x) == fit(-x));
    }
    const Mat constant = Mat::Constant(2, 400, 0.75);
    const PriorMean flat = fit_prior_mean(states, constant, b);
    for (int i = 0; i < 10; ++i) CHECK((flat(uniform_vec(2, -200, 200, rng)).array() - 0.75).abs().maxCoeff() < 1e-6);
    CHECK_THROWS_AS(fit_prior_mean(states.leftCols(3), latents.leftCols(3), b), ConfigError);
}

TEST_CASE("hyperparameters recovered from a GP draw") {
    Rng rng(13);
    const int N = 200;
    Mat states(1, N);
    for (int i = 0; i < N; ++i) states(0, i) = uniform_vec(1, -200, 200, rng)[0];
    KernelConfig truth;
    truth.signal_variance = 1.0;
    truth.lengthscales = Vec::Constant(1, 40.0);
    truth.noise_variance = Vec::Constant(1, 0.01);
    Mat k(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) k(i, j) = kernel_eval(truth, states.col(i), states.col(j));
    k.diagonal().array() += 0.01;
    const Mat l = Eigen::LLT<Mat>(k).matrixL();
    std::normal_distribution<double> g(0.0, 1.0);
    Vec e(N);
    for (int i = 0; i < N; ++i) e[i] = g(rng);
    const Mat latents = (l * e).transpose();

    GPModel m;
    m.latent_dim = 1;
    m.mean.basis = HatBasis(1, 3, 300.0);
    m.mean.weights = Mat::Zero(1, 2);
    HyperGrid grid;
    for (int i = -3; i <= 3; ++i) grid.signal_variance.push_back(std::pow(4.0, i));
    for (int i = -3; i <= 3; ++i) grid.lengthscale_scale.push_back(std::pow(2.0, i));
    for (int i = -3; i <= 3; ++i) grid.noise_variance.push_back(0.01 * std::pow(4.0, i));
    grid.base_lengthscales = Vec::Constant(1, 40.0);
    const HyperFit fit = fit_hyperparameters(m, states, latents, grid);
    CHECK(std::abs(std::log(fit.kernel.signal_variance) / std::log(4.0)) <= 1.0 + 1e-9);
    CHECK(std::abs(std::log(fit.kernel.lengthscales[0] / 40.0) / std::log(2.0)) <= 1.0 + 1e-9);
    CHECK(std::abs(std::log(fit.kernel.noise_variance[0] / 0.01) / std::log(4.0)) <= 1.0 + 1e-9);

    // Argmax by construction.
    for (double sf2 : grid.signal_variance)
        for (double ls : grid.lengthscale_scale)
            for (double nv : grid.noise_variance) {
                KernelConfig c;
                c.signal_variance = sf2;
                c.lengthscales = grid.base_lengthscales * ls;
                c.noise_variance = Vec::Constant(1, nv);
                CHECK(labeled_log_likelihood(m, c, states, latents) <= fit.log_likelihood + 1e-9);
            }

    HyperGrid empty = grid;
    empty.noise_variance.clear();
    CHECK_THROWS_AS(fit_hyperparameters(m, states, latents, empty), ConfigError);
}

TEST_CASE("pure noise data") {
    Rng rng(14);
    const int N = 300;
    Mat states(1, N), latents(1, N);
    std::normal_distribution<double> g(0.0, 0.5);
    for (int i = 0; i < N; ++i) {
        states(0, i) = uniform_vec(1, -200, 200, rng)[0];
        latents(0, i) = g(rng);
    }
    GPModel m;
    m.latent_dim = 1;
    m.mean.basis = HatBasis(1, 3, 300.0);
    m.mean.weights = Mat::Zero(1, 2);
    HyperGrid grid;
    for (int i = 0; i < 7; ++i) grid.signal_variance.push_back(1e-4 * std::pow(10.0, i * 0.5));
    grid.lengthscale_scale = {0.1, 0.3, 1.0};
    for (int i = 0; i < 41; ++i) grid.noise_variance.push_back(0.05 * std::pow(10.0, i * 0.05));
    grid.base_lengthscales = Vec::Constant(1, 100.0);
    const HyperFit fit = fit_hyperparameters(m, states, latents, grid);
    const double sample_var = oracle::moments(std::vector<double>(latents.data(), latents.data() + N)).variance;
    // Finite samples leave some spurious correlation; the signal must stay negligible.
    CHECK(fit.kernel.signal_variance < 0.05 * sample_var);
    CHECK(std::abs(fit.kernel.noise_variance[0] - sample_var) / sample_var < 0.2);
}

TEST_CASE("model persistence round trip") {
    Rng rng(15);
    const GPModel m = random_model(3, 2, rng);
    const auto file = std::filesystem::temp_directory_path() / "ronchi_test_gp.ini";
    save_gp_model(file, m);
    const GPModel back = load_gp_model(file);
    CHECK(back.kernel.signal_variance == m.kernel.signal_variance);
    CHECK(back.kernel.lengthscales == m.kernel.lengthscales);
    CHECK(back.kernel.noise_variance == m.kernel.noise_variance);
    CHECK(back.mean.weights == m.mean.weights);
    CHECK(back.mean.basis.knots_per_axis() == 5);
    std::filesystem::remove(file.string() + ".weights");
    CHECK_THROWS_AS(load_gp_model(file), IoError);
    std::filesystem::remove(file);
}

TEST_CASE("fit_gp_model end to end") {
    Rng rng(16);
    const HatBasis b(2, 5, 250.0);
    Mat states(2, 150), latents(1, 150);
    for (int i = 0; i < 150; ++i) {
        states.col(i) = uniform_vec(2, -200, 200, rng);
        latents(0, i) = std::cos(states(0, i) / 60.0) * std::cos(states(1, i) / 80.0);
    }
    const GPModel m = fit_gp_model(states, latents, b, 5);
    CHECK_NOTHROW(m.validate());
    CHECK(m.latent_dim == 1);
}

} // TEST_SUITE
