#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "ronchi/calibration.hpp"
#include "ronchi/errors.hpp"

using namespace ronchi;

namespace {

Scenario noiseless(const std::string& name) {
    ScenarioOptions o;
    o.noise_std = 0.0;
    return make_scenario(name, o);
}

class FailingSource : public LatentSource {
public:
    explicit FailingSource(SyntheticMap m, int fail_at) : map_(std::move(m)), fail_at_(fail_at) {}
    int latent_dim() const override { return map_.latent_dim(); }
    Vec observe(const Vec& state, Rng& rng) override {
        if (calls_++ == fail_at_) return Vec::Constant(latent_dim(), std::numeric_limits<double>::quiet_NaN());
        return sample_latent(map_, state, rng);
    }

private:
    SyntheticMap map_;
    int fail_at_;
    int calls_ = 0;
};

} // namespace

TEST_SUITE("calibration") {

TEST_CASE("method names round trip") {
    for (Method m : {Method::full_em, Method::hard_em, Method::fixed_prior})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("gradient"), ConfigError);
}

TEST_CASE("noiseless exact prior converges within ten steps") {
    const Scenario sc = noiseless("exact-prior");
    TestbedSource src(sc.truth);
    CalibrationConfig cfg;
    cfg.em.horizon = 10;
    cfg.stop_on_convergence = false;
    cfg.seed = 3;
    const Vec x0 = (Vec(3) << 120.0, -70.0, 45.0).finished();
    const CalibrationTrace tr = run_calibration(src, sc.prior, x0, cfg);
    REQUIRE(tr.steps.size() == 11);
    CHECK(tr.steps.back().error < 1.0);
}

TEST_CASE("trace shape follows the horizon and stopping rule") {
    const Scenario sc = make_scenario("exact-prior");
    const Vec x0 = (Vec(3) << -30.0, 50.0, 10.0).finished();
    CalibrationConfig cfg;
    cfg.em.horizon = 6;
    cfg.stop_on_convergence = false;
    TestbedSource src(sc.truth);
    const CalibrationTrace tr = run_calibration(src, sc.prior, x0, cfg);
    CHECK(tr.steps.size() == 7);
    CHECK(tr.data.size() == 7);
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
        CHECK(tr.steps[i].step == static_cast<int>(i));
        CHECK(tr.steps[i].estimate.size() == 3);
    }
    CHECK(tr.steps.back().input == Vec::Zero(3));
    CHECK(tr.data.cumulative.col(0) == Vec::Zero(3));
    for (std::size_t t = 0; t + 1 < tr.steps.size(); ++t)
        CHECK((tr.data.cumulative.col(t + 1) - tr.data.cumulative.col(t) - tr.steps[t].input).norm() < 1e-9);

    cfg.em.horizon = 30;
    cfg.stop_on_convergence = true;
    TestbedSource src2(sc.truth);
    const CalibrationTrace early = run_calibration(src2, sc.prior, x0, cfg);
    CHECK(early.steps.size() <= 31);
    if (early.steps.size() < 31) CHECK(early.converged);
}

TEST_CASE("runs are reproducible from the seed") {
    const Scenario sc = make_scenario("mismatch-0.3");
    const Vec x0 = (Vec(3) << 80.0, 20.0, -100.0).finished();
    CalibrationConfig cfg;
    cfg.em.horizon = 5;
    cfg.seed = 17;
    TestbedSource a(sc.truth), b(sc.truth);
    const CalibrationTrace ta = run_calibration(a, sc.prior, x0, cfg);
    const CalibrationTrace tb = run_calibration(b, sc.prior, x0, cfg);
    REQUIRE(ta.steps.size() == tb.steps.size());
    for (std::size_t i = 0; i < ta.steps.size(); ++i) CHECK(ta.steps[i].estimate == tb.steps[i].estimate);
}

TEST_CASE("without inputs the mirror states stay tied") {
    // With s = 0 the data only pin the level set of f; the terminal mass must still
    // split evenly between each state and its mirror image.
    const Scenario sc = make_scenario("exact-prior");
    const Vec x0 = (Vec(3) << 110.0, -60.0, 90.0).finished();
    CalibrationConfig cfg;
    cfg.em.horizon = 10;
    cfg.select_inputs = false;
    cfg.refine = false;
    cfg.stop_on_convergence = false;
    TestbedSource src(sc.truth);
    const CalibrationTrace tr = run_calibration(src, sc.prior, x0, cfg);
    const CandidateSet& c = tr.final_candidates;
    for (Eigen::Index i = 0; i + 1 < c.size(); i += 2) {
        REQUIRE(c.states.col(i) == Vec(-c.states.col(i + 1)));
        CHECK(std::abs(c.weights[i] - c.weights[i + 1]) <= 1e-12);
    }
    const Vec anchor = c.states.col(c.map_index());
    double plus = 0.0, minus = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const Vec x = c.states.col(i);
        if ((x - anchor).norm() < 20.0) plus += c.weights[i];
        if ((x + anchor).norm() < 20.0) minus += c.weights[i];
    }
    MESSAGE("mass near +xhat " << plus << ", near -xhat " << minus);
    CHECK(plus >= 0.3);
    CHECK(minus >= 0.3);
    for (const auto& s : tr.steps) CHECK(s.input == Vec::Zero(3));
}

TEST_CASE("hard EM and fixed prior report their factorization counts") {
    const Scenario sc = make_scenario("exact-prior");
    const Vec x0 = (Vec(3) << 10.0, 20.0, 30.0).finished();
    CalibrationConfig cfg;
    cfg.em.horizon = 3;
    cfg.stop_on_convergence = false;
    cfg.method = Method::hard_em;
    TestbedSource a(sc.truth);
    for (const auto& s : run_calibration(a, sc.prior, x0, cfg).steps) CHECK(s.m_step_factorizations == 1);
    TestbedSource b(sc.truth);
    const CalibrationTrace base = baseline_fixed_prior(b, sc.prior, x0, cfg);
    CHECK(base.method == Method::fixed_prior);
    for (const auto& s : base.steps) CHECK(s.m_step_factorizations == 0);
}

TEST_CASE("failures carry the step index") {
    const Scenario sc = make_scenario("exact-prior");
    FailingSource src(sc.truth, 2);
    CalibrationConfig cfg;
    cfg.em.horizon = 5;
    try {
        run_calibration(src, sc.prior, Vec::Zero(3), cfg);
        FAIL("expected a NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).rfind("calibration step 2: ", 0) == 0);
    }
    CHECK_THROWS_AS(run_calibration(src, sc.prior, Vec::Zero(2), cfg), ShapeError);
}

TEST_CASE("trace CSV layout") {
    const Scenario sc = make_scenario("exact-prior");
    CalibrationConfig cfg;
    cfg.em.horizon = 3;
    cfg.stop_on_convergence = false;
    TestbedSource src(sc.truth);
    const CalibrationTrace tr = run_calibration(src, sc.prior, Vec::Constant(3, 25.0), cfg);
    const auto file = std::filesystem::temp_directory_path() / "ronchi_trace_test.csv";
    write_trace_csv(file, tr);
    std::ifstream is(file);
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,xhat_0,xhat_1,xhat_2,error,elbo,u_0,u_1,u_2");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 8);
    }
    CHECK(rows == 4);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(write_trace_csv("/nonexistent_dir/trace.csv", tr), IoError);
}

} // TEST_SUITE
