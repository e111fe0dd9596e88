#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ronchi/bench.hpp"
#include "ronchi/errors.hpp"

using namespace ronchi;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

BenchmarkConfig small(const std::string& scenario, int runs, int horizon) {
    BenchmarkConfig c;
    c.scenario = scenario;
    c.runs = runs;
    c.horizon = horizon;
    c.workers = 1;
    c.em.horizon = horizon;
    return c;
}

// Shared between test cases; 8 runs, all methods.
const BenchmarkResult& mismatch_result() {
    static const BenchmarkResult r = run_benchmark(small("mismatch-0.3", 8, 12));
    return r;
}

} // namespace

TEST_SUITE("bench") {

TEST_CASE("quantile matches a sort-based recomputation") {
    Rng rng(4);
    std::uniform_real_distribution<double> uni(0.0, 50.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(1 + trial * 3);
        for (double& x : v) x = uni(rng);
        std::vector<double> s = v;
        std::sort(s.begin(), s.end());
        for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double pos = q * static_cast<double>(s.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, s.size() - 1);
            const double expected = s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
            CHECK(quantile(v, q) == doctest::Approx(expected).epsilon(1e-14));
        }
    }
    CHECK(quantile({1.0, std::nan(""), 3.0}, 0.5) == 2.0);
    CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("config validation") {
    BenchmarkConfig c;
    CHECK_NOTHROW(c.validate());
    c.runs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = BenchmarkConfig{};
    c.horizon = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = BenchmarkConfig{};
    c.scenario = "nope";
    CHECK_THROWS_AS(run_benchmark(c), ConfigError);
}

TEST_CASE("single noiseless exact-prior run converges") {
    BenchmarkConfig c = small("exact-prior", 1, 10);
    c.scenario_options.noise_std = 0.0;
    c.methods = {Method::full_em};
    const BenchmarkResult r = run_benchmark(c);
    const MethodResult& m = r.method(Method::full_em);
    CHECK(m.failed_runs() == 0);
    CHECK(m.errors(0, 10) < 1.0);
}

TEST_CASE("result dimensions and non-negative errors") {
    const BenchmarkResult& r = mismatch_result();
    CHECK(r.true_x0.rows() == 3);
    CHECK(r.true_x0.cols() == 8);
    CHECK(r.true_x0.cwiseAbs().maxCoeff() <= 200.0);
    REQUIRE(r.methods.size() == 3);
    for (const auto& m : r.methods) {
        CHECK(m.errors.rows() == 8);
        CHECK(m.errors.cols() == 13);
        CHECK(m.quantiles.rows() == 13);
        CHECK(m.failed_runs() == 0);
        CHECK((m.errors.array() >= 0.0).all());
        for (int t = 0; t <= 12; ++t) CHECK(m.quantiles(t, 1) <= m.quantiles(t, 0));
    }
}

TEST_CASE("median error trends down after step 5") {
    const MethodResult& m = mismatch_result().method(Method::full_em);
    for (int t = 7; t <= 12; ++t) CHECK(m.quantiles(t, 0) <= std::max(m.quantiles(t - 1, 0), m.quantiles(t - 2, 0)));
}

TEST_CASE("fixed prior matches the full method when the prior is exact") {
    BenchmarkConfig c = small("exact-prior", 8, 12);
    c.methods = {Method::full_em, Method::fixed_prior};
    const BenchmarkResult r = run_benchmark(c);
    const double full = r.method(Method::full_em).quantiles(12, 0);
    const double fixed = r.method(Method::fixed_prior).quantiles(12, 0);
    MESSAGE("exact-prior terminal medians: full " << full << ", fixed " << fixed);
    CHECK(full / fixed >= 0.8);
    CHECK(full / fixed <= 1.25);
}

TEST_CASE("emitted files") {
    const BenchmarkResult& r = mismatch_result();
    const auto dir = std::filesystem::temp_directory_path() / "ronchi_bench_test";
    std::filesystem::remove_all(dir);
    emit_results(r, dir);

    std::ifstream curves(dir / "curves.csv");
    std::string line;
    std::getline(curves, line);
    const auto header = split(line);
    CHECK(header.size() == 3 * 3 + 1);
    CHECK(header == curves_header(r.config.methods));
    CHECK(header[0] == "step");
    CHECK(header[1] == to_string(r.methods[0].method) + "_median");
    int t = 0;
    while (std::getline(curves, line)) {
        const auto cells = split(line);
        REQUIRE(cells.size() == header.size());
        CHECK(std::stoi(cells[0]) == t);
        for (std::size_t k = 0; k < r.methods.size(); ++k)
            for (int j = 0; j < 3; ++j)
                CHECK(std::stod(cells[1 + 3 * k + j]) == r.methods[k].quantiles(t, j));
        ++t;
    }
    CHECK(t == 13);

    std::ifstream runs(dir / "runs.csv");
    std::getline(runs, line);
    CHECK(split(line).size() == 2 + r.methods.size());
    int rows = 0;
    while (std::getline(runs, line)) ++rows;
    CHECK(rows == 8 * 13);

    const std::string svg = slurp(dir / "plot.svg");
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(std::count(svg.begin(), svg.end(), '<') == std::count(svg.begin(), svg.end(), '>'));
    CHECK(std::filesystem::exists(dir / "manifest.txt"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("benchmarks are reproducible") {
    BenchmarkConfig c = small("mismatch-0.1", 3, 5);
    c.seed = 77;
    const auto a = std::filesystem::temp_directory_path() / "ronchi_bench_a";
    const auto b = std::filesystem::temp_directory_path() / "ronchi_bench_b";
    emit_results(run_benchmark(c), a);
    emit_results(run_benchmark(c), b);
    for (const char* f : {"curves.csv", "runs.csv", "plot.svg"}) CHECK(slurp(a / f) == slurp(b / f));
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

} // TEST_SUITE
