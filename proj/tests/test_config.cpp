#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ronchi/config.hpp"
#include "ronchi/errors.hpp"

using namespace ronchi;

TEST_SUITE("config") {

TEST_CASE("typed getters") {
    const Config c = Config::parse(
        "; comment\n[global]\nseed = 42\nout = results\n[em]\nsigma = 5.5\nperturb_scales = 1, 0.5\n"
        "[benchmark]\nmethods = full_em,fixed_prior\nstop_on_convergence = yes\n");
    CHECK(c.get_u64("global.seed", 0) == 42u);
    CHECK(c.get("global.out", std::string("x")) == "results");
    CHECK(c.get("em.sigma", 0.0) == 5.5);
    CHECK(c.get("em.missing", 3) == 3);
    CHECK(c.get("benchmark.stop_on_convergence", false));
    CHECK(c.get_list("em.perturb_scales", {}) == std::vector<double>{1.0, 0.5});
    CHECK(c.get_words("benchmark.methods", {}) == std::vector<std::string>{"full_em", "fixed_prior"});
    CHECK_NOTHROW(c.check_known_keys());
}

TEST_CASE("malformed values and unknown keys") {
    const Config c = Config::parse("[em]\nsigma = wide\nbogus = 1\n[benchmark]\nstop_on_convergence = maybe\n");
    CHECK_THROWS_AS(c.get("em.sigma", 1.0), ConfigError);
    CHECK_THROWS_AS(c.get("benchmark.stop_on_convergence", false), ConfigError);
    CHECK_THROWS_AS(c.check_known_keys(), ConfigError);
    CHECK_THROWS_AS(Config::parse("[sim\nside = 3\n"), ConfigError);
    CHECK_THROWS_AS(Config::load("/nonexistent/ronchi.ini"), IoError);
}

TEST_CASE("module configs pick up overrides and validate") {
    Config c = Config::parse("[sim]\nside = 128\nmode = analytic\n[em]\ncandidate_count = 64\n"
                             "[benchmark]\nruns = 5\nhorizon = 7\nmethods = hard_em\n[global]\nseed = 9\n");
    CHECK(sim_config(c).side == 128);
    CHECK(sim_config(c).mode == SimMode::analytic_even);
    CHECK(em_config(c).candidate_count == 64);
    const BenchmarkConfig b = benchmark_config(c);
    CHECK(b.runs == 5);
    CHECK(b.horizon == 7);
    CHECK(b.seed == 9u);
    CHECK(b.methods == std::vector<Method>{Method::hard_em});
    c.set("sim.side", "100");
    CHECK_THROWS_AS(sim_config(c), ConfigError);
    c.set("em.keep_fraction", "0.9");
    CHECK_THROWS_AS(em_config(c), ConfigError);
}

TEST_CASE("environment overrides seed and output") {
    Config c = Config::parse("[global]\nseed = 1\n");
    ::setenv("RONCHI_SEED", "123", 1);
    ::setenv("RONCHI_OUT", "/tmp/ronchi_env_out", 1);
    c.apply_environment();
    ::unsetenv("RONCHI_SEED");
    ::unsetenv("RONCHI_OUT");
    CHECK(c.get_u64("global.seed", 0) == 123u);
    CHECK(c.get("global.out", std::string()) == "/tmp/ronchi_env_out");
}

TEST_CASE("load from file") {
    const auto file = std::filesystem::temp_directory_path() / "ronchi_config_test.ini";
    {
        std::ofstream os(file);
        os << "[testbed]\nnoise_std = 0.05\nfeatures = 32\n";
    }
    const Config c = Config::load(file);
    const ScenarioOptions o = scenario_options(c);
    CHECK(o.noise_std == 0.05);
    CHECK(o.features == 32);
    std::filesystem::remove(file);
}

} // TEST_SUITE
