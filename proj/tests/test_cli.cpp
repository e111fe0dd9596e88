#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(RONCHI_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ronchi_cli_" + name);
    fs::remove_all(p);
    return p;
}

fs::path write_ini(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / ("ronchi_cli_" + name + ".ini");
    std::ofstream(p) << body;
    return p;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors map to the config exit code") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("--help") == 0);
}

TEST_CASE("configuration problems exit with 2, missing files with 4") {
    const fs::path bad = write_ini("bad", "[em]\nnot_a_key = 1\n");
    CHECK(run("--config " + bad.string() + " ident-check") == 2);
    CHECK(run("--config /nonexistent/ronchi.ini ident-check") == 4);
    CHECK(run("calibrate --source testbed --scenario nowhere --out " + scratch("cal_bad").string()) == 2);
    fs::remove(bad);
}

TEST_CASE("ident-check writes a verdict table") {
    const fs::path out = scratch("ident");
    CHECK(run("ident-check --family symmetric_gaussian --out " + out.string()) == 0);
    std::ifstream is(out / "verdicts.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "check,passed,value");
    fs::remove_all(out);
}

TEST_CASE("calibrate on the testbed writes a trace") {
    const fs::path out = scratch("cal");
    const fs::path ini = write_ini("cal", "[em]\nhorizon = 3\n");
    CHECK(run("--config " + ini.string() + " --seed 5 calibrate --source testbed --scenario exact-prior --x0 10,20,30 --out " +
              out.string()) == 0);
    CHECK(fs::exists(out / "trace.csv"));
    fs::remove_all(out);
    fs::remove(ini);
}

TEST_CASE("benchmark with a fixed seed is byte reproducible") {
    const fs::path a = scratch("bench_a"), b = scratch("bench_b");
    const std::string args = "benchmark --runs 2 --horizon 3 --workers 1 --scenario mismatch-0.1 --seed 11 --out ";
    REQUIRE(run(args + a.string()) == 0);
    REQUIRE(run(args + b.string()) == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    };
    CHECK(slurp(a / "curves.csv") == slurp(b / "curves.csv"));
    CHECK(slurp(a / "runs.csv") == slurp(b / "runs.csv"));
    CHECK_FALSE(slurp(a / "curves.csv").empty());
    fs::remove_all(a);
    fs::remove_all(b);
}

} // TEST_SUITE
