#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ronchi/calibration.hpp"
#include "ronchi/testbed.hpp"

namespace ronchi {

struct BenchmarkConfig {
    int runs = 100;
    int state_dim = 3;
    std::string source = "testbed";
    std::string scenario = "mismatch-0.3";
    double box = 200.0;  // true x0 ~ U[-box, box]^n
    int horizon = 30;
    std::uint64_t seed = 1;
    int workers = 0;     // 0: available parallelism
    std::vector<Method> methods{Method::full_em, Method::fixed_prior, Method::hard_em};
    bool stop_on_convergence = false;  // keep every trace at horizon + 1 steps
    EMConfig em;
    ScenarioOptions scenario_options;

    void validate() const;
};

struct MethodResult {
    Method method = Method::full_em;
    Mat errors;     // runs x (horizon + 1); NaN rows for failed runs
    std::vector<std::string> failures;  // "run <i>: <message>"
    Mat quantiles;  // (horizon + 1) x 3: median, q25, q75 over successful runs
    double seconds_per_step = 0.0;

    int failed_runs() const { return static_cast<int>(failures.size()); }
};

struct BenchmarkResult {
    BenchmarkConfig config;
    Mat true_x0;  // n x runs
    std::vector<MethodResult> methods;
    double wall_seconds = 0.0;

    const MethodResult& method(Method m) const;
};

using SourceFactory = std::function<std::unique_ptr<LatentSource>()>;

// Testbed benchmark: truth and prior come from make_scenario(config.scenario).
BenchmarkResult run_benchmark(const BenchmarkConfig& config);
// Generic benchmark over any latent source (e.g. the image pipeline).
BenchmarkResult run_benchmark(const BenchmarkConfig& config, const SourceFactory& make_source,
                              const GPModel& model);

// Linear-interpolation quantile (q in [0, 1]) of the finite values.
double quantile(std::vector<double> values, double q);

// curves.csv, runs.csv, plot.svg, manifest.txt. Only the manifest carries timing
// and timestamps; the other files depend on the configuration alone.
void emit_results(const BenchmarkResult& result, const std::filesystem::path& dir);

// Header of curves.csv: step, then <method>_median,<method>_q25,<method>_q75 per method.
std::vector<std::string> curves_header(const std::vector<Method>& methods);

} // namespace ronchi
