#include "ronchi/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "ronchi/errors.hpp"

namespace ronchi {

void BenchmarkConfig::validate() const {
    if (runs < 1) throw ConfigError("benchmark: runs must be >= 1");
    if (horizon < 1) throw ConfigError("benchmark: horizon must be >= 1");
    if (state_dim < 1) throw ConfigError("benchmark: n must be >= 1");
    if (!(box > 0.0)) throw ConfigError("benchmark: box must be > 0");
    if (workers < 0) throw ConfigError("benchmark: workers must be >= 0");
    if (methods.empty()) throw ConfigError("benchmark: no methods selected");
    em.validate();
}

const MethodResult& BenchmarkResult::method(Method m) const {
    for (const auto& r : methods)
        if (r.method == m) return r;
    throw ConfigError("benchmark result has no method '" + to_string(m) + "'");
}

double quantile(std::vector<double> values, double q) {
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

struct RunOutcome {
    Vec errors;
    std::string failure;
    double seconds = 0.0;
    int steps = 0;
};

} // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config, const SourceFactory& make_source,
                              const GPModel& model) {
    config.validate();
    model.validate();
    if (model.state_dim() != config.state_dim)
        throw ConfigError("benchmark: model state dimension differs from n");

    BenchmarkResult result;
    result.config = config;
    const int steps = config.horizon + 1;
    const int n = config.state_dim;

    result.true_x0.resize(n, config.runs);
    for (int r = 0; r < config.runs; ++r) {
        Rng rng(derive_seed(config.seed, 2 * static_cast<std::uint64_t>(r)));
        std::uniform_real_distribution<double> uni(-config.box, config.box);
        for (int d = 0; d < n; ++d) result.true_x0(d, r) = uni(rng);
    }

    const std::size_t methods = config.methods.size();
    std::vector<RunOutcome> outcomes(methods * static_cast<std::size_t>(config.runs));
    std::atomic<std::size_t> next{0};
    const auto start = std::chrono::steady_clock::now();

    auto worker = [&]() {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= outcomes.size()) return;
            const int run = static_cast<int>(job / methods);
            const Method method = config.methods[job % methods];
            RunOutcome& out = outcomes[job];
            CalibrationConfig cc;
            cc.em = config.em;
            cc.em.horizon = config.horizon;
            cc.method = method;
            cc.stop_on_convergence = config.stop_on_convergence;
            cc.seed = derive_seed(config.seed, 2 * static_cast<std::uint64_t>(run) + 1);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                auto source = make_source();
                const CalibrationTrace trace = run_calibration(*source, model, result.true_x0.col(run), cc);
                out.errors = Vec::Constant(steps, std::numeric_limits<double>::quiet_NaN());
                for (const auto& s : trace.steps) out.errors[s.step] = s.error;
                // Early-stopped traces hold their last estimate.
                for (int t = 1; t < steps; ++t)
                    if (std::isnan(out.errors[t])) out.errors[t] = out.errors[t - 1];
                out.steps = static_cast<int>(trace.steps.size());
            } catch (const std::exception& e) {
                out.failure = e.what();
            }
            out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };

    unsigned workers = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(outcomes.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (std::size_t m = 0; m < methods; ++m) {
        MethodResult mr;
        mr.method = config.methods[m];
        mr.errors = Mat::Constant(config.runs, steps, std::numeric_limits<double>::quiet_NaN());
        double seconds = 0.0;
        long step_count = 0;
        for (int r = 0; r < config.runs; ++r) {
            const RunOutcome& o = outcomes[static_cast<std::size_t>(r) * methods + m];
            if (!o.failure.empty()) {
                mr.failures.push_back("run " + std::to_string(r) + ": " + o.failure);
                continue;
            }
            mr.errors.row(r) = o.errors.transpose();
            seconds += o.seconds;
            step_count += o.steps;
        }
        mr.seconds_per_step = step_count > 0 ? seconds / static_cast<double>(step_count) : 0.0;
        mr.quantiles.resize(steps, 3);
        for (int t = 0; t < steps; ++t) {
            std::vector<double> col(mr.errors.col(t).data(), mr.errors.col(t).data() + config.runs);
            mr.quantiles(t, 0) = quantile(col, 0.5);
            mr.quantiles(t, 1) = quantile(col, 0.25);
            mr.quantiles(t, 2) = quantile(col, 0.75);
        }
        result.methods.push_back(std::move(mr));
    }
    return result;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
    if (config.source != "testbed")
        throw ConfigError("benchmark: source '" + config.source +
                          "' needs an encoder and GP model; use the generic overload");
    ScenarioOptions opts = config.scenario_options;
    opts.state_dim = config.state_dim;
    const Scenario sc = make_scenario(config.scenario, opts);
    const SyntheticMap truth = sc.truth;
    return run_benchmark(
        config, [&truth]() { return std::make_unique<TestbedSource>(truth); }, sc.prior);
}

std::vector<std::string> curves_header(const std::vector<Method>& methods) {
    std::vector<std::string> h{"step"};
    for (Method m : methods) {
        h.push_back(to_string(m) + "_median");
        h.push_back(to_string(m) + "_q25");
        h.push_back(to_string(m) + "_q75");
    }
    return h;
}

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    os << std::setprecision(17);
    return os;
}

void finish(std::ofstream& os, const std::filesystem::path& file) {
    os.flush();
    if (!os) throw IoError("write failed for '" + file.string() + "'");
}

std::string svg_path(const Mat& q, int col, double x0, double dx, double y0, double sy) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    bool pen = false;
    for (Eigen::Index t = 0; t < q.rows(); ++t) {
        if (!std::isfinite(q(t, col))) {
            pen = false;
            continue;
        }
        os << (pen ? " L" : " M") << x0 + dx * static_cast<double>(t) << "," << y0 - sy * q(t, col);
        pen = true;
    }
    return os.str();
}

void write_svg(const BenchmarkResult& result, const std::filesystem::path& file) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    const double width = 720, height = 480, left = 70, right = 160, top = 40, bottom = 60;
    const int steps = result.config.horizon + 1;
    double ymax = 0.0;
    for (const auto& m : result.methods)
        for (Eigen::Index t = 0; t < m.quantiles.rows(); ++t)
            if (std::isfinite(m.quantiles(t, 2))) ymax = std::max(ymax, m.quantiles(t, 2));
    if (!(ymax > 0.0)) ymax = 1.0;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const double dx = plot_w / std::max(1, steps - 1);
    const double sy = plot_h / ymax;
    const double y0 = top + plot_h;

    auto os = open_out(file);
    os << std::fixed << std::setprecision(2);
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
       << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
       << "  <text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
       << "Estimation error 2-norm, scenario " << result.config.scenario << "</text>\n"
       << "  <line x1=\"" << left << "\" y1=\"" << y0 << "\" x2=\"" << left + plot_w << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n"
       << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double v = ymax * k / 5.0;
        os << "  <text x=\"" << left - 8 << "\" y=\"" << y0 - sy * v + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << v << "</text>\n";
    }
    for (int t = 0; t < steps; t += std::max(1, steps / 6)) {
        os << "  <text x=\"" << left + dx * t << "\" y=\"" << y0 + 18
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << t << "</text>\n";
    }
    os << "  <text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 16
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">observation</text>\n";
    for (std::size_t i = 0; i < result.methods.size(); ++i) {
        const auto& m = result.methods[i];
        const char* c = colors[i % 5];
        os << "  <path d=\"" << svg_path(m.quantiles, 1, left, dx, y0, sy)
           << "\" fill=\"none\" stroke=\"" << c << "\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n"
           << "  <path d=\"" << svg_path(m.quantiles, 2, left, dx, y0, sy)
           << "\" fill=\"none\" stroke=\"" << c << "\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n"
           << "  <path d=\"" << svg_path(m.quantiles, 0, left, dx, y0, sy)
           << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n"
           << "  <text x=\"" << left + plot_w + 12 << "\" y=\"" << top + 20 * (static_cast<double>(i) + 1)
           << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << c << "\">" << to_string(m.method)
           << "</text>\n";
    }
    os << "</svg>\n";
    finish(os, file);
}

} // namespace

void emit_results(const BenchmarkResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    const int steps = result.config.horizon + 1;

    std::vector<Method> methods;
    for (const auto& m : result.methods) methods.push_back(m.method);
    {
        const auto file = dir / "curves.csv";
        auto os = open_out(file);
        const auto header = curves_header(methods);
        for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
        os << "\n";
        for (int t = 0; t < steps; ++t) {
            os << t;
            for (const auto& m : result.methods)
                os << "," << m.quantiles(t, 0) << "," << m.quantiles(t, 1) << "," << m.quantiles(t, 2);
            os << "\n";
        }
        finish(os, file);
    }
    {
        const auto file = dir / "runs.csv";
        auto os = open_out(file);
        os << "run,step";
        for (Method m : methods) os << "," << to_string(m);
        os << "\n";
        for (int r = 0; r < result.config.runs; ++r) {
            for (int t = 0; t < steps; ++t) {
                os << r << "," << t;
                for (const auto& m : result.methods) os << "," << m.errors(r, t);
                os << "\n";
            }
        }
        finish(os, file);
    }
    write_svg(result, dir / "plot.svg");
    {
        const auto file = dir / "manifest.txt";
        auto os = open_out(file);
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        const auto& c = result.config;
        os << "created = " << stamp << "\n"
           << "runs = " << c.runs << "\nn = " << c.state_dim << "\nsource = " << c.source
           << "\nscenario = " << c.scenario << "\nbox = " << c.box << "\nhorizon = " << c.horizon
           << "\nseed = " << c.seed << "\nwall_seconds = " << result.wall_seconds << "\n";
        for (const auto& m : result.methods) {
            os << to_string(m.method) << ".failed_runs = " << m.failed_runs() << "\n"
               << to_string(m.method) << ".seconds_per_step = " << m.seconds_per_step << "\n";
            for (const auto& f : m.failures) os << to_string(m.method) << ".failure = " << f << "\n";
        }
        finish(os, file);
    }
}

} // namespace ronchi
