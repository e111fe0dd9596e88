// ronchi: simulate, train-encoder, calibrate, benchmark, ident-check.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ronchi/bench.hpp"
#include "ronchi/calibration.hpp"
#include "ronchi/config.hpp"
#include "ronchi/encoder.hpp"
#include "ronchi/errors.hpp"
#include "ronchi/gp.hpp"
#include "ronchi/grid_io.hpp"
#include "ronchi/identifiability.hpp"
#include "ronchi/preprocess.hpp"
#include "ronchi/testbed.hpp"

namespace fs = std::filesystem;
using namespace ronchi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct Globals {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string out;
};

Config load_config(const Globals& g) {
    Config cfg = g.config_file.empty() ? Config() : Config::load(g.config_file);
    cfg.check_known_keys();
    cfg.apply_environment();
    if (g.seed) cfg.set("global.seed", std::to_string(*g.seed));
    if (!g.out.empty()) cfg.set("global.out", g.out);
    return cfg;
}

fs::path out_dir(const Config& cfg, const std::string& fallback) {
    fs::path dir = cfg.get("global.out", fallback);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

Vec parse_vector(const std::string& text, int expected, const char* what) {
    Config tmp;
    tmp.set("x.v", text);
    const auto values = tmp.get_list("x.v", {});
    if (static_cast<int>(values.size()) != expected)
        throw ConfigError(std::string(what) + ": expected " + std::to_string(expected) + " values");
    return Eigen::Map<const Vec>(values.data(), expected);
}

std::vector<PowerSpectrum> preprocess_all(const io::Dataset& data, const PreprocessOptions& opts) {
    std::vector<PowerSpectrum> out;
    out.reserve(data.images.size());
    for (const auto& img : data.images) out.push_back(preprocess(img, opts));
    return out;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Globals& g, int count, double box) {
    const Config cfg = load_config(g);
    const SimConfig sim = sim_config(cfg);
    const auto seed = cfg.get_u64("global.seed", 1);
    const fs::path dir = out_dir(cfg, "dataset");
    const io::Dataset data = io::simulate_dataset(sim, count, box, seed);
    io::write_dataset(dir, data);
    std::cout << "wrote " << data.images.size() << " Ronchigrams (" << to_string(sim.mode) << ") to "
              << dir.string() << "\n";
    return 0;
}

int cmd_train(const Globals& g, const std::string& data_dir, const std::string& weights,
              const std::string& gp_out) {
    const Config cfg = load_config(g);
    const io::Dataset data = io::read_dataset(data_dir);
    PreprocessOptions opts;
    opts.log1p = cfg.get("sim.log1p", true);
    const auto spectra = preprocess_all(data, opts);

    const int latent_dim = cfg.get("encoder.latent_dim", 3);
    const int pool = cfg.get("encoder.pool", 4);
    std::vector<int> hidden;
    for (double h : cfg.get_list("encoder.hidden", {128, 64})) hidden.push_back(static_cast<int>(h));
    TrainConfig tc = train_config(cfg);
    if (cfg.has("global.seed")) tc.seed = cfg.get_u64("global.seed", tc.seed);

    const TrainedVae trained = train_vae(spectra, latent_dim, pool, hidden, tc);
    const fs::path out = weights.empty() ? out_dir(cfg, ".") / "encoder.rvae" : fs::path(weights);
    save_vae(out, trained.params, &trained.log);
    std::cout << "trained encoder: " << trained.log.epoch_elbo.size() << " epochs, final ELBO "
              << trained.log.epoch_elbo.back() << "\nwrote " << out.string() << "\n";

    if (!gp_out.empty()) {
        const int n = static_cast<int>(data.records.front().state.dim());
        Mat states(n, static_cast<Eigen::Index>(spectra.size()));
        Mat latents(latent_dim, static_cast<Eigen::Index>(spectra.size()));
        for (std::size_t i = 0; i < spectra.size(); ++i) {
            states.col(static_cast<Eigen::Index>(i)) = data.records[i].state.coeffs;
            latents.col(static_cast<Eigen::Index>(i)) = encode(trained.params, spectra[i]).mu;
        }
        const double extent = cfg.get("encoder.gp_extent", 1.5 * states.cwiseAbs().maxCoeff());
        const HatBasis basis(n, cfg.get("encoder.gp_knots", 7), extent);
        const GPModel model = fit_gp_model(states, latents, basis);
        save_gp_model(gp_out, model);
        std::cout << "wrote GP model " << gp_out << " (signal variance " << model.kernel.signal_variance
                  << ")\n";
    }
    return 0;
}

struct SourceChoice {
    std::unique_ptr<LatentSource> source;
    GPModel model;
    SyntheticMap truth;
};

SourceChoice make_source(const Config& cfg, const std::string& kind, const std::string& encoder_path,
                         const std::string& gp_path, const std::string& scenario, int n) {
    SourceChoice c;
    if (kind == "testbed") {
        ScenarioOptions opts = scenario_options(cfg);
        opts.state_dim = n;
        const Scenario sc = make_scenario(scenario, opts);
        c.model = sc.prior;
        c.truth = sc.truth;
        c.source = std::make_unique<TestbedSource>(sc.truth);
        return c;
    }
    if (kind != "wave" && kind != "analytic")
        throw ConfigError("unknown source '" + kind + "' (expected wave, analytic or testbed)");
    if (encoder_path.empty() || gp_path.empty())
        throw ConfigError("source '" + kind + "' needs --encoder and --gp");
    SimConfig sim = sim_config(cfg);
    sim.mode = parse_sim_mode(kind);
    auto vae = std::make_shared<VAEParams>(load_vae(encoder_path));
    c.model = load_gp_model(gp_path);
    PreprocessOptions opts;
    opts.log1p = cfg.get("sim.log1p", true);
    c.source = std::make_unique<ImageSource>(
        sim, [vae](const PowerSpectrum& s) { return encode(*vae, s).mu; }, vae->latent_dim, opts);
    return c;
}

int cmd_calibrate(const Globals& g, std::string source, const std::string& encoder,
                  const std::string& gp, std::string method, const std::string& x0_text,
                  std::string scenario) {
    const Config cfg = load_config(g);
    if (source.empty()) source = cfg.get("calibrate.source", std::string("testbed"));
    if (method.empty()) method = cfg.get("calibrate.method", std::string("full_em"));
    if (scenario.empty()) scenario = cfg.get("testbed.scenario", std::string("mismatch-0.3"));
    const int n = 3;
    const auto seed = cfg.get_u64("global.seed", 1);

    SourceChoice chosen = make_source(cfg, source, encoder, gp, scenario, n);
    Vec x0(n);
    const std::string x0_spec = x0_text.empty() ? cfg.get("calibrate.x0", std::string()) : x0_text;
    if (!x0_spec.empty()) {
        x0 = parse_vector(x0_spec, n, "--x0");
    } else {
        Rng rng(derive_seed(seed, 99));
        std::uniform_real_distribution<double> uni(-200.0, 200.0);
        for (int d = 0; d < n; ++d) x0[d] = uni(rng);
    }

    CalibrationConfig cc;
    cc.em = em_config(cfg);
    cc.method = parse_method(method);
    cc.seed = seed;
    cc.select_inputs = cfg.get("calibrate.select_inputs", true);
    cc.refine = cfg.get("calibrate.refine", true);
    cc.stop_on_convergence = cfg.get("calibrate.stop_on_convergence", true);

    const CalibrationTrace trace = run_calibration(*chosen.source, chosen.model, x0, cc);
    const fs::path dir = out_dir(cfg, ".");
    write_trace_csv(dir / "trace.csv", trace);
    const auto& last = trace.steps.back();
    std::cout << std::setprecision(6) << "true x0 = (" << x0.transpose() << ")\nestimate = ("
              << last.estimate.transpose() << ")\nerror = " << last.error << " after "
              << trace.steps.size() << " observations" << (trace.converged ? " (converged)" : "")
              << "\nwrote " << (dir / "trace.csv").string() << "\n";
    return 0;
}

int cmd_benchmark(const Globals& g, int runs, int horizon, int workers, const std::string& scenario,
                  const std::string& methods, const std::string& encoder, const std::string& gp) {
    Config cfg = load_config(g);
    if (runs > 0) cfg.set("benchmark.runs", std::to_string(runs));
    if (horizon > 0) cfg.set("benchmark.horizon", std::to_string(horizon));
    if (workers >= 0) cfg.set("benchmark.workers", std::to_string(workers));
    if (!scenario.empty()) cfg.set("benchmark.scenario", scenario);
    if (!methods.empty()) cfg.set("benchmark.methods", methods);
    const BenchmarkConfig bc = benchmark_config(cfg);
    const fs::path dir = out_dir(cfg, "bench_out");

    BenchmarkResult result;
    if (bc.source == "testbed") {
        result = run_benchmark(bc);
    } else {
        SourceChoice proto = make_source(cfg, bc.source, encoder, gp, bc.scenario, bc.state_dim);
        result = run_benchmark(
            bc,
            [&]() { return std::move(make_source(cfg, bc.source, encoder, gp, bc.scenario, bc.state_dim).source); },
            proto.model);
    }
    emit_results(result, dir);
    std::cout << std::setprecision(4);
    for (const auto& m : result.methods) {
        std::cout << std::left << std::setw(12) << to_string(m.method) << " median error: step " << bc.horizon / 2 << " = "
                  << m.quantiles(bc.horizon / 2, 0) << ", step " << bc.horizon << " = "
                  << m.quantiles(bc.horizon, 0) << " (failed runs: " << m.failed_runs() << ")\n";
    }
    std::cout << "wrote curves.csv, runs.csv, plot.svg, manifest.txt to " << dir.string() << "\n";
    return 0;
}

BasisSet basis_from_config(const Config& cfg, std::string family_name) {
    if (family_name.empty()) family_name = cfg.get("ident.family", std::string("symmetric_gaussian"));
    const BasisFamily family = parse_basis_family(family_name);
    const int n = cfg.get("ident.n", 1);
    auto rows = [n](const std::vector<double>& flat, const char* what) {
        if (flat.empty() || flat.size() % static_cast<std::size_t>(n) != 0)
            throw ConfigError(std::string("ident.") + what + ": need a multiple of n values");
        Mat m(static_cast<Eigen::Index>(flat.size()) / n, n);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (int d = 0; d < n; ++d) m(i, d) = flat[static_cast<std::size_t>(i * n + d)];
        return m;
    };
    const double width = cfg.get("ident.width", 1.0);
    switch (family) {
    case BasisFamily::symmetric_gaussian: return symmetric_gaussians(rows(cfg.get_list("ident.centers", {0.5, 2.0}), "centers"), width);
    case BasisFamily::symmetric_hat: return symmetric_hats(rows(cfg.get_list("ident.centers", {0.5, 2.0}), "centers"), width);
    case BasisFamily::shifted_hat: return shifted_hats(rows(cfg.get_list("ident.centers", {0.5, 2.0}), "centers"), width);
    case BasisFamily::cosine: return cosines(rows(cfg.get_list("ident.frequencies", {1.0, 2.0}), "frequencies"));
    case BasisFamily::custom: break;
    }
    throw ConfigError("ident-check: unsupported basis family");
}

int cmd_ident(const Globals& g, const std::string& family) {
    const Config cfg = load_config(g);
    const BasisSet basis = basis_from_config(cfg, family);
    const int m = basis.size();
    const auto theta_list = cfg.get_list("ident.theta", std::vector<double>(static_cast<std::size_t>(m), 1.0));
    if (static_cast<int>(theta_list.size()) != m) throw ConfigError("ident.theta: need one value per basis function");
    const Vec theta = Eigen::Map<const Vec>(theta_list.data(), m);

    struct Row {
        std::string check;
        bool passed;
        double value;
        std::string note;
    };
    std::vector<Row> rows;

    const EvennessReport c1 = check_evenness(basis);
    rows.push_back({"C1_evenness", c1.passed, c1.max_violation, "max |phi(x) - phi(-x)|"});
    FourierGrid fg;
    fg.points = cfg.get("ident.points", 129);
    fg.extent = cfg.get("ident.extent", 0.0);
    const SpectralProfile prof = sampled_fourier(basis, fg);
    const PeriodicityReport c2 = check_periodicity(prof, theta);
    rows.push_back({"C2_continuous_support", c2.passed, c2.min_offpeak_fraction, "min off-peak energy fraction"});
    const RichnessReport c3 = check_spectral_richness(prof);
    rows.push_back({"C3_spectral_richness", c3.passed, static_cast<double>(c3.rank), "numerical rank"});
    const SignalReport c4 = check_signal(prof, theta);
    rows.push_back({"C4_nontrivial_signal", c4.passed, c4.support_fraction, "fraction of bins with signal"});

    if (basis.period > 0.0) {
        const AmbiguityReport amb = demonstrate_ambiguity(basis, theta);
        const bool equal = std::abs(amb.objective_a - amb.objective_b) < 1e-8;
        rows.push_back({"periodic_ambiguity", equal, std::abs(amb.objective_a - amb.objective_b),
                        "objective gap between x0 and x0 + period"});
    } else {
        const double res = min_shift_residual(basis, theta, 0.1, 10.0);
        rows.push_back({"no_shift_equivalent", res >= 1e-3, res, "min residual over shifts in [0.1, 10]"});
    }
    UniquenessGrid ug;
    ug.points = cfg.get("ident.sweep_points", 9);
    ug.xi_step = cfg.get("ident.xi_step", basis.period > 0.0 ? basis.period / 4.0 : ug.xi_step);
    ug.theta_step = cfg.get("ident.theta_step", ug.theta_step);
    ug.probe_points = cfg.get("ident.probe_points", ug.probe_points);
    const double sweep_cells = std::pow(static_cast<double>(ug.points), basis.dim + m);
    if (basis.dim <= 2 && m <= 5 && sweep_cells <= 2e6) {
        const auto xi_list = cfg.get_list("ident.xi", std::vector<double>(static_cast<std::size_t>(basis.dim), 0.3));
        if (static_cast<int>(xi_list.size()) != basis.dim) throw ConfigError("ident.xi: need n values");
        const Vec xi = Eigen::Map<const Vec>(xi_list.data(), basis.dim);
        const UniquenessReport u = verify_uniqueness(basis, xi, theta, ug);
        rows.push_back({"uniqueness_sweep", u.passed, static_cast<double>(u.matching_cells),
                        "matching cells in " + std::to_string(u.cells)});
    }

    const fs::path dir = out_dir(cfg, ".");
    const fs::path file = dir / "verdicts.csv";
    std::ofstream os(file);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    os << "check,passed,value\n" << std::setprecision(10);
    for (const auto& r : rows) os << r.check << "," << (r.passed ? "true" : "false") << "," << r.value << "\n";
    if (!os) throw IoError("write failed for '" + file.string() + "'");

    std::cout << "basis " << to_string(basis.family) << ", n = " << basis.dim << ", m = " << m << "\n";
    for (const auto& r : rows)
        std::cout << "  " << std::left << std::setw(24) << r.check << (r.passed ? "PASS" : "FAIL") << "  "
                  << r.note << " = " << r.value << "\n";
    std::cout << "wrote " << file.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Aberration calibration by VAE-EM on simulated Ronchigrams"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_file, "INI configuration file");
    app.add_option("--seed", g.seed, "master seed (overrides config and RONCHI_SEED)");
    app.add_option("--out", g.out, "output path (overrides config and RONCHI_OUT)");

    int count = 400;
    double box = 200.0;
    auto* sim = app.add_subcommand("simulate", "simulate a labeled Ronchigram dataset");
    sim->add_option("--count", count, "number of images")->check(CLI::PositiveNumber);
    sim->add_option("--box", box, "states drawn uniformly from [-box, box]^3 (nm)");

    std::string data_dir, weights, gp_out;
    auto* train = app.add_subcommand("train-encoder", "train the VAE encoder on a dataset directory");
    train->add_option("--data", data_dir, "dataset directory written by simulate")->required();
    train->add_option("--weights", weights, "output weight container (default <out>/encoder.rvae)");
    train->add_option("--gp-out", gp_out, "also fit and write a GP model on the encoded dataset");

    std::string source, encoder, gp, method, x0, scenario;
    auto* cal = app.add_subcommand("calibrate", "run one calibration and write trace.csv");
    cal->add_option("--source", source, "wave | analytic | testbed");
    cal->add_option("--encoder", encoder, "encoder weights (image sources)");
    cal->add_option("--gp", gp, "GP model manifest (image sources)");
    cal->add_option("--method", method, "full_em | hard_em | fixed_prior");
    cal->add_option("--x0", x0, "true initial state, e.g. \"120,-40,15\"");
    cal->add_option("--scenario", scenario, "testbed scenario");

    int runs = 0, horizon = 0, workers = -1;
    std::string bench_scenario, methods, bench_encoder, bench_gp;
    auto* bench = app.add_subcommand("benchmark", "Monte-Carlo benchmark; writes curves/runs CSV and plot");
    bench->add_option("--runs", runs, "Monte-Carlo runs");
    bench->add_option("--horizon", horizon, "observations per run minus one");
    bench->add_option("--workers", workers, "worker threads (0 = available parallelism)");
    bench->add_option("--scenario", bench_scenario, "testbed scenario");
    bench->add_option("--methods", methods, "comma separated methods");
    bench->add_option("--encoder", bench_encoder, "encoder weights (image sources)");
    bench->add_option("--gp", bench_gp, "GP model manifest (image sources)");

    std::string family;
    auto* ident = app.add_subcommand("ident-check", "certify identifiability conditions for a basis");
    ident->add_option("--family", family, "symmetric_gaussian | symmetric_hat | cosine | shifted_hat");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*sim) return cmd_simulate(g, count, box);
        if (*train) return cmd_train(g, data_dir, weights, gp_out);
        if (*cal) return cmd_calibrate(g, source, encoder, gp, method, x0, scenario);
        if (*bench) return cmd_benchmark(g, runs, horizon, workers, bench_scenario, methods, bench_encoder, bench_gp);
        if (*ident) return cmd_ident(g, family);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const TrainingError& e) {
        std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
