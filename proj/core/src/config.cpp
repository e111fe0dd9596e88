#include "ronchi/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ronchi/errors.hpp"

namespace ronchi {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"global", {"seed", "out"}},
        {"sim", {"side", "wavelength", "aperture_semiangle", "dose", "phase_screen_seed", "mode", "log1p"}},
        {"encoder",
         {"kind", "latent_dim", "pool", "hidden", "learning_rate", "momentum", "batch_size", "epochs",
          "seed", "grad_clip", "dataset_size", "box", "gp_knots", "gp_extent"}},
        {"em",
         {"keep_fraction", "perturb_fraction", "uniform_fraction", "sigma", "perturb_scales", "state_box",
          "candidate_count", "input_bound", "input_samples", "em_iterations", "horizon",
          "convergence_threshold", "convergence_patience", "mirror_mass_threshold"}},
        {"testbed",
         {"extent", "knots_per_axis", "feature_lengthscale", "mismatch_lengthscale", "features", "noise_std", "probe_box",
          "probe_points", "seed", "scenario", "latent_dim"}},
        {"benchmark",
         {"runs", "n", "source", "scenario", "box", "horizon", "workers", "methods", "stop_on_convergence"}},
        {"ident",
         {"family", "n", "centers", "width", "frequencies", "theta", "xi", "points", "extent", "sweep_points",
          "xi_step", "theta_step", "probe_points"}},
        {"calibrate", {"source", "method", "x0", "select_inputs", "refine", "stop_on_convergence"}},
    };
    return keys;
}

template <class T>
T convert(const std::string& key, const std::string& value) {
    try {
        return boost::lexical_cast<T>(boost::algorithm::trim_copy(value));
    } catch (const boost::bad_lexical_cast&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
    }
}

} // namespace

Config Config::parse(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    Config cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config key '" + section + "' is outside any section");
        for (const auto& [key, value] : body) cfg.entries_.emplace_back(section + "." + key, value.data());
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot read config file '" + file.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

void Config::apply_environment() {
    if (const char* seed = std::getenv("RONCHI_SEED")) set("global.seed", seed);
    if (const char* out = std::getenv("RONCHI_OUT")) set("global.out", out);
}

bool Config::has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

void Config::set(const std::string& key, const std::string& value) {
    for (auto& e : entries_)
        if (e.first == key) {
            e.second = value;
            return;
        }
    entries_.emplace_back(key, value);
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
    for (const auto& e : entries_)
        if (e.first == key) return boost::algorithm::trim_copy(e.second);
    return fallback;
}

double Config::get(const std::string& key, double fallback) const {
    return has(key) ? convert<double>(key, get(key, std::string())) : fallback;
}

int Config::get(const std::string& key, int fallback) const {
    return has(key) ? convert<int>(key, get(key, std::string())) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? convert<std::uint64_t>(key, get(key, std::string())) : fallback;
}

bool Config::get(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, std::string());
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::string v = get(key, std::string());
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream is(v);
    std::vector<double> out;
    std::string word;
    while (is >> word) out.push_back(convert<double>(key, word));
    return out;
}

std::vector<std::string> Config::get_words(const std::string& key,
                                           const std::vector<std::string>& fallback) const {
    if (!has(key)) return fallback;
    std::string v = get(key, std::string());
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream is(v);
    std::vector<std::string> out;
    std::string word;
    while (is >> word) out.push_back(word);
    return out;
}

void Config::check_known_keys() const {
    for (const auto& [key, value] : entries_) {
        const auto dot = key.find('.');
        const auto section = known_keys().find(key.substr(0, dot));
        if (section == known_keys().end())
            throw ConfigError("unknown config section '[" + key.substr(0, dot) + "]'");
        if (!section->second.contains(key.substr(dot + 1)))
            throw ConfigError("unknown config key '" + key + "'");
    }
}

SimConfig sim_config(const Config& cfg) {
    SimConfig s;
    s.side = cfg.get("sim.side", s.side);
    s.wavelength = cfg.get("sim.wavelength", s.wavelength);
    s.aperture_semiangle = cfg.get("sim.aperture_semiangle", s.aperture_semiangle);
    s.dose = cfg.get("sim.dose", s.dose);
    s.phase_screen_seed = cfg.get_u64("sim.phase_screen_seed", s.phase_screen_seed);
    s.mode = parse_sim_mode(cfg.get("sim.mode", to_string(s.mode)));
    s.validate();
    return s;
}

EMConfig em_config(const Config& cfg) {
    EMConfig e;
    e.keep_fraction = cfg.get("em.keep_fraction", e.keep_fraction);
    e.perturb_fraction = cfg.get("em.perturb_fraction", e.perturb_fraction);
    e.uniform_fraction = cfg.get("em.uniform_fraction", e.uniform_fraction);
    e.sigma = cfg.get("em.sigma", e.sigma);
    e.perturb_scales = cfg.get_list("em.perturb_scales", e.perturb_scales);
    e.state_box = cfg.get("em.state_box", e.state_box);
    e.candidate_count = cfg.get("em.candidate_count", e.candidate_count);
    e.input_bound = cfg.get("em.input_bound", e.input_bound);
    e.input_samples = cfg.get("em.input_samples", e.input_samples);
    e.em_iterations = cfg.get("em.em_iterations", e.em_iterations);
    e.horizon = cfg.get("em.horizon", e.horizon);
    e.convergence_threshold = cfg.get("em.convergence_threshold", e.convergence_threshold);
    e.convergence_patience = cfg.get("em.convergence_patience", e.convergence_patience);
    e.mirror_mass_threshold = cfg.get("em.mirror_mass_threshold", e.mirror_mass_threshold);
    e.validate();
    return e;
}

ScenarioOptions scenario_options(const Config& cfg) {
    ScenarioOptions o;
    o.latent_dim = cfg.get("testbed.latent_dim", o.latent_dim);
    o.extent = cfg.get("testbed.extent", o.extent);
    o.knots_per_axis = cfg.get("testbed.knots_per_axis", o.knots_per_axis);
    o.feature_lengthscale = cfg.get("testbed.feature_lengthscale", o.feature_lengthscale);
    o.mismatch_lengthscale = cfg.get("testbed.mismatch_lengthscale", o.mismatch_lengthscale);
    o.features = cfg.get("testbed.features", o.features);
    o.noise_std = cfg.get("testbed.noise_std", o.noise_std);
    o.probe_box = cfg.get("testbed.probe_box", o.probe_box);
    o.probe_points = cfg.get("testbed.probe_points", o.probe_points);
    o.seed = cfg.get_u64("testbed.seed", o.seed);
    return o;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig t;
    t.learning_rate = cfg.get("encoder.learning_rate", t.learning_rate);
    t.momentum = cfg.get("encoder.momentum", t.momentum);
    t.batch_size = cfg.get("encoder.batch_size", t.batch_size);
    t.epochs = cfg.get("encoder.epochs", t.epochs);
    t.seed = cfg.get_u64("encoder.seed", t.seed);
    t.grad_clip = cfg.get("encoder.grad_clip", t.grad_clip);
    return t;
}

BenchmarkConfig benchmark_config(const Config& cfg) {
    BenchmarkConfig b;
    b.runs = cfg.get("benchmark.runs", b.runs);
    b.state_dim = cfg.get("benchmark.n", b.state_dim);
    b.source = cfg.get("benchmark.source", b.source);
    b.scenario = cfg.get("benchmark.scenario", b.scenario);
    b.box = cfg.get("benchmark.box", b.box);
    b.horizon = cfg.get("benchmark.horizon", b.horizon);
    b.workers = cfg.get("benchmark.workers", b.workers);
    b.stop_on_convergence = cfg.get("benchmark.stop_on_convergence", b.stop_on_convergence);
    if (cfg.has("benchmark.methods")) {
        b.methods.clear();
        for (const auto& m : cfg.get_words("benchmark.methods", {})) b.methods.push_back(parse_method(m));
    }
    b.seed = cfg.get_u64("global.seed", b.seed);
    b.em = em_config(cfg);
    b.scenario_options = scenario_options(cfg);
    b.validate();
    return b;
}

} // namespace ronchi
