#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ronchi/bench.hpp"
#include "ronchi/encoder.hpp"
#include "ronchi/em.hpp"
#include "ronchi/optics.hpp"
#include "ronchi/testbed.hpp"

namespace ronchi {

/// INI-style key/value file with one section per module:
///
///   [global]     seed, out
///   [sim]        side, wavelength, aperture_semiangle, dose, phase_screen_seed, mode
///   [encoder]    latent_dim, pool, hidden, learning_rate, momentum, batch_size, epochs, ...
///   [em]         keep_fraction, perturb_fraction, uniform_fraction, sigma, ...
///   [testbed]    extent, knots_per_axis, feature_lengthscale, features, noise_std, seed
///   [benchmark]  runs, n, source, scenario, box, horizon, workers, methods
///   [ident]      family, n, centers, width, frequencies, theta, points, ...
///
/// '#' and ';' start comments. RONCHI_SEED and RONCHI_OUT override global.seed
/// and global.out.
class Config {
public:
    Config() = default;
    static Config load(const std::filesystem::path& file);  // IoError / ConfigError
    static Config parse(const std::string& text);            // ConfigError

    void apply_environment();

    bool has(const std::string& key) const;  // "section.key"
    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    int get(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_words(const std::string& key,
                                       const std::vector<std::string>& fallback) const;
    void set(const std::string& key, const std::string& value);

    // Throws ConfigError for keys outside the documented set.
    void check_known_keys() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;  // "section.key" -> value
};

SimConfig sim_config(const Config& cfg);
EMConfig em_config(const Config& cfg);
ScenarioOptions scenario_options(const Config& cfg);
TrainConfig train_config(const Config& cfg);
BenchmarkConfig benchmark_config(const Config& cfg);

} // namespace ronchi
