#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ronchi/optics.hpp"
#include "ronchi/preprocess.hpp"

namespace ronchi::io {

// Flat binary grids: row-major, little-endian, no header. Counts are uint32,
// spectra float32. The side length comes from the sidecar metadata.
void write_counts(const std::filesystem::path& file, const Grid<std::uint32_t>& counts);
Grid<std::uint32_t> read_counts(const std::filesystem::path& file, int side);
void write_spectrum(const std::filesystem::path& file, const PowerSpectrum& spectrum);
PowerSpectrum read_spectrum(const std::filesystem::path& file, int side);

// One row of metadata.tsv. Columns (tab separated, header line first):
//   file seed side wavelength aperture_semiangle dose phase_screen_seed mode x0 .. x{n-1}
struct DatasetRecord {
    std::string file;
    std::uint64_t seed = 0;
    SimConfig config;
    AberrationState state;
};

void write_metadata(const std::filesystem::path& dir, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_metadata(const std::filesystem::path& dir);

struct Dataset {
    std::vector<DatasetRecord> records;
    std::vector<Ronchigram> images;
};

// Writes ronchigram_NNNNN.bin files plus metadata.tsv into dir (created if needed).
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

// Little-endian primitives shared by the binary containers.
void put_u32(std::ostream& os, std::uint32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
std::uint32_t get_u32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);

} // namespace ronchi::io

namespace ronchi::io {

// Draws `count` states uniformly from [-box, box]^n and simulates one Ronchigram
// each. Image i uses noise seed derive_seed(seed, i).
Dataset simulate_dataset(const SimConfig& config, int count, double box, std::uint64_t seed,
                         int n = 3);

} // namespace ronchi::io
