#include "ronchi/grid_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ronchi/errors.hpp"

namespace ronchi::io {

namespace fs = std::filesystem;

namespace {

template <class U>
void put_le(std::ostream& os, U v) {
    std::array<char, sizeof(U)> bytes;
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& is) {
    std::array<unsigned char, sizeof(U)> bytes;
    is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!is) throw IoError("unexpected end of binary stream");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    return os;
}

std::ifstream open_in(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot open '" + file.string() + "' for reading");
    return is;
}

void check_size(const fs::path& file, std::size_t expected_bytes) {
    std::error_code ec;
    const auto size = fs::file_size(file, ec);
    if (ec) throw IoError("cannot stat '" + file.string() + "'");
    if (size != expected_bytes)
        throw IoError("'" + file.string() + "' has " + std::to_string(size) + " bytes, expected " +
                      std::to_string(expected_bytes));
}

} // namespace

void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
std::uint32_t get_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
std::uint64_t get_u64(std::istream& is) { return get_le<std::uint64_t>(is); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

void write_counts(const fs::path& file, const Grid<std::uint32_t>& counts) {
    auto os = open_out(file);
    for (std::uint32_t v : counts.values) put_le(os, v);
    if (!os) throw IoError("write failed for '" + file.string() + "'");
}

Grid<std::uint32_t> read_counts(const fs::path& file, int side) {
    Grid<std::uint32_t> g(side, 0);
    check_size(file, g.size() * 4);
    auto is = open_in(file);
    for (auto& v : g.values) v = get_le<std::uint32_t>(is);
    return g;
}

void write_spectrum(const fs::path& file, const PowerSpectrum& spectrum) {
    auto os = open_out(file);
    for (double v : spectrum.values) put_le(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    if (!os) throw IoError("write failed for '" + file.string() + "'");
}

PowerSpectrum read_spectrum(const fs::path& file, int side) {
    PowerSpectrum ps;
    ps.side = side;
    ps.values.resize(static_cast<std::size_t>(side) * side);
    check_size(file, ps.values.size() * 4);
    auto is = open_in(file);
    for (auto& v : ps.values) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
    return ps;
}

void write_metadata(const fs::path& dir, const std::vector<DatasetRecord>& records) {
    const fs::path file = dir / "metadata.tsv";
    std::ofstream os(file);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    const auto n = records.empty() ? Eigen::Index{0} : records.front().state.dim();
    os << "file\tseed\tside\twavelength\taperture_semiangle\tdose\tphase_screen_seed\tmode";
    for (Eigen::Index i = 0; i < n; ++i) os << "\tx" << i;
    os << '\n';
    os << std::setprecision(17);
    for (const auto& r : records) {
        if (r.state.dim() != n) throw ShapeError("write_metadata: mixed state dimensions");
        os << r.file << '\t' << r.seed << '\t' << r.config.side << '\t' << r.config.wavelength << '\t'
           << r.config.aperture_semiangle << '\t' << r.config.dose << '\t'
           << r.config.phase_screen_seed << '\t' << to_string(r.config.mode);
        for (Eigen::Index i = 0; i < n; ++i) os << '\t' << r.state.coeffs[i];
        os << '\n';
    }
    if (!os) throw IoError("write failed for '" + file.string() + "'");
}

std::vector<DatasetRecord> read_metadata(const fs::path& dir) {
    const fs::path file = dir / "metadata.tsv";
    std::ifstream is(file);
    if (!is) throw IoError("cannot open '" + file.string() + "'");
    std::string header;
    if (!std::getline(is, header)) throw IoError("empty metadata table '" + file.string() + "'");
    std::istringstream hs(header);
    std::string col;
    int columns = 0;
    while (std::getline(hs, col, '\t')) ++columns;
    const int n = columns - 8;
    if (n < 1) throw IoError("metadata table has no state columns");

    std::vector<DatasetRecord> records;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        DatasetRecord r;
        std::string mode;
        ls >> r.file >> r.seed >> r.config.side >> r.config.wavelength >> r.config.aperture_semiangle >>
            r.config.dose >> r.config.phase_screen_seed >> mode;
        Vec x(n);
        for (int i = 0; i < n; ++i) ls >> x[i];
        if (!ls) throw IoError("malformed metadata row: " + line);
        r.config.mode = parse_sim_mode(mode);
        r.state = AberrationState(x);
        records.push_back(std::move(r));
    }
    return records;
}

void write_dataset(const fs::path& dir, const Dataset& dataset) {
    if (dataset.records.size() != dataset.images.size())
        throw ShapeError("write_dataset: records and images differ in length");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
    for (std::size_t i = 0; i < dataset.images.size(); ++i)
        write_counts(dir / dataset.records[i].file, dataset.images[i].counts);
    write_metadata(dir, dataset.records);
}

Dataset read_dataset(const fs::path& dir) {
    Dataset ds;
    ds.records = read_metadata(dir);
    ds.images.reserve(ds.records.size());
    for (const auto& r : ds.records) {
        Ronchigram y;
        y.counts = read_counts(dir / r.file, r.config.side);
        y.state_tag = r.state;
        ds.images.push_back(std::move(y));
    }
    return ds;
}

} // namespace ronchi::io

namespace ronchi::io {

Dataset simulate_dataset(const SimConfig& config, int count, double box, std::uint64_t seed, int n) {
    config.validate();
    if (count < 0) throw ConfigError("simulate_dataset: negative count");
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(-box, box);
    Dataset ds;
    for (int i = 0; i < count; ++i) {
        Vec x(n);
        for (int d = 0; d < n; ++d) x[d] = uni(rng);
        DatasetRecord r;
        std::ostringstream name;
        name << "ronchigram_" << std::setw(5) << std::setfill('0') << i << ".bin";
        r.file = name.str();
        r.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        r.config = config;
        r.state = AberrationState(x);
        Ronchigram y = sample_ronchigram(expected_image(r.state, config), r.seed);
        y.state_tag = r.state;
        ds.records.push_back(std::move(r));
        ds.images.push_back(std::move(y));
    }
    return ds;
}

} // namespace ronchi::io
