#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace ronchi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Aberration coefficients in nm. Default ordering for n = 3 is (C1, A1x, A1y);
/// the zero vector is a perfectly calibrated column.
struct AberrationState {
    Vec coeffs;

    AberrationState() = default;
    explicit AberrationState(Vec c) : coeffs(std::move(c)) {}
    AberrationState(std::initializer_list<double> c)
        : coeffs(Eigen::Map<const Vec>(c.begin(), static_cast<Eigen::Index>(c.size()))) {}

    Eigen::Index dim() const { return coeffs.size(); }
    bool finite() const { return coeffs.allFinite(); }
    AberrationState operator-() const { return AberrationState(Vec(-coeffs)); }
};

/// Square image stored row-major: value(r, c) = values[r * side + c].
template <class T>
struct Grid {
    int side = 0;
    std::vector<T> values;

    Grid() = default;
    explicit Grid(int s, T fill = T{}) : side(s), values(static_cast<std::size_t>(s) * s, fill) {}

    T& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * side + c]; }
    const T& operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * side + c]; }
    std::size_t size() const { return values.size(); }
};

using RealGrid = Grid<double>;

/// Derives an independent stream seed from a master seed and a stream index
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace ronchi
