#pragma once

#include <complex>
#include <vector>

namespace ronchi::fft {

using Complex = std::complex<double>;

// In-place unnormalized 2D DFT of a row-major side x side array.
// forward: X[k] = sum_r x[r] exp(-2 pi i k.r / side); inverse uses +i and no 1/side^2.
void transform_2d(std::vector<Complex>& data, int side, bool forward);

// |DFT|^2 of a real row-major side x side array, natural (uncentered) layout.
// Computed from the half-spectrum of a real-to-complex transform and mirrored,
// so out[k] == out[-k] holds bit-exactly.
std::vector<double> real_power_2d(const std::vector<double>& data, int side);

// Swaps quadrants so that index 0 moves to the grid center (side/2, side/2).
template <class T>
void shift_center(std::vector<T>& data, int side) {
    const int h = side / 2;
    std::vector<T> out(data.size());
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            out[static_cast<std::size_t>((r + h) % side) * side + (c + h) % side] =
                data[static_cast<std::size_t>(r) * side + c];
    data.swap(out);
}

// Inverse of shift_center (identical for even side).
template <class T>
void unshift_center(std::vector<T>& data, int side) {
    const int h = side / 2;
    std::vector<T> out(data.size());
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            out[static_cast<std::size_t>(r) * side + c] =
                data[static_cast<std::size_t>((r + h) % side) * side + (c + h) % side];
    data.swap(out);
}

} // namespace ronchi::fft
