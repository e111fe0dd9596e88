#pragma once

#include "ronchi/optics.hpp"
#include "ronchi/types.hpp"

namespace ronchi {

/// Fourier power spectrum of an image, DC at (side/2, side/2).
struct PowerSpectrum {
    int side = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * side + c]; }
};

struct PreprocessOptions {
    bool log1p = true;  // dynamic-range compression applied after squaring
};

// Raw (unnormalized) Hann taper on both axes. Throws ShapeError if not square.
RealGrid hann_window(const RealGrid& image);

// |2D DFT|^2 with DC centered; exactly point-symmetric for real input.
PowerSpectrum power_spectrum(const RealGrid& image);

// Window -> DFT -> squared modulus -> optional log1p.
PowerSpectrum preprocess(const Ronchigram& y, const PreprocessOptions& opts = {});
PowerSpectrum preprocess(const RealGrid& image, const PreprocessOptions& opts = {});

// Index of the frequency -q for the centered layout.
inline int mirror_index(int i, int side) { return (side - i) % side; }

} // namespace ronchi
