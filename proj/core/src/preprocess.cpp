#include "ronchi/preprocess.hpp"

#include <cmath>
#include <numbers>

#include "ronchi/errors.hpp"
#include "ronchi/fft.hpp"

namespace ronchi {

namespace {

void require_square(const RealGrid& image, const char* who) {
    if (image.side <= 0 || image.values.size() != static_cast<std::size_t>(image.side) * image.side)
        throw ShapeError(std::string(who) + ": image is not a square grid");
}

} // namespace

RealGrid hann_window(const RealGrid& image) {
    require_square(image, "hann_window");
    const int n = image.side;
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (n > 1) {
        for (int i = 0; i < n; ++i)
            w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
    }
    RealGrid out(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) out(r, c) = image(r, c) * w[r] * w[c];
    return out;
}

PowerSpectrum power_spectrum(const RealGrid& image) {
    require_square(image, "power_spectrum");
    PowerSpectrum ps;
    ps.side = image.side;
    ps.values = fft::real_power_2d(image.values, image.side);
    fft::shift_center(ps.values, ps.side);
    return ps;
}

PowerSpectrum preprocess(const RealGrid& image, const PreprocessOptions& opts) {
    PowerSpectrum ps = power_spectrum(hann_window(image));
    if (opts.log1p)
        for (double& v : ps.values) v = std::log1p(v);
    return ps;
}

PowerSpectrum preprocess(const Ronchigram& y, const PreprocessOptions& opts) {
    RealGrid image(y.counts.side);
    for (std::size_t i = 0; i < image.values.size(); ++i)
        image.values[i] = static_cast<double>(y.counts.values[i]);
    return preprocess(image, opts);
}

} // namespace ronchi
