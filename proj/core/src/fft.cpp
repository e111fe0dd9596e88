#include "ronchi/fft.hpp"

#include <algorithm>
#include <mutex>

#include <fftw3.h>

#include "ronchi/errors.hpp"

namespace ronchi::fft {

namespace {
// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace

void transform_2d(std::vector<Complex>& data, int side, bool forward) {
    if (side <= 0 || data.size() != static_cast<std::size_t>(side) * side)
        throw ShapeError("fft: buffer size does not match side*side");

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * data.size()));
    if (buf == nullptr) throw NumericError("fft: allocation failed");

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_2d(side, side, buf, buf, forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    }
    std::copy(data.begin(), data.end(), reinterpret_cast<Complex*>(buf));
    fftw_execute(plan);
    std::copy(reinterpret_cast<Complex*>(buf), reinterpret_cast<Complex*>(buf) + data.size(),
              data.begin());
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
}

} // namespace ronchi::fft

namespace ronchi::fft {

std::vector<double> real_power_2d(const std::vector<double>& data, int side) {
    if (side <= 0 || data.size() != static_cast<std::size_t>(side) * side)
        throw ShapeError("fft: buffer size does not match side*side");

    const int half = side / 2 + 1;
    auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * data.size()));
    auto* out = static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(side) * half));
    if (in == nullptr || out == nullptr) throw NumericError("fft: allocation failed");

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_r2c_2d(side, side, in, out, FFTW_ESTIMATE);
    }
    std::copy(data.begin(), data.end(), in);
    fftw_execute(plan);

    std::vector<double> power(data.size());
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < half; ++c) {
            const fftw_complex& v = out[static_cast<std::size_t>(r) * half + c];
            const double p = v[0] * v[0] + v[1] * v[1];
            power[static_cast<std::size_t>(r) * side + c] = p;
            const int mr = (side - r) % side;
            const int mc = (side - c) % side;
            power[static_cast<std::size_t>(mr) * side + mc] = p;
        }
    }
    // Self-mirrored columns (0 and side/2) get both entries from the later row,
    // so every mirrored pair holds the same value.
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return power;
}

} // namespace ronchi::fft
