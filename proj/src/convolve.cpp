#include "parlens/convolve.hpp"

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <vector>

namespace parlens {

namespace {

// FFTW planning is not thread-safe; execution through the new-array
// interface is. Plans are cached per transform geometry and created with
// FFTW_ESTIMATE so results do not depend on planner timing.
class FftEngine {
public:
    static FftEngine& instance() {
        static FftEngine engine;
        return engine;
    }

    void forward(int rows, int cols, double* in, fftw_complex* out) {
        fftw_plan plan = plan_for(rows, cols, /*inverse=*/false);
        fftw_execute_dft_r2c(plan, in, out);
    }

    void inverse(int rows, int cols, fftw_complex* in, double* out) {
        fftw_plan plan = plan_for(rows, cols, /*inverse=*/true);
        fftw_execute_dft_c2r(plan, in, out);
    }

private:
    fftw_plan plan_for(int rows, int cols, bool inverse) {
        const std::tuple<int, int, bool> key{rows, cols, inverse};
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        const std::size_t n_real = static_cast<std::size_t>(rows) * cols;
        const std::size_t n_cplx = static_cast<std::size_t>(rows) * (cols / 2 + 1);
        double* scratch_r = fftw_alloc_real(n_real);
        fftw_complex* scratch_c = fftw_alloc_complex(n_cplx);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan plan = inverse
            ? fftw_plan_dft_c2r_2d(rows, cols, scratch_c, scratch_r, flags)
            : fftw_plan_dft_r2c_2d(rows, cols, scratch_r, scratch_c, flags);
        fftw_free(scratch_r);
        fftw_free(scratch_c);
        if (!plan) throw ValueError("fft: planner failed");
        plans_.emplace(key, plan);
        return plan;
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

// Single-channel full linear convolution of a (sr x sc) plane with a
// (kr x kc) kernel plane. No clamping; callers decide.
void conv_plane(const std::vector<double>& scene, int sr, int sc,
                const std::vector<double>& kernel, int kr, int kc,
                std::vector<double>& out) {
    const int out_r = sr + kr - 1;
    const int out_c = sc + kc - 1;
    const int pr = next_smooth_size(out_r);
    const int pc = next_smooth_size(out_c);
    const std::size_t n_real = static_cast<std::size_t>(pr) * pc;
    const std::size_t n_cplx = static_cast<std::size_t>(pr) * (pc / 2 + 1);

    std::vector<double> pad_a(n_real, 0.0), pad_b(n_real, 0.0);
    for (int r = 0; r < sr; ++r)
        std::memcpy(pad_a.data() + static_cast<std::size_t>(r) * pc, scene.data() + static_cast<std::size_t>(r) * sc,
                    sizeof(double) * sc);
    for (int r = 0; r < kr; ++r)
        std::memcpy(pad_b.data() + static_cast<std::size_t>(r) * pc, kernel.data() + static_cast<std::size_t>(r) * kc,
                    sizeof(double) * kc);

    std::vector<std::complex<double>> spec_a(n_cplx), spec_b(n_cplx);
    auto& fft = FftEngine::instance();
    fft.forward(pr, pc, pad_a.data(), reinterpret_cast<fftw_complex*>(spec_a.data()));
    fft.forward(pr, pc, pad_b.data(), reinterpret_cast<fftw_complex*>(spec_b.data()));

    const double scale = 1.0 / (static_cast<double>(pr) * pc);
    for (std::size_t i = 0; i < n_cplx; ++i) spec_a[i] *= spec_b[i] * scale;

    std::vector<double> full(n_real);
    fft.inverse(pr, pc, reinterpret_cast<fftw_complex*>(spec_a.data()), full.data());

    out.resize(static_cast<std::size_t>(out_r) * out_c);
    for (int r = 0; r < out_r; ++r)
        std::memcpy(out.data() + static_cast<std::size_t>(r) * out_c, full.data() + static_cast<std::size_t>(r) * pc,
                    sizeof(double) * out_c);
}

void extract_plane(const Image& img, int channel, std::vector<double>& plane) {
    plane.resize(static_cast<std::size_t>(img.height()) * img.width());
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            plane[static_cast<std::size_t>(r) * img.width() + c] = img.at(r, c, channel);
}

void check_channels(const Image& scene, const PointSpreadFunction& psf) {
    if (scene.empty() || psf.image.empty())
        throw ValueError("convolve: empty input");
    if (psf.image.channels() != 1 && psf.image.channels() != scene.channels())
        throw ShapeError("convolve: PSF channels incompatible with scene");
}

} // namespace

int next_smooth_size(int n) {
    if (n < 1) throw ValueError("next_smooth_size: n must be positive");
    for (int candidate = n;; ++candidate) {
        int m = candidate;
        for (int p : {2, 3, 5})
            while (m % p == 0) m /= p;
        if (m == 1) return candidate;
    }
}

Shape full_extent(const Shape& scene, const Shape& psf) {
    return {scene.rows + psf.rows - 1, scene.cols + psf.cols - 1};
}

Image convolve_linear(const Image& scene, const PointSpreadFunction& psf) {
    check_channels(scene, psf);
    const Shape ext = full_extent(scene.shape(), psf.image.shape());
    Image out(ext.rows, ext.cols, scene.channels());

    std::vector<double> scene_plane, psf_plane, conv;
    for (int k = 0; k < scene.channels(); ++k) {
        extract_plane(scene, k, scene_plane);
        extract_plane(psf.image, psf.image.channels() == 1 ? 0 : k, psf_plane);
        conv_plane(scene_plane, scene.height(), scene.width(), psf_plane,
                   psf.image.height(), psf.image.width(), conv);
        for (int r = 0; r < ext.rows; ++r)
            for (int c = 0; c < ext.cols; ++c) {
                double v = conv[static_cast<std::size_t>(r) * ext.cols + c];
                // FFT round-off can leave a whisker of negativity on what is
                // mathematically a non-negative result.
                if (v < 0.0 && v >= -1e-9) v = 0.0;
                out.at(r, c, k) = v;
            }
    }
    return out;
}

Image convolve_linear_raw(const Image& a, const Image& b) {
    if (a.empty() || b.empty())
        throw ValueError("convolve: empty input");
    if (a.channels() != 1 || b.channels() != 1)
        throw ShapeError("convolve_linear_raw: single-channel planes only");
    const Shape ext = full_extent(a.shape(), b.shape());
    Image out(ext.rows, ext.cols, 1);

    std::vector<double> plane_a, plane_b, conv;
    extract_plane(a, 0, plane_a);
    extract_plane(b, 0, plane_b);
    conv_plane(plane_a, a.height(), a.width(), plane_b, b.height(), b.width(), conv);
    for (int r = 0; r < ext.rows; ++r)
        for (int c = 0; c < ext.cols; ++c)
            out.at(r, c, 0) = conv[static_cast<std::size_t>(r) * ext.cols + c];
    return out;
}

Image forward(const Image& scene, const PointSpreadFunction& psf, const PixelGrid& sensor_window) {
    check_channels(scene, psf);
    const Shape ext = full_extent(scene.shape(), psf.image.shape());
    if (!sensor_window.inside(ext))
        throw ShapeError("forward: sensor window outside convolution extent");
    return crop(convolve_linear(scene, psf), sensor_window);
}

Image adjoint(const Image& residual, const PointSpreadFunction& psf,
              const PixelGrid& sensor_window, const Shape& scene_shape) {
    check_channels(residual, psf);
    if (residual.shape() != sensor_window.shape())
        throw ShapeError("adjoint: residual does not match sensor window");
    const Shape ext = full_extent(scene_shape, psf.image.shape());
    if (!sensor_window.inside(ext))
        throw ShapeError("adjoint: sensor window outside convolution extent");

    const Image embedded = embed(residual, ext, sensor_window);
    const int kr = psf.image.height();
    const int kc = psf.image.width();
    Image out(scene_shape.rows, scene_shape.cols, residual.channels());

    std::vector<double> res_plane, flipped(static_cast<std::size_t>(kr) * kc), conv;
    for (int k = 0; k < residual.channels(); ++k) {
        extract_plane(embedded, k, res_plane);
        const int pk = psf.image.channels() == 1 ? 0 : k;
        for (int r = 0; r < kr; ++r)
            for (int c = 0; c < kc; ++c)
                flipped[static_cast<std::size_t>(r) * kc + c] = psf.image.at(kr - 1 - r, kc - 1 - c, pk);
        conv_plane(res_plane, ext.rows, ext.cols, flipped, kr, kc, conv);
        // conv extent is ext + psf - 1; the adjoint of zero-padding picks the
        // scene-aligned block starting at (psf - 1).
        const int conv_cols = ext.cols + kc - 1;
        for (int r = 0; r < scene_shape.rows; ++r)
            for (int c = 0; c < scene_shape.cols; ++c)
                out.at(r, c, k) = conv[static_cast<std::size_t>(r + kr - 1) * conv_cols + (c + kc - 1)];
    }
    return out;
}

} // namespace parlens
