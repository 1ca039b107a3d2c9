#include "parlens/photometric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace parlens {

namespace {

Image to_gray(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.height(), img.width(), 1);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            double acc = 0.0;
            for (int k = 0; k < img.channels(); ++k) acc += img.at(r, c, k);
            out.at(r, c) = acc / img.channels();
        }
    return out;
}

// Central-difference gradients with clamped borders.
void gradients(const Image& img, Image& gx, Image& gy) {
    const int h = img.height(), w = img.width();
    gx = Image(h, w, 1);
    gy = Image(h, w, 1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int c0 = std::max(0, c - 1), c1 = std::min(w - 1, c + 1);
            const int r0 = std::max(0, r - 1), r1 = std::min(h - 1, r + 1);
            gx.at(r, c) = (img.at(r, c1) - img.at(r, c0)) / (c1 - c0 > 0 ? c1 - c0 : 1);
            gy.at(r, c) = (img.at(r1, c) - img.at(r0, c)) / (r1 - r0 > 0 ? r1 - r0 : 1);
        }
}

// Affine map from level-l coordinates to full-resolution coordinates,
// matching the pixel-center convention of resample_bilinear.
Homography level_to_full(const Shape& level, const Shape& full) {
    Homography t;
    const double rx = static_cast<double>(full.cols) / level.cols;
    const double ry = static_cast<double>(full.rows) / level.rows;
    t.at(0, 0) = rx;
    t.at(0, 2) = 0.5 * rx - 0.5;
    t.at(1, 1) = ry;
    t.at(1, 2) = 0.5 * ry - 0.5;
    return t;
}

Eigen::Matrix3d to_eigen(const Homography& h) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = h.at(r, c);
    return m;
}

struct Evaluation {
    double mse = 0.0;
    std::size_t valid = 0;
};

// Mean squared intensity difference between moving warped by h and fixed,
// over pixels whose back-projection lands inside moving.
Evaluation evaluate(const Image& moving, const Image& fixed, const Homography& h) {
    const Eigen::Matrix3d w = to_eigen(h.inverse());
    Evaluation e;
    double sse = 0.0;
    for (int r = 0; r < fixed.height(); ++r)
        for (int c = 0; c < fixed.width(); ++c) {
            const Eigen::Vector3d u = w * Eigen::Vector3d(c, r, 1.0);
            if (std::abs(u.z()) < 1e-15) continue;
            const double px = u.x() / u.z();
            const double py = u.y() / u.z();
            if (px < 0.0 || px > moving.width() - 1.0 || py < 0.0 || py > moving.height() - 1.0)
                continue;
            const double diff = bilinear_sample(moving, py, px, 0) - fixed.at(r, c);
            sse += diff * diff;
            ++e.valid;
        }
    if (e.valid > 0) e.mse = sse / static_cast<double>(e.valid);
    return e;
}

void require_overlap(const Evaluation& e, const Image& fixed) {
    const double frac = static_cast<double>(e.valid) /
                        (static_cast<double>(fixed.height()) * fixed.width());
    if (frac < 0.25)
        throw ConvergenceError("photometric: less than 25% of pixels overlap");
}

// One pyramid level of Gauss-Newton. h is in this level's coordinates and
// is updated in place; returns the number of iterations taken.
int refine_level(const Image& moving, const Image& fixed, Homography& h, int max_iters) {
    Image gx, gy;
    gradients(moving, gx, gy);

    // Parameter order: the 8 row-major entries of the matrix, excluding the
    // bottom-right element which stays pinned at 1.
    constexpr int kParams = 8;
    const auto entry = [](int k) { return std::pair<int, int>{k / 3, k % 3}; };

    double prev_mse = std::numeric_limits<double>::infinity();
    int rising = 0;
    int iters = 0;
    Homography best = h;
    double best_mse = std::numeric_limits<double>::infinity();

    for (int it = 0; it < max_iters; ++it) {
        const Eigen::Matrix3d w = to_eigen(h.inverse());

        Eigen::Matrix<double, kParams, kParams> a = Eigen::Matrix<double, kParams, kParams>::Zero();
        Eigen::Matrix<double, kParams, 1> g = Eigen::Matrix<double, kParams, 1>::Zero();
        double sse = 0.0;
        std::size_t valid = 0;

        for (int r = 0; r < fixed.height(); ++r)
            for (int c = 0; c < fixed.width(); ++c) {
                const Eigen::Vector3d x(c, r, 1.0);
                const Eigen::Vector3d u = w * x;
                if (std::abs(u.z()) < 1e-15) continue;
                const double px = u.x() / u.z();
                const double py = u.y() / u.z();
                if (px < 0.0 || px > moving.width() - 1.0 ||
                    py < 0.0 || py > moving.height() - 1.0)
                    continue;

                const double res = bilinear_sample(moving, py, px, 0) - fixed.at(r, c);
                const double ix = bilinear_sample(gx, py, px, 0);
                const double iy = bilinear_sample(gy, py, px, 0);

                // d(h^-1)/dh_k = -W E_k W, so du_k = -u_b * W.col(a) for the
                // parameter at matrix entry (a, b).
                Eigen::Matrix<double, kParams, 1> jrow;
                for (int k = 0; k < kParams; ++k) {
                    const auto [ar, bc] = entry(k);
                    const Eigen::Vector3d du = -u(bc) * w.col(ar);
                    const double dpx = (du.x() - px * du.z()) / u.z();
                    const double dpy = (du.y() - py * du.z()) / u.z();
                    jrow(k) = ix * dpx + iy * dpy;
                }
                a.noalias() += jrow * jrow.transpose();
                g.noalias() += jrow * res;
                sse += res * res;
                ++valid;
            }

        Evaluation e;
        e.valid = valid;
        e.mse = valid > 0 ? sse / static_cast<double>(valid) : 0.0;
        require_overlap(e, fixed);

        if (e.mse < best_mse) {
            best_mse = e.mse;
            best = h;
        }
        if (e.mse > prev_mse + 1e-14 * (1.0 + prev_mse)) {
            if (++rising >= 5)
                throw ConvergenceError("photometric: residual rose for 5 consecutive iterations");
        } else {
            rising = 0;
        }
        prev_mse = e.mse;

        const Eigen::Matrix<double, kParams, 1> delta = a.ldlt().solve(-g);
        if (!delta.allFinite())
            throw ConvergenceError("photometric: normal equations unsolvable");
        for (int k = 0; k < kParams; ++k) {
            const auto [ar, bc] = entry(k);
            h.at(ar, bc) += delta(k);
        }
        ++iters;
        if (delta.cwiseAbs().maxCoeff() < 1e-12) break;
    }

    // Keep the best iterate seen at this level (the last step is unchecked).
    const Evaluation last = evaluate(moving, fixed, h);
    if (last.mse > best_mse) h = best;
    return iters;
}

} // namespace

PhotometricResult refine_homography_photometric(const Image& moving, const Image& fixed,
                                                const Homography& init, int iterations) {
    if (moving.empty() || fixed.empty())
        throw ValueError("photometric: empty image");
    if (iterations < 0)
        throw ValueError("photometric: negative iteration count");

    const Image m0 = to_gray(moving);
    const Image f0 = to_gray(fixed);

    // 3 pyramid levels unless the images are too small to halve twice.
    int levels = 3;
    const int min_dim = std::min({m0.height(), m0.width(), f0.height(), f0.width()});
    while (levels > 1 && (min_dim >> (levels - 1)) < 8) --levels;

    std::vector<Image> m_pyr{m0}, f_pyr{f0};
    for (int l = 1; l < levels; ++l) {
        const Image& pm = m_pyr.back();
        const Image& pf = f_pyr.back();
        m_pyr.push_back(resample_bilinear(pm, {(pm.height() + 1) / 2, (pm.width() + 1) / 2}));
        f_pyr.push_back(resample_bilinear(pf, {(pf.height() + 1) / 2, (pf.width() + 1) / 2}));
    }

    PhotometricResult result;
    const Evaluation init_eval = evaluate(m0, f0, init);
    require_overlap(init_eval, f0);
    result.initial_residual = init_eval.mse;

    Homography h = init;
    h.normalize();
    for (int l = levels - 1; l >= 0; --l) {
        const Homography up_m = level_to_full(m_pyr[static_cast<std::size_t>(l)].shape(), m0.shape());
        const Homography up_f = level_to_full(f_pyr[static_cast<std::size_t>(l)].shape(), f0.shape());
        Homography h_level = compose(up_f.inverse(), compose(h, up_m));
        h_level.normalize();
        result.iterations += refine_level(m_pyr[static_cast<std::size_t>(l)],
                                          f_pyr[static_cast<std::size_t>(l)], h_level, iterations);
        h = compose(up_f, compose(h_level, up_m.inverse()));
        h.normalize();
    }

    // Never report a result worse than the starting point.
    const Evaluation final_eval = evaluate(m0, f0, h);
    if (final_eval.mse <= result.initial_residual) {
        result.h = h;
        result.final_residual = final_eval.mse;
    } else {
        result.h = init;
        result.h.normalize();
        result.final_residual = result.initial_residual;
    }
    return result;
}

} // namespace parlens
