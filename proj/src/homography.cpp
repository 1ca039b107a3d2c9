#include "parlens/homography.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace parlens {

namespace {

Eigen::Matrix3d to_eigen(const Homography& h) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = h.at(r, c);
    return m;
}

Homography from_eigen(const Eigen::Matrix3d& m) {
    Homography h;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.at(r, c) = m(r, c);
    h.normalize();
    return h;
}

// Similarity that moves the centroid to the origin and scales the mean
// distance from it to sqrt(2). Conditioning step for the DLT.
Eigen::Matrix3d hartley_transform(const std::vector<Point2>& pts) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());

    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - mx, p.y - my);
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;

    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = s;
    t(1, 1) = s;
    t(0, 2) = -s * mx;
    t(1, 2) = -s * my;
    return t;
}

Point2 apply_eigen(const Eigen::Matrix3d& m, const Point2& p) {
    const Eigen::Vector3d v = m * Eigen::Vector3d(p.x, p.y, 1.0);
    if (std::abs(v.z()) < 1e-15)
        throw ValueError("homography: point maps to infinity");
    return {v.x() / v.z(), v.y() / v.z()};
}

} // namespace

void Homography::normalize() {
    const double w = m[8];
    if (std::abs(w) < 1e-15) return;
    for (double& v : m) v /= w;
}

Point2 Homography::apply(const Point2& p) const {
    return apply_eigen(to_eigen(*this), p);
}

double Homography::determinant() const {
    return to_eigen(*this).determinant();
}

Homography Homography::inverse() const {
    const Eigen::Matrix3d m = to_eigen(*this);
    if (std::abs(m.determinant()) < 1e-12)
        throw ValueError("homography: singular matrix");
    return from_eigen(Eigen::Matrix3d(m.inverse()));
}

nlohmann::json Homography::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        rows.push_back({at(r, 0), at(r, 1), at(r, 2)});
    return {{"matrix", rows}};
}

Homography Homography::from_json(const nlohmann::json& j) {
    const auto& rows = j.at("matrix");
    if (!rows.is_array() || rows.size() != 3)
        throw ConfigError("homography: expected 3x3 matrix");
    Homography h;
    for (int r = 0; r < 3; ++r) {
        const auto& row = rows.at(r);
        if (!row.is_array() || row.size() != 3)
            throw ConfigError("homography: expected 3x3 matrix");
        for (int c = 0; c < 3; ++c) h.at(r, c) = row.at(c).get<double>();
    }
    return h;
}

Homography compose(const Homography& a, const Homography& b) {
    return from_eigen(Eigen::Matrix3d(to_eigen(a) * to_eigen(b)));
}

Homography estimate_homography_dlt(const std::vector<Point2>& src,
                                   const std::vector<Point2>& dst) {
    if (src.size() != dst.size())
        throw ValueError("dlt: correspondence lists differ in length");
    if (src.size() < 4)
        throw ValueError("dlt: need at least 4 correspondences");

    const Eigen::Matrix3d t_src = hartley_transform(src);
    const Eigen::Matrix3d t_dst = hartley_transform(dst);

    const std::size_t n = src.size();
    Eigen::MatrixXd a(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 s = apply_eigen(t_src, src[i]);
        const Point2 d = apply_eigen(t_dst, dst[i]);
        const Eigen::Index r = static_cast<Eigen::Index>(2 * i);
        a.row(r) << -s.x, -s.y, -1, 0, 0, 0, d.x * s.x, d.x * s.y, d.x;
        a.row(r + 1) << 0, 0, 0, -s.x, -s.y, -1, d.y * s.x, d.y * s.y, d.y;
    }

    // FullV: with the minimal 4 correspondences the system is 8x9 and the
    // null direction lives in the 9th right-singular vector, which a thin
    // decomposition would not compute.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    // A homography has 8 dof; the system must have exactly one (near-)null
    // direction. A second vanishing singular value means the points were
    // degenerate (e.g. collinear).
    const auto& sv = svd.singularValues();
    if (sv(7) < 1e-9 * sv(0))
        throw ConvergenceError("dlt: degenerate point configuration");

    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

    const Eigen::Matrix3d full = t_dst.inverse() * hn * t_src;
    Homography result = from_eigen(full);
    if (std::abs(result.determinant()) < 1e-12)
        throw ConvergenceError("dlt: estimated homography is singular");
    return result;
}

RansacResult estimate_homography_ransac(const std::vector<Point2>& src,
                                        const std::vector<Point2>& dst,
                                        const RansacOptions& options) {
    if (src.size() != dst.size())
        throw ValueError("ransac: correspondence lists differ in length");
    if (src.size() < 4)
        throw ValueError("ransac: need at least 4 correspondences");
    if (options.inlier_threshold_px <= 0.0)
        throw ValueError("ransac: inlier threshold must be positive");

    const std::size_t n = src.size();
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);

    auto collinear = [](const Point2& a, const Point2& b, const Point2& c) {
        const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        return std::abs(area) < 1e-9;
    };

    std::vector<bool> best_mask(n, false);
    std::size_t best_count = 0;
    int trials_needed = options.max_iterations;
    int trial = 0;
    for (; trial < trials_needed && trial < options.max_iterations; ++trial) {
        // Draw 4 distinct indices whose points are not 3-collinear on
        // either side; degenerate samples are skipped, not fatal.
        std::array<std::size_t, 4> idx{};
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            for (auto& i : idx) i = pick(rng);
            std::array<std::size_t, 4> sorted = idx;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
            ok = true;
            for (int skip = 0; skip < 4 && ok; ++skip) {
                std::array<Point2, 3> s{}, d{};
                int w = 0;
                for (int k = 0; k < 4; ++k) {
                    if (k == skip) continue;
                    s[w] = src[idx[k]];
                    d[w] = dst[idx[k]];
                    ++w;
                }
                if (collinear(s[0], s[1], s[2]) || collinear(d[0], d[1], d[2])) ok = false;
            }
        }
        if (!ok) continue;

        Homography h;
        try {
            h = estimate_homography_dlt({src[idx[0]], src[idx[1]], src[idx[2]], src[idx[3]]},
                                        {dst[idx[0]], dst[idx[1]], dst[idx[2]], dst[idx[3]]});
        } catch (const Error&) {
            continue;
        }

        std::vector<bool> mask(n, false);
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Point2 mapped;
            try {
                mapped = h.apply(src[i]);
            } catch (const ValueError&) {
                continue;
            }
            const double err = std::hypot(mapped.x - dst[i].x, mapped.y - dst[i].y);
            if (err <= options.inlier_threshold_px) {
                mask[i] = true;
                ++count;
            }
        }
        if (count > best_count) {
            best_count = count;
            best_mask = mask;
            // Standard adaptive trial count for 4-point samples.
            const double w = static_cast<double>(count) / static_cast<double>(n);
            const double p_all_inlier = std::pow(w, 4);
            if (p_all_inlier > 1e-12) {
                const double needed =
                    std::log(1.0 - options.confidence) / std::log(1.0 - p_all_inlier);
                trials_needed = std::min(options.max_iterations,
                                         static_cast<int>(std::ceil(needed)) + 1);
            }
        }
    }

    // A minimal sample always fits its own 4 points exactly, so a 4-inlier
    // consensus carries no evidence; demand support beyond the sample.
    if (best_count <= 4)
        throw ConvergenceError("ransac: no consensus set found");

    std::vector<Point2> in_src, in_dst;
    for (std::size_t i = 0; i < n; ++i) {
        if (!best_mask[i]) continue;
        in_src.push_back(src[i]);
        in_dst.push_back(dst[i]);
    }
    RansacResult result;
    result.h = estimate_homography_dlt(in_src, in_dst);
    result.inliers = best_mask;
    result.iterations = trial;
    return result;
}

Image warp(const Image& img, const Homography& h, const Shape& out_shape) {
    return warp_with_mask(img, h, out_shape).image;
}

WarpResult warp_with_mask(const Image& img, const Homography& h, const Shape& out_shape) {
    const Homography inv = h.inverse();
    const Eigen::Matrix3d w = to_eigen(inv);

    WarpResult result{Image(out_shape.rows, out_shape.cols, img.channels()),
                      Image(out_shape.rows, out_shape.cols, 1)};
    for (int r = 0; r < out_shape.rows; ++r)
        for (int c = 0; c < out_shape.cols; ++c) {
            const Eigen::Vector3d v = w * Eigen::Vector3d(c, r, 1.0);
            if (std::abs(v.z()) < 1e-15) continue;
            const double sx = v.x() / v.z();
            const double sy = v.y() / v.z();
            // Round-off tolerance at the exact border: an identity-like
            // transform must not drop edge pixels.
            constexpr double kEdgeTol = 1e-6;
            const bool valid = sx >= -kEdgeTol && sx <= img.width() - 1.0 + kEdgeTol &&
                               sy >= -kEdgeTol && sy <= img.height() - 1.0 + kEdgeTol;
            if (!valid) continue;
            result.mask.at(r, c) = 1.0;
            for (int k = 0; k < img.channels(); ++k)
                result.image.at(r, c, k) =
                    bilinear_sample(img, std::clamp(sy, 0.0, img.height() - 1.0),
                                    std::clamp(sx, 0.0, img.width() - 1.0), k);
        }
    return result;
}

void write_correspondences_csv(const std::string& path,
                               const std::vector<Point2>& src,
                               const std::vector<Point2>& dst) {
    if (src.size() != dst.size())
        throw ValueError("correspondences: lists differ in length");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "x_src,y_src,x_dst,y_dst\n";
    out.precision(17);
    for (std::size_t i = 0; i < src.size(); ++i)
        out << src[i].x << ',' << src[i].y << ',' << dst[i].x << ',' << dst[i].y << '\n';
    if (!out) throw IoError("failed writing " + path);
}

} // namespace parlens
