#include "parlens/circles_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>

namespace parlens {

void CirclesGridSpec::validate() const {
    if (rows < 2 || cols < 2)
        throw ValueError("circles grid: need at least 2 rows and 2 columns");
    if (!(diagonal_spacing > 0.0) || !std::isfinite(diagonal_spacing))
        throw ValueError("circles grid: spacing must be positive and finite");
}

std::vector<Point3> generate_grid_points(const CirclesGridSpec& spec) {
    spec.validate();
    const double half = spec.diagonal_spacing / 2.0;
    std::vector<Point3> points;
    points.reserve(static_cast<std::size_t>(spec.count()));
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            points.push_back({(2 * c + r % 2) * half, r * half, 0.0});
    return points;
}

Image render_circles(const std::vector<Point2>& centers_px, double radius_px,
                     const Shape& shape, int supersample,
                     double foreground, double background) {
    if (!(radius_px > 0.0))
        throw ValueError("render_circles: radius must be positive");
    if (supersample < 1)
        throw ValueError("render_circles: supersample must be >= 1");
    if (shape.rows < 1 || shape.cols < 1)
        throw ShapeError("render_circles: empty output shape");

    Image out(shape.rows, shape.cols, 1, background);
    const double r2 = radius_px * radius_px;
    const double sub = 1.0 / supersample;

    // Discs never overlap in the targets drawn here, so per-disc coverage
    // accumulates; the clamp only guards touching edges.
    for (const auto& center : centers_px) {
        const int r_lo = std::max(0, static_cast<int>(std::floor(center.y - radius_px - 1.0)));
        const int r_hi = std::min(shape.rows - 1, static_cast<int>(std::ceil(center.y + radius_px + 1.0)));
        const int c_lo = std::max(0, static_cast<int>(std::floor(center.x - radius_px - 1.0)));
        const int c_hi = std::min(shape.cols - 1, static_cast<int>(std::ceil(center.x + radius_px + 1.0)));
        for (int r = r_lo; r <= r_hi; ++r)
            for (int c = c_lo; c <= c_hi; ++c) {
                int hits = 0;
                for (int i = 0; i < supersample; ++i)
                    for (int j = 0; j < supersample; ++j) {
                        const double y = r - 0.5 + (i + 0.5) * sub - center.y;
                        const double x = c - 0.5 + (j + 0.5) * sub - center.x;
                        if (x * x + y * y <= r2) ++hits;
                    }
                if (hits == 0) continue;
                const double coverage = static_cast<double>(hits) / (supersample * supersample);
                double v = out.at(r, c) + (foreground - background) * coverage;
                v = std::clamp(v, std::min(foreground, background), std::max(foreground, background));
                out.at(r, c) = v;
            }
    }
    return out;
}

std::vector<Point2> grid_pixel_centers(const CirclesGridSpec& spec,
                                       const GridRenderOptions& options) {
    const auto world = generate_grid_points(spec);
    std::vector<Point2> centers;
    centers.reserve(world.size());
    for (const auto& p : world)
        centers.push_back({options.origin_px.x + p.x * options.pixels_per_unit,
                           options.origin_px.y + p.y * options.pixels_per_unit});
    return centers;
}

Image render_circles_grid(const CirclesGridSpec& spec, const Shape& shape,
                          const GridRenderOptions& options) {
    return render_circles(grid_pixel_centers(spec, options), options.circle_radius_px,
                          shape, options.supersample, options.foreground, options.background);
}

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

// Otsu's threshold over a 256-bin histogram of the value range.
double otsu_threshold(const Image& gray) {
    const double lo = gray.min();
    const double hi = gray.max();
    if (!(hi - lo > 1e-9))
        throw DetectionError("detect_grid: image has no contrast");

    constexpr int kBins = 256;
    std::array<std::size_t, kBins> hist{};
    for (double v : gray.data()) {
        int bin = static_cast<int>((v - lo) / (hi - lo) * kBins);
        bin = std::clamp(bin, 0, kBins - 1);
        ++hist[static_cast<std::size_t>(bin)];
    }

    const double total = static_cast<double>(gray.data().size());
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += i * static_cast<double>(hist[static_cast<std::size_t>(i)]);

    double best_var = -1.0;
    int best_bin = kBins / 2;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < kBins - 1; ++t) {
        w0 += static_cast<double>(hist[static_cast<std::size_t>(t)]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += t * static_cast<double>(hist[static_cast<std::size_t>(t)]);
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best_var) {
            best_var = between;
            best_bin = t;
        }
    }
    return lo + (best_bin + 1) * (hi - lo) / kBins;
}

struct Component {
    std::vector<std::pair<int, int>> pixels;
    int min_r = 0, max_r = 0, min_c = 0, max_c = 0;
};

std::vector<Component> connected_components(const std::vector<bool>& mask, int h, int w,
                                            std::vector<int>& labels) {
    labels.assign(static_cast<std::size_t>(h) * w, -1);
    std::vector<Component> comps;
    std::deque<std::pair<int, int>> queue;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * w + c;
            if (!mask[idx] || labels[idx] >= 0) continue;
            const int label = static_cast<int>(comps.size());
            Component comp;
            comp.min_r = comp.max_r = r;
            comp.min_c = comp.max_c = c;
            labels[idx] = label;
            queue.push_back({r, c});
            while (!queue.empty()) {
                const auto [cr, cc] = queue.front();
                queue.pop_front();
                comp.pixels.push_back({cr, cc});
                comp.min_r = std::min(comp.min_r, cr);
                comp.max_r = std::max(comp.max_r, cr);
                comp.min_c = std::min(comp.min_c, cc);
                comp.max_c = std::max(comp.max_c, cc);
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        const std::size_t nidx = static_cast<std::size_t>(nr) * w + nc;
                        if (!mask[nidx] || labels[nidx] >= 0) continue;
                        labels[nidx] = label;
                        queue.push_back({nr, nc});
                    }
            }
            comps.push_back(std::move(comp));
        }
    return comps;
}

} // namespace

std::vector<Point2> detect_grid(const Image& img, const CirclesGridSpec& spec) {
    spec.validate();
    if (img.empty()) throw ValueError("detect_grid: empty image");

    const Image gray = to_gray(img);
    const int h = gray.height(), w = gray.width();
    const double threshold = otsu_threshold(gray);

    std::vector<bool> mask(static_cast<std::size_t>(h) * w, false);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            mask[static_cast<std::size_t>(r) * w + c] = gray.at(r, c) < threshold;

    std::vector<int> labels;
    std::vector<Component> comps = connected_components(mask, h, w, labels);
    if (comps.empty())
        throw DetectionError("detect_grid: no dark blobs found");

    // The discs are equal-sized, but they are neither the largest dark
    // regions (undistortion leaves a huge zero-filled border band) nor the
    // most numerous (noise and reconstruction ringing add arbitrary small
    // specks). Sort by area and take the largest run of spec.count() blobs
    // that is internally consistent: every area within 50% of the run's
    // median. Oversized artifacts break the runs they join, and clutter is
    // smaller than the discs, so the first consistent run is the grid.
    const int want = spec.count();
    if (static_cast<int>(comps.size()) < want)
        throw DetectionError("detect_grid: expected " + std::to_string(want) +
                             " circles, found " + std::to_string(comps.size()) +
                             " dark blobs");
    std::vector<int> by_size(comps.size());
    std::iota(by_size.begin(), by_size.end(), 0);
    std::sort(by_size.begin(), by_size.end(), [&](int a, int b) {
        return comps[static_cast<std::size_t>(a)].pixels.size() >
               comps[static_cast<std::size_t>(b)].pixels.size();
    });
    auto area_of = [&](std::size_t rank) {
        return static_cast<double>(comps[static_cast<std::size_t>(by_size[rank])].pixels.size());
    };
    std::vector<int> kept;
    for (std::size_t start = 0; start + static_cast<std::size_t>(want) <= by_size.size();
         ++start) {
        const double median = area_of(start + static_cast<std::size_t>(want) / 2);
        if (area_of(start) <= 1.5 * median &&
            area_of(start + static_cast<std::size_t>(want) - 1) >= 0.5 * median) {
            kept.assign(by_size.begin() + static_cast<std::ptrdiff_t>(start),
                        by_size.begin() + static_cast<std::ptrdiff_t>(start) + want);
            break;
        }
    }
    if (kept.empty())
        throw DetectionError("detect_grid: expected " + std::to_string(want) +
                             " same-size circles, no size-consistent set among " +
                             std::to_string(comps.size()) + " dark blobs");

    // Light-background level for darkness weighting.
    double bg_sum = 0.0;
    std::size_t bg_count = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (!mask[static_cast<std::size_t>(r) * w + c]) {
                bg_sum += gray.at(r, c);
                ++bg_count;
            }
    if (bg_count == 0)
        throw DetectionError("detect_grid: no background pixels");
    const double bg_level = bg_sum / static_cast<double>(bg_count);

    // Darkness-weighted centroid over a disc-shaped window slightly larger
    // than the blob, so anti-aliased rim pixels above the threshold still
    // contribute. A square window would graze the rims of neighbouring
    // discs at its corners and bias the estimate.
    std::vector<Point2> centroids;
    centroids.reserve(kept.size());
    for (int ki : kept) {
        const Component& comp = comps[static_cast<std::size_t>(ki)];
        double mr = 0.0, mc = 0.0;
        for (const auto& [pr, pc] : comp.pixels) {
            mr += pr;
            mc += pc;
        }
        mr /= static_cast<double>(comp.pixels.size());
        mc /= static_cast<double>(comp.pixels.size());
        const double r_eff = std::sqrt(static_cast<double>(comp.pixels.size()) / M_PI);
        const double reach = r_eff + 2.0;

        double sw = 0.0, sx = 0.0, sy = 0.0;
        const int r_lo = std::max(0, static_cast<int>(std::floor(mr - reach)));
        const int r_hi = std::min(h - 1, static_cast<int>(std::ceil(mr + reach)));
        const int c_lo = std::max(0, static_cast<int>(std::floor(mc - reach)));
        const int c_hi = std::min(w - 1, static_cast<int>(std::ceil(mc + reach)));
        for (int r = r_lo; r <= r_hi; ++r)
            for (int c = c_lo; c <= c_hi; ++c) {
                if (std::hypot(r - mr, c - mc) > reach) continue;
                const int label = labels[static_cast<std::size_t>(r) * w + c];
                if (label >= 0 && label != ki) continue;  // another blob's pixel
                const double darkness = bg_level - gray.at(r, c);
                if (darkness <= 0.0) continue;
                sw += darkness;
                sx += darkness * c;
                sy += darkness * r;
            }
        if (sw <= 0.0)
            throw DetectionError("detect_grid: degenerate blob");
        centroids.push_back({sx / sw, sy / sw});
    }

    // Principal axes of the centroid cloud; the long (11-column) direction
    // dominates the variance, so the major axis is the column axis.
    double mx = 0.0, my = 0.0;
    for (const auto& p : centroids) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(centroids.size());
    my /= static_cast<double>(centroids.size());
    double cxx = 0.0, cxy = 0.0, cyy = 0.0;
    for (const auto& p : centroids) {
        const double dx = p.x - mx, dy = p.y - my;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    const double trace_half = (cxx + cyy) / 2.0;
    const double disc = std::sqrt(std::max(0.0, trace_half * trace_half - (cxx * cyy - cxy * cxy)));
    const double lambda_major = trace_half + disc;
    double ex = cxy, ey = lambda_major - cxx;
    if (std::hypot(ex, ey) < 1e-12) {
        ex = lambda_major - cyy;
        ey = cxy;
    }
    const double norm = std::hypot(ex, ey);
    if (norm < 1e-12)
        throw DetectionError("detect_grid: degenerate centroid layout");
    ex /= norm;
    ey /= norm;

    // Canonical orientation: the column axis points rightward. The layout
    // is 180-degree symmetric, so orderings are only unambiguous while the
    // rotation away from axis-aligned stays within +/- 30 degrees.
    if (ex < 0.0) {
        ex = -ex;
        ey = -ey;
    }
    if (std::abs(std::atan2(ey, ex)) > 30.0 * M_PI / 180.0 + 1e-9)
        throw DetectionError("detect_grid: grid rotation beyond +/-30 degrees, ordering ambiguous");
    double fx = -ey, fy = ex;  // row axis, 90 degrees clockwise from columns
    if (fy < 0.0) {
        fx = -fx;
        fy = -fy;
    }

    std::vector<int> order(centroids.size());
    std::iota(order.begin(), order.end(), 0);
    auto row_coord = [&](int i) {
        return (centroids[static_cast<std::size_t>(i)].x - mx) * fx +
               (centroids[static_cast<std::size_t>(i)].y - my) * fy;
    };
    auto col_coord = [&](int i) {
        return (centroids[static_cast<std::size_t>(i)].x - mx) * ex +
               (centroids[static_cast<std::size_t>(i)].y - my) * ey;
    };
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return row_coord(a) < row_coord(b); });

    // Rows must separate cleanly along the row axis; otherwise the grid is
    // too distorted or rotated to order reliably.
    for (int r = 0; r < spec.rows; ++r) {
        const int base = r * spec.cols;
        const double spread = row_coord(order[static_cast<std::size_t>(base + spec.cols - 1)]) -
                              row_coord(order[static_cast<std::size_t>(base)]);
        if (r + 1 < spec.rows) {
            const double gap = row_coord(order[static_cast<std::size_t>(base + spec.cols)]) -
                               row_coord(order[static_cast<std::size_t>(base + spec.cols - 1)]);
            if (gap <= spread)
                throw DetectionError("detect_grid: rows do not separate, ordering ambiguous");
        }
        std::sort(order.begin() + base, order.begin() + base + spec.cols,
                  [&](int a, int b) { return col_coord(a) < col_coord(b); });
    }

    std::vector<Point2> ordered;
    ordered.reserve(centroids.size());
    for (int i : order) ordered.push_back(centroids[static_cast<std::size_t>(i)]);
    return ordered;
}

} // namespace parlens
