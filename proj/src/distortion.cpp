#include "parlens/distortion.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>

namespace parlens {

void DistortionModel::validate() const {
    const double fields[] = {fx, fy, cx, cy, k1, k2, k3, p1, p2};
    for (double v : fields)
        if (!std::isfinite(v)) throw ValueError("distortion model: non-finite field");
    if (fx <= 0.0 || fy <= 0.0)
        throw ValueError("distortion model: focal lengths must be positive");
}

nlohmann::json DistortionModel::to_json() const {
    return {{"fx", fx}, {"fy", fy}, {"cx", cx}, {"cy", cy},
            {"k1", k1}, {"k2", k2}, {"k3", k3}, {"p1", p1}, {"p2", p2}};
}

DistortionModel DistortionModel::from_json(const nlohmann::json& j) {
    DistortionModel m;
    try {
        m.fx = j.at("fx").get<double>();
        m.fy = j.at("fy").get<double>();
        m.cx = j.at("cx").get<double>();
        m.cy = j.at("cy").get<double>();
        m.k1 = j.value("k1", 0.0);
        m.k2 = j.value("k2", 0.0);
        m.k3 = j.value("k3", 0.0);
        m.p1 = j.value("p1", 0.0);
        m.p2 = j.value("p2", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("distortion model: ") + e.what());
    }
    m.validate();
    return m;
}

namespace {

// Distortion in normalized coordinates, before the pixel mapping.
Point2 distort_normalized(const Point2& n, const DistortionModel& m) {
    const double x = n.x, y = n.y;
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (m.k1 + r2 * (m.k2 + r2 * m.k3));
    return {x * radial + 2.0 * m.p1 * x * y + m.p2 * (r2 + 2.0 * x * x),
            y * radial + m.p1 * (r2 + 2.0 * y * y) + 2.0 * m.p2 * x * y};
}

// Analytic 2x2 Jacobian of distort_normalized.
Eigen::Matrix2d distort_jacobian(const Point2& n, const DistortionModel& m) {
    const double x = n.x, y = n.y;
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (m.k1 + r2 * (m.k2 + r2 * m.k3));
    // d(radial)/d(r^2), then chain through d(r^2)/dx = 2x.
    const double dradial = m.k1 + r2 * (2.0 * m.k2 + r2 * 3.0 * m.k3);
    Eigen::Matrix2d j;
    j(0, 0) = radial + 2.0 * x * x * dradial + 2.0 * m.p1 * y + 6.0 * m.p2 * x;
    j(0, 1) = 2.0 * x * y * dradial + 2.0 * m.p1 * x + 2.0 * m.p2 * y;
    j(1, 0) = 2.0 * x * y * dradial + 2.0 * m.p1 * x + 2.0 * m.p2 * y;
    j(1, 1) = radial + 2.0 * y * y * dradial + 6.0 * m.p1 * y + 2.0 * m.p2 * x;
    return j;
}

// Newton inversion of distort_normalized; nullptr return on divergence is
// reported by the callers with their own context.
bool invert_normalized(const Point2& distorted, const DistortionModel& m, Point2& out) {
    // Newton converges quadratically here, so the tight residual tolerance
    // costs at most one extra iteration; it keeps the positional error in
    // normalized units well below round-trip test budgets even where the
    // distortion Jacobian shrinks distances.
    constexpr double kTol = 1e-12;
    Point2 n = distorted;  // distortion is near-identity, so start at the target
    for (int it = 0; it < 25; ++it) {
        const Point2 d = distort_normalized(n, m);
        const double ex = d.x - distorted.x;
        const double ey = d.y - distorted.y;
        if (std::abs(ex) < kTol && std::abs(ey) < kTol) {
            out = n;
            return true;
        }
        const Eigen::Matrix2d j = distort_jacobian(n, m);
        if (std::abs(j.determinant()) < 1e-15) return false;
        const Eigen::Vector2d step = j.inverse() * Eigen::Vector2d(ex, ey);
        n.x -= step.x();
        n.y -= step.y();
        if (!std::isfinite(n.x) || !std::isfinite(n.y)) return false;
    }
    // Accept only if the final iterate meets the tolerance.
    const Point2 d = distort_normalized(n, m);
    if (std::abs(d.x - distorted.x) < kTol && std::abs(d.y - distorted.y) < kTol) {
        out = n;
        return true;
    }
    return false;
}

Point2 image_center(const Image& img) {
    return {(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
}

} // namespace

Point2 distort(const Point2& normalized, const DistortionModel& model) {
    model.validate();
    if (!std::isfinite(normalized.x) || !std::isfinite(normalized.y))
        throw ValueError("distort: non-finite point");
    const Point2 d = distort_normalized(normalized, model);
    return {model.fx * d.x + model.cx, model.fy * d.y + model.cy};
}

Point2 undistort_point(const Point2& pixel, const DistortionModel& model) {
    model.validate();
    if (!std::isfinite(pixel.x) || !std::isfinite(pixel.y))
        throw ValueError("undistort_point: non-finite point");
    const Point2 target{(pixel.x - model.cx) / model.fx, (pixel.y - model.cy) / model.fy};
    Point2 n;
    if (!invert_normalized(target, model, n))
        throw ConvergenceError("undistort_point: Newton iteration diverged at pixel (" +
                               std::to_string(pixel.x) + ", " + std::to_string(pixel.y) + ")");
    return n;
}

Image undistort_image(const Image& img, const DistortionModel& model) {
    model.validate();
    if (img.empty()) throw ValueError("undistort_image: empty image");

    // Output camera: the model's focals with an image-centered principal
    // point. Each ideal output pixel is pushed through the forward
    // distortion to find where the lens imaged it.
    const Point2 center = image_center(img);
    Image out(img.height(), img.width(), img.channels());
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            const Point2 n{(c - center.x) / model.fx, (r - center.y) / model.fy};
            const Point2 src = distort(n, model);
            // Border tolerance: round-off in the pixel mapping must not drop
            // edge pixels of an identity-like model.
            constexpr double kEdgeTol = 1e-6;
            if (src.x < -kEdgeTol || src.x > img.width() - 1.0 + kEdgeTol ||
                src.y < -kEdgeTol || src.y > img.height() - 1.0 + kEdgeTol)
                continue;
            const double sy = std::clamp(src.y, 0.0, img.height() - 1.0);
            const double sx = std::clamp(src.x, 0.0, img.width() - 1.0);
            for (int k = 0; k < img.channels(); ++k)
                out.at(r, c, k) = bilinear_sample(img, sy, sx, k);
        }
    return out;
}

Image distort_image(const Image& img, const DistortionModel& model) {
    model.validate();
    if (img.empty()) throw ValueError("distort_image: empty image");

    const Point2 center = image_center(img);
    Image out(img.height(), img.width(), img.channels());
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            const Point2 target{(c - model.cx) / model.fx, (r - model.cy) / model.fy};
            Point2 n;
            if (!invert_normalized(target, model, n))
                throw ConvergenceError("distort_image: Newton iteration diverged at pixel (" +
                                       std::to_string(r) + ", " + std::to_string(c) + ")");
            const double sx = model.fx * n.x + center.x;
            const double sy = model.fy * n.y + center.y;
            constexpr double kEdgeTol = 1e-6;
            if (sx < -kEdgeTol || sx > img.width() - 1.0 + kEdgeTol ||
                sy < -kEdgeTol || sy > img.height() - 1.0 + kEdgeTol)
                continue;
            const double cy2 = std::clamp(sy, 0.0, img.height() - 1.0);
            const double cx2 = std::clamp(sx, 0.0, img.width() - 1.0);
            for (int k = 0; k < img.channels(); ++k)
                out.at(r, c, k) = bilinear_sample(img, cy2, cx2, k);
        }
    return out;
}

namespace {

struct Pose {
    Eigen::Vector3d rvec = Eigen::Vector3d::Zero();
    Eigen::Vector3d tvec = Eigen::Vector3d::Zero();
};

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& rvec) {
    const double angle = rvec.norm();
    if (angle < 1e-15) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, rvec / angle).toRotationMatrix();
}

// Reprojection residuals for all views, 2 per observed point.
Eigen::VectorXd residuals(const std::vector<std::vector<Point2>>& detections,
                          const std::vector<Point3>& world,
                          const DistortionModel& model, const std::vector<Pose>& poses) {
    const std::size_t per_view = world.size() * 2;
    Eigen::VectorXd res(static_cast<Eigen::Index>(per_view * detections.size()));
    for (std::size_t v = 0; v < detections.size(); ++v) {
        const Eigen::Matrix3d rot = rodrigues(poses[v].rvec);
        for (std::size_t i = 0; i < world.size(); ++i) {
            const Eigen::Vector3d cam =
                rot * Eigen::Vector3d(world[i].x, world[i].y, world[i].z) + poses[v].tvec;
            const Eigen::Index row = static_cast<Eigen::Index>(v * per_view + 2 * i);
            if (cam.z() < 1e-9) {
                // Point behind the camera: poison the step so LM backs off.
                res(row) = 1e6;
                res(row + 1) = 1e6;
                continue;
            }
            const Point2 predicted = distort({cam.x() / cam.z(), cam.y() / cam.z()}, model);
            res(row) = predicted.x - detections[v][i].x;
            res(row + 1) = predicted.y - detections[v][i].y;
        }
    }
    return res;
}

// Parameter packing for the joint refinement: 9 intrinsic/distortion
// entries, then 6 pose entries per view.
constexpr int kIntrinsics = 9;

void unpack(const Eigen::VectorXd& p, DistortionModel& model, std::vector<Pose>& poses) {
    model.fx = p(0);
    model.fy = p(1);
    model.cx = p(2);
    model.cy = p(3);
    model.k1 = p(4);
    model.k2 = p(5);
    model.k3 = p(6);
    model.p1 = p(7);
    model.p2 = p(8);
    for (std::size_t v = 0; v < poses.size(); ++v) {
        const Eigen::Index base = kIntrinsics + static_cast<Eigen::Index>(6 * v);
        poses[v].rvec = p.segment<3>(base);
        poses[v].tvec = p.segment<3>(base + 3);
    }
}

} // namespace

CalibrationResult calibrate_distortion(const std::vector<std::vector<Point2>>& detections,
                                       const CirclesGridSpec& spec) {
    spec.validate();
    if (detections.size() < 3)
        throw ValueError("calibrate_distortion: need at least 3 views, got " +
                         std::to_string(detections.size()));
    for (const auto& view : detections)
        if (static_cast<int>(view.size()) != spec.count())
            throw ValueError("calibrate_distortion: every view must supply " +
                             std::to_string(spec.count()) + " ordered points");

    const std::vector<Point3> world = generate_grid_points(spec);
    std::vector<Point2> world_xy;
    world_xy.reserve(world.size());
    for (const auto& p : world) world_xy.push_back({p.x, p.y});

    // Per-view plane-to-image homographies seed everything else.
    std::vector<Eigen::Matrix3d> homs;
    for (const auto& view : detections) {
        const Homography h = estimate_homography_dlt(world_xy, view);
        Eigen::Matrix3d m;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m(r, c) = h.at(r, c);
        homs.push_back(m);
    }

    // Closed-form intrinsics (absolute-conic constraints): each view gives
    // v12.b = 0 and (v11 - v22).b = 0 for b = (B11,B12,B22,B13,B23,B33).
    auto v_row = [](const Eigen::Matrix3d& h, int i, int j) {
        Eigen::Matrix<double, 6, 1> v;
        v << h(0, i) * h(0, j),
             h(0, i) * h(1, j) + h(1, i) * h(0, j),
             h(1, i) * h(1, j),
             h(2, i) * h(0, j) + h(0, i) * h(2, j),
             h(2, i) * h(1, j) + h(1, i) * h(2, j),
             h(2, i) * h(2, j);
        return v;
    };
    Eigen::MatrixXd vmat(2 * static_cast<Eigen::Index>(homs.size()), 6);
    for (std::size_t i = 0; i < homs.size(); ++i) {
        vmat.row(static_cast<Eigen::Index>(2 * i)) = v_row(homs[i], 0, 1).transpose();
        vmat.row(static_cast<Eigen::Index>(2 * i + 1)) =
            (v_row(homs[i], 0, 0) - v_row(homs[i], 1, 1)).transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(vmat, Eigen::ComputeThinV);
    Eigen::Matrix<double, 6, 1> b = svd.matrixV().col(5);
    if (b(0) < 0.0) b = -b;  // B is defined up to sign; B11 must be positive

    const double b11 = b(0), b12 = b(1), b22 = b(2), b13 = b(3), b23 = b(4), b33 = b(5);
    const double denom = b11 * b22 - b12 * b12;
    if (std::abs(b11) < 1e-15 || std::abs(denom) < 1e-18)
        throw ConvergenceError("calibrate_distortion: degenerate views (intrinsics unrecoverable)");
    const double v0 = (b12 * b13 - b11 * b23) / denom;
    const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    const double alpha2 = lambda / b11;
    const double beta2 = lambda * b11 / denom;
    if (!(alpha2 > 0.0) || !(beta2 > 0.0))
        throw ConvergenceError("calibrate_distortion: degenerate views (intrinsics unrecoverable)");

    DistortionModel model;
    model.fx = std::sqrt(alpha2);
    model.fy = std::sqrt(beta2);
    model.cy = v0;
    model.cx = -b13 * alpha2 / lambda;  // zero-skew form of Zhang's u0

    Eigen::Matrix3d kmat = Eigen::Matrix3d::Identity();
    kmat(0, 0) = model.fx;
    kmat(1, 1) = model.fy;
    kmat(0, 2) = model.cx;
    kmat(1, 2) = model.cy;
    const Eigen::Matrix3d kinv = kmat.inverse();

    // Pose initialization from each homography.
    std::vector<Pose> poses(detections.size());
    for (std::size_t v = 0; v < homs.size(); ++v) {
        Eigen::Vector3d h1 = kinv * homs[v].col(0);
        Eigen::Vector3d h2 = kinv * homs[v].col(1);
        Eigen::Vector3d h3 = kinv * homs[v].col(2);
        double scale = 1.0 / h1.norm();
        if ((h3 * scale).z() < 0.0) scale = -scale;  // target in front of the camera
        Eigen::Vector3d r1 = h1 * scale;
        Eigen::Vector3d r2 = h2 * scale;
        Eigen::Matrix3d rot;
        rot.col(0) = r1;
        rot.col(1) = r2;
        rot.col(2) = r1.cross(r2);
        Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
        rot = rsvd.matrixU() * rsvd.matrixV().transpose();
        if (rot.determinant() < 0.0) {
            Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
            flip(2, 2) = -1.0;
            rot = rsvd.matrixU() * flip * rsvd.matrixV().transpose();
        }
        const Eigen::AngleAxisd aa(rot);
        poses[v].rvec = aa.angle() * aa.axis();
        poses[v].tvec = h3 * scale;
    }

    // Joint Levenberg-Marquardt refinement with a forward-difference
    // Jacobian; the problem is small (hundreds of residuals, tens of
    // parameters), so numeric differentiation is plenty.
    const Eigen::Index n_params = kIntrinsics + static_cast<Eigen::Index>(6 * poses.size());
    Eigen::VectorXd params(n_params);
    params << model.fx, model.fy, model.cx, model.cy, 0, 0, 0, 0, 0,
        Eigen::VectorXd::Zero(n_params - kIntrinsics);
    for (std::size_t v = 0; v < poses.size(); ++v) {
        const Eigen::Index base = kIntrinsics + static_cast<Eigen::Index>(6 * v);
        params.segment<3>(base) = poses[v].rvec;
        params.segment<3>(base + 3) = poses[v].tvec;
    }

    auto eval = [&](const Eigen::VectorXd& p) {
        DistortionModel m;
        std::vector<Pose> ps(poses.size());
        unpack(p, m, ps);
        return residuals(detections, world, m, ps);
    };

    Eigen::VectorXd res = eval(params);
    double cost = res.squaredNorm();
    double damping = 1e-3;
    int iterations = 0;
    bool converged = false;
    const std::size_t n_points = world.size() * detections.size();

    for (; iterations < 200 && !converged; ++iterations) {
        Eigen::MatrixXd jac(res.size(), n_params);
        for (Eigen::Index k = 0; k < n_params; ++k) {
            const double step = 1e-7 * std::max(1.0, std::abs(params(k)));
            Eigen::VectorXd bumped = params;
            bumped(k) += step;
            jac.col(k) = (eval(bumped) - res) / step;
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * res;
        if (jtr.cwiseAbs().maxCoeff() < 1e-12) {
            converged = true;
            break;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
            if (!delta.allFinite()) {
                damping *= 10.0;
                continue;
            }
            const Eigen::VectorXd trial = params + delta;
            const Eigen::VectorXd trial_res = eval(trial);
            const double trial_cost = trial_res.squaredNorm();
            if (trial_cost < cost) {
                const double improvement = (cost - trial_cost) / std::max(cost, 1e-300);
                params = trial;
                res = trial_res;
                cost = trial_cost;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (improvement < 1e-14 || delta.cwiseAbs().maxCoeff() < 1e-14 ||
                    cost < 1e-18 * static_cast<double>(n_points))
                    converged = true;
            } else {
                damping *= 10.0;
            }
        }
        if (!accepted) {
            // Damping exhausted without progress: treat as converged at a
            // stationary point rather than spinning to the cap.
            converged = true;
        }
    }
    if (!converged)
        throw ConvergenceError("calibrate_distortion: no convergence within 200 LM iterations");

    CalibrationResult result;
    std::vector<Pose> final_poses(poses.size());
    unpack(params, result.model, final_poses);
    result.model.validate();
    result.rms_reprojection_px = std::sqrt(cost / static_cast<double>(n_points));
    result.lm_iterations = iterations;
    return result;
}

} // namespace parlens
