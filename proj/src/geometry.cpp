#include "vosap/geometry.hpp"

#include "vosap/errors.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>

namespace vosap {

double wrap_angle(double a) {
    double r = std::fmod(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    if (r > kPi) r -= 2.0 * kPi;
    return r;
}

CameraIntrinsics CameraIntrinsics::from_fov(int width, int height, double fov_h_deg,
                                            double fov_v_deg) {
    CameraIntrinsics intr;
    intr.width = width;
    intr.height = height;
    intr.fov_h_deg = fov_h_deg;
    intr.fov_v_deg = fov_v_deg;
    intr.fx = (width / 2.0) / std::tan(deg2rad(fov_h_deg) / 2.0);
    intr.fy = (height / 2.0) / std::tan(deg2rad(fov_v_deg) / 2.0);
    intr.cx = (width - 1) / 2.0;
    intr.cy = (height - 1) / 2.0;
    return intr;
}

Eigen::Matrix3d CameraIntrinsics::k_matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

Homography Homography::normalized() const {
    Homography out;
    const double w = h(2, 2);
    if (std::abs(w) > 1e-9) {
        out.h = h / w;
    } else {
        const double n = h.norm();
        if (n == 0.0) throw SingularHomography("zero homography");
        const double sign = h.trace() >= 0.0 ? 1.0 : -1.0;
        out.h = h * (sign / n);
    }
    return out;
}

Eigen::Vector2d Homography::apply(double x, double y) const {
    const Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
    return {p.x() / p.z(), p.y() / p.z()};
}

CameraPose camera_pose_of(const ExtendedState& state) {
    const double psi = state.body.heading + state.mast.pan;
    const double tilt = state.mast.tilt;
    const double cp = std::cos(psi), sp = std::sin(psi);
    const double ct = std::cos(tilt), st = std::sin(tilt);

    // Optical axis in world coordinates, pitched down by tilt.
    const Eigen::Vector3d forward(cp * ct, sp * ct, -st);
    // Image-right stays horizontal (no roll): forward x world-up, normalized.
    const Eigen::Vector3d right(sp, -cp, 0.0);
    const Eigen::Vector3d down = forward.cross(right);

    CameraPose pose;
    Eigen::Matrix3d r_wc;
    r_wc.col(0) = right;
    r_wc.col(1) = down;
    r_wc.col(2) = forward;
    pose.r_cw = r_wc.transpose();
    pose.center = Eigen::Vector3d(state.body.x, state.body.y, state.mast.mast_height);
    pose.t_cw = -pose.r_cw * pose.center;
    pose.axis = forward;
    return pose;
}

PixelProjection project_ground(const CameraIntrinsics& intr, const CameraPose& pose,
                               const GroundPoint& g) {
    const Eigen::Vector3d pc = pose.world_to_camera({g.x, g.y, 0.0});
    PixelProjection out;
    out.depth = pc.z();
    out.u = intr.fx * (pc.x() / pc.z()) + intr.cx;
    out.v = intr.fy * (pc.y() / pc.z()) + intr.cy;
    return out;
}

std::optional<GroundPoint> pixel_to_ground(const CameraIntrinsics& intr,
                                           const CameraPose& pose, double u, double v) {
    const Eigen::Vector3d dir_c((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    const Eigen::Vector3d dir_w = pose.r_cw.transpose() * dir_c;
    if (dir_w.z() >= -1e-12) return std::nullopt;  // parallel to or above the horizon
    const double s = -pose.center.z() / dir_w.z();
    if (s <= 0.0) return std::nullopt;
    const Eigen::Vector3d g = pose.center + s * dir_w;
    return GroundPoint{g.x(), g.y()};
}

Homography ground_homography(const CameraIntrinsics& intr, const ExtendedState& state) {
    const CameraPose pose = camera_pose_of(state);
    if (std::abs(pose.center.z()) < 1e-9)
        throw DegenerateView("camera center lies on the ground plane");

    Eigen::Matrix3d m;
    m.col(0) = pose.r_cw.col(0);
    m.col(1) = pose.r_cw.col(1);
    m.col(2) = pose.t_cw;
    Homography h;
    h.h = intr.k_matrix() * m;
    if (std::abs(h.h.determinant()) < 1e-12)
        throw DegenerateView("ground plane maps to a line");
    return h.normalized();
}

Homography invert_homography(const Homography& h) {
    const Homography n = h.normalized();
    const double det = n.h.determinant();
    if (std::abs(det) < 1e-12) throw SingularHomography("homography is singular");
    Homography out;
    out.h = n.h.inverse();
    return out.normalized();
}

Homography compose(const Homography& h_ab, const Homography& h_bc) {
    Homography out;
    out.h = h_ab.h * h_bc.h;
    return out.normalized();
}

GroundPoint mast_target(const ExtendedState& state) {
    if (state.mast.tilt <= 0.0)
        throw NoIntersection("optical axis does not intersect the ground plane");
    const double range = state.mast.mast_height / std::tan(state.mast.tilt);
    const double psi = state.body.heading + state.mast.pan;
    return {state.body.x + range * std::cos(psi), state.body.y + range * std::sin(psi)};
}

MastConfig mast_config_for_target(const BodyPose& body, const GroundPoint& target,
                                  double mast_height) {
    const double dx = target.x - body.x;
    const double dy = target.y - body.y;
    const double range = std::sqrt(dx * dx + dy * dy);
    if (range < 1e-12) throw Unreachable("target coincides with the body position");
    MastConfig cfg;
    cfg.mast_height = mast_height;
    cfg.pan = wrap_angle(std::atan2(dy, dx) - body.heading);
    cfg.tilt = std::atan2(mast_height, range);
    return cfg;
}

}  // namespace vosap
