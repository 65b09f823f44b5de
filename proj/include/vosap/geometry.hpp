#pragma once

#include <Eigen/Core>

#include <optional>

namespace vosap {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Pinhole camera, no distortion. fx/fy/cx/cy in pixels.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    double fov_h_deg = 0.0;
    double fov_v_deg = 0.0;

    /// Builds intrinsics from image size and field of view,
    /// fx = (width/2) / tan(fov_h/2), principal point at the image center.
    static CameraIntrinsics from_fov(int width, int height, double fov_h_deg,
                                     double fov_v_deg);

    Eigen::Matrix3d k_matrix() const;
};

/// Rover body pose on the ground plane. heading in radians, wrapped to (-pi, pi].
struct BodyPose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Mast pan/tilt. pan = 0 looks body-forward, positive pans left.
/// tilt is measured downward from horizontal and must be positive for the
/// camera to intersect the ground plane.
struct MastConfig {
    double pan = 0.0;
    double tilt = 0.0;
    double mast_height = 1.4;
};

/// Body pose + mast configuration + time stamp.
struct ExtendedState {
    BodyPose body;
    MastConfig mast;
    double time = 0.0;
};

/// Point on the z = 0 ground plane.
struct GroundPoint {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const GroundPoint& a, const GroundPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

/// 3x3 projective map between the ground plane and the image plane.
struct Homography {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

    /// Normalized copy: bottom-right entry scaled to 1 when its magnitude
    /// exceeds 1e-9, otherwise unit Frobenius norm with positive trace sign.
    Homography normalized() const;

    /// Applies the map with perspective divide.
    Eigen::Vector2d apply(double x, double y) const;
};

/// Camera-from-world rigid transform plus cached center/axis.
/// Camera frame convention: x right, y down, z along the optical axis.
struct CameraPose {
    Eigen::Matrix3d r_cw = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t_cw = Eigen::Vector3d::Zero();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();

    Eigen::Vector3d world_to_camera(const Eigen::Vector3d& p) const {
        return r_cw * p + t_cw;
    }
};

/// SE(3) pose of the optical center for a given extended state. The optical
/// center sits on the pan axis at mast_height; the optical axis is the body
/// heading rotated by pan, pitched down by tilt.
CameraPose camera_pose_of(const ExtendedState& state);

struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;  // z in the camera frame; > 0 in front of the camera
};

/// Projects a ground-plane point into the image (no bounds check).
PixelProjection project_ground(const CameraIntrinsics& intr, const CameraPose& pose,
                               const GroundPoint& g);

/// Intersects the viewing ray of pixel (u, v) with the ground plane.
/// Returns nullopt for rays at or above the horizon.
std::optional<GroundPoint> pixel_to_ground(const CameraIntrinsics& intr,
                                           const CameraPose& pose, double u, double v);

/// Plane-as-model homography mapping projective ground coordinates
/// [x, y, 1]^T to pixel coordinates. Built from K [r1 r2 t]. Throws
/// DegenerateView if the camera center lies on the plane or the map is
/// singular.
Homography ground_homography(const CameraIntrinsics& intr, const ExtendedState& state);

/// Inverse homography; throws SingularHomography when |det| < 1e-12.
Homography invert_homography(const Homography& h);

/// compose(h_ab, h_bc) = h_ab * h_bc, normalized.
Homography compose(const Homography& h_ab, const Homography& h_bc);

/// Intersection of the optical axis with the ground plane. Throws
/// NoIntersection when tilt <= 0.
GroundPoint mast_target(const ExtendedState& state);

/// Inverse of mast_target: pan/tilt that point the camera at `target` from
/// `body`. Throws Unreachable when the target coincides with the body
/// position. Pan limits are not enforced here.
MastConfig mast_config_for_target(const BodyPose& body, const GroundPoint& target,
                                  double mast_height);

}  // namespace vosap
