#pragma once

#include "vosap/geometry.hpp"
#include "vosap/image.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace vosap {

class BeliefGrid;  // belief.hpp

/// Detected corner with sub-pixel position and detector response.
struct Corner {
    double u = 0.0;
    double v = 0.0;
    double strength = 0.0;
};

/// One-to-one correspondence between corner indices of two images.
struct Match {
    int a = -1;
    int b = -1;
    double score = 0.0;  // descriptor distance, smaller is better
};

/// Harris detector settings. The response threshold is relative to the
/// maximum response attainable with unit-contrast input through the
/// normalized 3x3 Sobel kernels.
struct HarrisParams {
    double k = 0.04;
    double response_rel_threshold = 1e-4;
    int nms_radius = 2;  // 5x5 non-max suppression
    int max_corners = 500;
};

/// 9x9 zero-mean unit-norm intensity patches; distance = 1 - correlation.
struct PatchParams {
    int radius = 4;
    double ratio = 0.8;  // mutual nearest neighbor ratio test
};

struct RansacParams {
    // Iteration cap; adaptive termination exits far earlier on clean data.
    // Repetitive pebble texture drives match inlier ratios down to ~20%,
    // which needs several thousand trials for a reliable consensus.
    int iters = 10000;
    // Corner jitter under the default sensor noise puts true correspondences
    // at 1-1.5 px symmetric transfer error; 2.0 keeps them as inliers.
    double inlier_px = 2.0;
    int min_inliers = 12;
    // When > 0, give up after this many iterations if the best consensus is
    // still below min_inliers / 2. Screening knob for planning-time edge
    // scoring; leave 0 for live odometry.
    int hopeless_after = 0;
    std::uint64_t seed = 0;
};

struct VoParams {
    HarrisParams harris;
    PatchParams patch;
    RansacParams ransac;
};

struct AlignParams {
    VoParams vo;
    double min_valid = 0.5;  // minimum valid fraction of the reference render
};

struct VoResult {
    double displacement = 0.0;
    Eigen::Vector2d delta = Eigen::Vector2d::Zero();  // estimated camera motion on the plane
    Homography h;  // pixel map, image i -> image j
    int inliers = 0;
    int omega = 0;  // VO performance indicator: consensus inlier count
    bool ok = false;
};

/// Harris corners sorted by strength (descending; position breaks ties),
/// at most max_corners, sub-pixel refined. Invalid pixels never contribute.
std::vector<Corner> detect_features(const GrayImage& img, const HarrisParams& params);

/// Corners plus normalized patch descriptors. Corners whose patch support
/// leaves the image or touches invalid pixels carry no descriptor.
struct FeatureSet {
    std::vector<Corner> corners;
    std::vector<std::array<float, 81>> descriptors;
    std::vector<int> descriptor_corner;  // descriptor row -> corner index
};

/// `orientation` rotates the patch sampling frame (radians). Passing the
/// camera yaw (heading + pan) of the image samples every patch in a common
/// ground-aligned frame, so descriptors stay comparable across mast swings.
/// The yaw is measured (mast encoders, commanded heading), never estimated
/// from the images.
FeatureSet extract_features(const GrayImage& img, const HarrisParams& hp,
                            const PatchParams& pp, double orientation = 0.0);

/// Fills descriptors for an already-detected corner list.
void add_descriptors(FeatureSet& fs, const GrayImage& img, const PatchParams& pp,
                     double orientation = 0.0);

/// Mutual-nearest-neighbor matching with ratio test over two feature sets.
/// Returned indices refer to the corner lists.
std::vector<Match> match_feature_sets(const FeatureSet& a, const FeatureSet& b,
                                      double ratio);

std::vector<Match> describe_and_match(const GrayImage& img_a,
                                      const std::vector<Corner>& corners_a,
                                      const GrayImage& img_b,
                                      const std::vector<Corner>& corners_b,
                                      const PatchParams& params);

struct PointPair {
    Eigen::Vector2d a;
    Eigen::Vector2d b;
};

/// Normalized-DLT least-squares homography mapping a -> b. Requires >= 4
/// pairs; throws DegenerateMatches on rank deficiency.
Homography dlt_homography(const std::vector<PointPair>& pairs);

struct RansacResult {
    Homography h;
    std::vector<int> inliers;
};

/// RANSAC consensus with adaptive termination, refit on the inlier set.
/// Deterministic given params.seed. Throws NoConsensus when the best
/// consensus is below min_inliers.
RansacResult ransac_homography(const std::vector<PointPair>& pairs,
                               const RansacParams& params);

/// Symmetric transfer error of a correspondence under h (max of the forward
/// and backward pixel errors).
double symmetric_transfer_error(const Homography& h, const Homography& h_inv,
                                const PointPair& pair);

/// Feature-based alignment of an image against a reference view rendered
/// from the belief at the predicted state. Returns the ground-from-image
/// homography; throws AlignmentFailed when the render or the match is too
/// weak to support an estimate.
Homography align_to_map(const GrayImage& img, const BeliefGrid& grid,
                        const ExtendedState& predicted_state,
                        const CameraIntrinsics& intr, const AlignParams& params);

/// Homography-based visual odometry on the ground plane. Camera positions
/// are recovered from the euclidean homography using the known plane, and
/// the displacement is the distance between them. Failures are reported via
/// ok = false, never thrown.
VoResult visual_odometry(const GrayImage& img_i, const GrayImage& img_j,
                         const CameraIntrinsics& intr,
                         const ExtendedState& assumed_state_i, const VoParams& params);

/// visual_odometry on precomputed feature sets (shared by the planner's
/// per-node caches; bit-identical to the image overload).
VoResult vo_from_features(const FeatureSet& fi, const FeatureSet& fj,
                          const CameraIntrinsics& intr,
                          const ExtendedState& assumed_state_i, const VoParams& params);

}  // namespace vosap
