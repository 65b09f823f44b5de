#pragma once

#include "vosap/belief.hpp"
#include "vosap/geometry.hpp"
#include "vosap/image.hpp"
#include "vosap/vision.hpp"

#include <span>
#include <string>
#include <string_view>

namespace vosap {

/// Most-likely image predicted from the belief. Pixels whose back-projection
/// touches any unobserved cell are invalid.
struct SyntheticImage {
    GrayImage img;
    double valid_fraction = 0.0;
};

/// Planning cost metrics: synthetic-pair VO displacement error (J_D),
/// synthetic-image feature count (J_F), landmark count visible from a
/// viewpoint (J_V).
enum class MetricKind { Displacement, SyntheticFeatureCount, VisibleFeatureCount };

MetricKind parse_metric(std::string_view name);
std::string metric_name(MetricKind m);

struct EdgeCostParams {
    double gamma = 0.9;            // discount factor, (0, 1]
    double failure_penalty = 10.0; // meters-equivalent cost of a VO failure
    double feature_scale = 1.0;    // cost scale for the count-based metrics
    double min_valid = 0.5;        // render validity required by J_D / J_F

    /// Edge evaluation runs on noiseless renders and scores thousands of
    /// pairs per plan, so it uses a leaner detector budget and a consensus
    /// margin above the live VO gate: marginal edges are priced as failures
    /// instead of risked.
    static VoParams planning_vo_defaults() {
        VoParams v;
        v.harris.max_corners = 200;
        v.ransac.iters = 500;
        v.ransac.min_inliers = 26;
        v.ransac.hopeless_after = 200;
        return v;
    }
    VoParams vo = planning_vo_defaults();
};

/// Renders the most-likely view of the belief at `state`.
SyntheticImage render_synthetic(const BeliefGrid& grid, const ExtendedState& state,
                                const CameraIntrinsics& intr);

/// Landmarks of fm that project into the image bounds with positive depth.
int visible_landmarks(const FeatureMap& fm, const ExtendedState& state,
                      const CameraIntrinsics& intr);

/// Per-node caches used when many edges share an endpoint. Stages are
/// computed lazily: render, then corners, then descriptors.
struct NodeScratch {
    bool has_render = false;
    SyntheticImage render;
    bool has_corners = false;
    FeatureSet features;  // corners always filled first; descriptors on demand
    bool has_descriptors = false;
    bool has_visible = false;
    int visible_count = 0;
};

struct EdgeEval {
    double cost = 0.0;
    bool failed = false;  // priced at failure_penalty
    bool vo_ok = false;
    double vo_displacement = 0.0;
    int omega = 0;
};

/// Scores one candidate observation pair (a -> b). Failures are priced, not
/// raised. Scratch pointers may be null; when given they are filled lazily
/// and the result is identical to the uncached path.
EdgeEval evaluate_edge(MetricKind metric, const BeliefGrid& grid, const FeatureMap& fm,
                       const ExtendedState& a, const ExtendedState& b,
                       const CameraIntrinsics& intr, const EdgeCostParams& params,
                       NodeScratch* sa = nullptr, NodeScratch* sb = nullptr);

double edge_cost(MetricKind metric, const BeliefGrid& grid, const FeatureMap& fm,
                 const ExtendedState& a, const ExtendedState& b,
                 const CameraIntrinsics& intr, const EdgeCostParams& params);

/// Discounted sum over consecutive pairs: sum_i gamma^i edge_cost(s_i, s_i+1)
/// (0^0 = 1). Throws ScheduleTooShort for fewer than two states and Error
/// when times decrease.
double trajectory_cost(MetricKind metric, const BeliefGrid& grid, const FeatureMap& fm,
                       std::span<const ExtendedState> schedule,
                       const CameraIntrinsics& intr, const EdgeCostParams& params);

/// Exports a synthetic image as PGM plus a 0/255 validity mask sidecar.
void export_synthetic(const SyntheticImage& s, const std::string& image_path,
                      const std::string& mask_path);

}  // namespace vosap
