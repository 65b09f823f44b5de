#include "vosap/prediction.hpp"

#include "vosap/errors.hpp"
#include "vosap/world.hpp"

#include <algorithm>
#include <cmath>

namespace vosap {

MetricKind parse_metric(std::string_view name) {
    if (name == "jd" || name == "displacement") return MetricKind::Displacement;
    if (name == "jf" || name == "feature-count") return MetricKind::SyntheticFeatureCount;
    if (name == "jv" || name == "visible-count") return MetricKind::VisibleFeatureCount;
    throw ConfigError("unknown metric: " + std::string(name));
}

std::string metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::Displacement: return "jd";
        case MetricKind::SyntheticFeatureCount: return "jf";
        case MetricKind::VisibleFeatureCount: return "jv";
    }
    return "?";
}

SyntheticImage render_synthetic(const BeliefGrid& grid, const ExtendedState& state,
                                const CameraIntrinsics& intr) {
    if (state.mast.tilt <= 0.0)
        throw DegenerateView("render_synthetic: camera does not look at the ground");
    const CameraPose pose = camera_pose_of(state);
    SyntheticImage out;
    out.img = GrayImage(intr.width, intr.height, 0.0f, false);
    std::size_t valid = 0;
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const auto g = pixel_to_ground(intr, pose, x, y);
            if (!g) continue;
            const auto m = grid.interpolate_mean(*g);
            if (!m) continue;
            out.img.set(x, y, static_cast<float>(std::clamp(*m, 0.0, 1.0)));
            ++valid;
        }
    }
    out.valid_fraction = static_cast<double>(valid) /
                         (static_cast<double>(intr.width) * intr.height);
    return out;
}

int visible_landmarks(const FeatureMap& fm, const ExtendedState& state,
                      const CameraIntrinsics& intr) {
    const CameraPose pose = camera_pose_of(state);
    int n = 0;
    for (const auto& lm : fm.landmarks()) {
        const PixelProjection p = project_ground(intr, pose, lm.p);
        if (p.depth <= 0.0) continue;
        if (p.u < 0.0 || p.u >= intr.width || p.v < 0.0 || p.v >= intr.height) continue;
        ++n;
    }
    return n;
}

namespace {

const SyntheticImage& scratch_render(NodeScratch& s, const BeliefGrid& grid,
                                     const ExtendedState& state,
                                     const CameraIntrinsics& intr) {
    if (!s.has_render) {
        s.render = render_synthetic(grid, state, intr);
        s.has_render = true;
    }
    return s.render;
}

const FeatureSet& scratch_corners(NodeScratch& s, const BeliefGrid& grid,
                                  const ExtendedState& state,
                                  const CameraIntrinsics& intr,
                                  const EdgeCostParams& params) {
    scratch_render(s, grid, state, intr);
    if (!s.has_corners) {
        s.features.corners = detect_features(s.render.img, params.vo.harris);
        s.has_corners = true;
    }
    return s.features;
}

const FeatureSet& scratch_features(NodeScratch& s, const BeliefGrid& grid,
                                   const ExtendedState& state,
                                   const CameraIntrinsics& intr,
                                   const EdgeCostParams& params) {
    scratch_corners(s, grid, state, intr, params);
    if (!s.has_descriptors) {
        add_descriptors(s.features, s.render.img, params.vo.patch);
        s.has_descriptors = true;
    }
    return s.features;
}

int scratch_visible(NodeScratch& s, const FeatureMap& fm, const ExtendedState& state,
                    const CameraIntrinsics& intr) {
    if (!s.has_visible) {
        s.visible_count = visible_landmarks(fm, state, intr);
        s.has_visible = true;
    }
    return s.visible_count;
}

}  // namespace

EdgeEval evaluate_edge(MetricKind metric, const BeliefGrid& grid, const FeatureMap& fm,
                       const ExtendedState& a, const ExtendedState& b,
                       const CameraIntrinsics& intr, const EdgeCostParams& params,
                       NodeScratch* sa, NodeScratch* sb) {
    NodeScratch local_a, local_b;
    NodeScratch& ca = sa ? *sa : local_a;
    NodeScratch& cb = sb ? *sb : local_b;

    EdgeEval out;
    switch (metric) {
        case MetricKind::Displacement: {
            const SyntheticImage& ra = scratch_render(ca, grid, a, intr);
            const SyntheticImage& rb = scratch_render(cb, grid, b, intr);
            if (ra.valid_fraction < params.min_valid ||
                rb.valid_fraction < params.min_valid) {
                out.failed = true;
                out.cost = params.failure_penalty;
                return out;
            }
            // Match count is bounded by the smaller corner set, so a weak
            // view settles the edge before any descriptor work.
            const auto na = static_cast<int>(
                scratch_corners(ca, grid, a, intr, params).corners.size());
            const auto nb = static_cast<int>(
                scratch_corners(cb, grid, b, intr, params).corners.size());
            if (std::min(na, nb) < params.vo.ransac.min_inliers) {
                out.failed = true;
                out.cost = params.failure_penalty;
                return out;
            }
            const FeatureSet& fa = scratch_features(ca, grid, a, intr, params);
            const FeatureSet& fb = scratch_features(cb, grid, b, intr, params);
            const VoResult vo = vo_from_features(fa, fb, intr, a, params.vo);
            out.vo_ok = vo.ok;
            out.vo_displacement = vo.displacement;
            out.omega = vo.omega;
            if (!vo.ok) {
                out.failed = true;
                out.cost = params.failure_penalty;
                return out;
            }
            out.cost = std::abs(vo.displacement - true_displacement(a, b));
            return out;
        }
        case MetricKind::SyntheticFeatureCount: {
            const SyntheticImage& ra = scratch_render(ca, grid, a, intr);
            const SyntheticImage& rb = scratch_render(cb, grid, b, intr);
            if (ra.valid_fraction < params.min_valid ||
                rb.valid_fraction < params.min_valid) {
                out.failed = true;
                out.cost = params.failure_penalty;
                return out;
            }
            const auto na = static_cast<int>(
                scratch_corners(ca, grid, a, intr, params).corners.size());
            const auto nb = static_cast<int>(
                scratch_corners(cb, grid, b, intr, params).corners.size());
            out.cost = params.feature_scale / (1.0 + std::min(na, nb));
            return out;
        }
        case MetricKind::VisibleFeatureCount: {
            const int va = scratch_visible(ca, fm, a, intr);
            const int vb = scratch_visible(cb, fm, b, intr);
            out.cost = params.feature_scale / (1.0 + std::min(va, vb));
            return out;
        }
    }
    return out;
}

double edge_cost(MetricKind metric, const BeliefGrid& grid, const FeatureMap& fm,
                 const ExtendedState& a, const ExtendedState& b,
                 const CameraIntrinsics& intr, const EdgeCostParams& params) {
    return evaluate_edge(metric, grid, fm, a, b, intr, params).cost;
}

double trajectory_cost(MetricKind metric, const BeliefGrid& grid, const FeatureMap& fm,
                       std::span<const ExtendedState> schedule,
                       const CameraIntrinsics& intr, const EdgeCostParams& params) {
    if (schedule.size() < 2)
        throw ScheduleTooShort("trajectory_cost needs at least two states");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i].time < schedule[i - 1].time)
            throw Error("trajectory_cost: times must be nondecreasing");

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
        const double w = std::pow(params.gamma, static_cast<double>(i));
        total += w * edge_cost(metric, grid, fm, schedule[i], schedule[i + 1], intr,
                               params);
    }
    return total;
}

void export_synthetic(const SyntheticImage& s, const std::string& image_path,
                      const std::string& mask_path) {
    write_pgm(s.img, image_path);
    GrayImage mask(s.img.width, s.img.height);
    for (int y = 0; y < s.img.height; ++y)
        for (int x = 0; x < s.img.width; ++x)
            mask.set(x, y, s.img.is_valid(x, y) ? 1.0f : 0.0f);
    write_pgm(mask, mask_path);
}

}  // namespace vosap
