#pragma once

#include "vosap/belief.hpp"
#include "vosap/geometry.hpp"
#include "vosap/prediction.hpp"
#include "vosap/world.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vosap {

struct KeepOutZone {
    GroundPoint center;
    double radius = 0.0;
};

struct PrmParams {
    int samples = 200;
    int k_nearest = 10;
    double connect_radius = 3.0;
    bool shortcut = true;
    double speed = 0.042;  // m/s
    std::uint64_t seed = 1;
    std::vector<KeepOutZone> keep_out;
};

struct WorldBounds {
    double min_x = -11.0, min_y = -10.5, max_x = 11.0, max_y = 10.5;
};

/// Timed polyline in the body configuration space with a continuous-time
/// query. Headings follow the segment directions.
class BodyPath {
public:
    struct Waypoint {
        GroundPoint p;
        double t = 0.0;
        double heading = 0.0;  // heading of the outgoing segment
    };

    static BodyPath from_points(const std::vector<GroundPoint>& pts, double speed,
                                double start_heading);

    BodyPose query(double t) const;  // clamped to [start_time, end_time]
    double start_time() const { return waypoints_.front().t; }
    double end_time() const { return waypoints_.back().t; }
    double length() const;
    double speed() const { return speed_; }

    /// Time at which the traversed arc length from `from_t` reaches `s`
    /// (clamped to the path end).
    double time_after_distance(double from_t, double s) const;

    const std::vector<Waypoint>& waypoints() const { return waypoints_; }

private:
    std::vector<Waypoint> waypoints_;
    double speed_ = 0.042;
};

/// PRM over the free body space: uniform samples, k-nearest connections,
/// shortest path, optional shortcut smoothing, timed at constant speed.
/// Throws NoPath when keep-out zones disconnect start from goal.
BodyPath build_prm(const WorldBounds& bounds, const BodyPose& start,
                   const BodyPose& goal, const PrmParams& params);

/// Constraint set of the observation planner. The FOV ring is induced by the
/// tilt limits and mast height.
struct PlanConstraints {
    double t_search = 40.0;
    double d_near = 1.4;
    double d_far = 2.4248711305964285;
    double d_overlap = 1.5;
    double pan_min = -kPi / 2.0;
    double pan_max = kPi / 2.0;
    double tilt_min = deg2rad(30.0);
    double tilt_max = deg2rad(45.0);
    double mast_height = 1.4;

    static PlanConstraints from_tilt_limits(double mast_height, double tilt_min,
                                            double tilt_max, double d_overlap,
                                            double t_search);
};

struct PlanNode {
    double tau = 0.0;
    GroundPoint target;
    MastConfig mast;
    ExtendedState state;
    double cost_to_node = 0.0;
    int depth = 0;
    int parent = -1;
    bool chain_has_real_edge = false;  // any non-failure-priced edge on the chain
    bool edge_from_parent_failed = false;
};

struct ObservationSchedule {
    struct Entry {
        double tau = 0.0;
        MastConfig mast;
        ExtendedState state;
        bool risky = false;  // the edge into this observation was failure-priced
    };
    std::vector<Entry> entries;
    double total_cost = 0.0;
};

/// Edge feasibility per the time-order, search-window, FOV-ring, overlap and
/// mast-limit constraints.
bool satisfies_constraints(const PlanNode& pred, const PlanNode& next,
                           const BodyPath& path, const PlanConstraints& c);

struct VosapParams {
    int n_nodes = 250;
    double horizon_m = 3.0;
    double completion_fraction = 0.95;  // chains must reach this far into the window
    CameraIntrinsics intr;
    EdgeCostParams edge;
};

struct PlanTree {
    std::vector<PlanNode> nodes;
    std::uint64_t plan_seed = 0;
    double t0 = 0.0;
    double t_end = 0.0;
    double t_complete = 0.0;
    bool complete = false;
    ObservationSchedule best;  // best complete chain found so far
    int costed_edges = 0;

    /// Minimal accumulated cost over complete chains; +inf sentinel until a
    /// chain reaches the horizon end. Non-increasing in the iteration count
    /// for a fixed seed.
    double best_chain_cost() const;
};

double best_chain_cost(const PlanTree& tree);

/// Deterministic per-edge RANSAC seed used by the tree search (exposed so
/// audits can recompute edge costs bit-for-bit).
std::uint64_t plan_edge_seed(std::uint64_t plan_seed, int a_id, int b_id);

/// Spatio-temporal RRT* over (time along the body path, mast target).
PlanTree vosap_grow_tree(const BeliefGrid& grid, const FeatureMap& fm,
                         const BodyPath& path, const ExtendedState& root_state,
                         MetricKind metric, const PlanConstraints& c,
                         const VosapParams& params, std::uint64_t seed);

/// Best observation schedule of the grown tree; throws PlanIncomplete when
/// no chain with a non-failure edge reaches the horizon end.
ObservationSchedule vosap_plan(const BeliefGrid& grid, const FeatureMap& fm,
                               const BodyPath& path, const ExtendedState& root_state,
                               MetricKind metric, const PlanConstraints& c,
                               const VosapParams& params, std::uint64_t seed);

enum class SensingMode { Active, Passive };

SensingMode parse_mode(std::string_view name);
std::string mode_name(SensingMode m);

struct RunLogRow {
    int step = 0;
    double time = 0.0;
    double true_x = 0.0, true_y = 0.0;
    double est_x = 0.0, est_y = 0.0;
    double leg_error_m = 0.0;  // -1 when vo_ok is false
    std::string metric;
    bool vo_ok = false;
    bool reinit = false;
    // observation pose, used by the map plot and the observations sidecar
    double heading = 0.0;
    double pan = 0.0;
    double tilt = 0.0;
    double target_x = 0.0, target_y = 0.0;
};

struct RunLog {
    std::vector<RunLogRow> rows;
    bool failed = false;  // any leg with vo_ok = false

    /// Sum of per-leg |estimated - true| displacement errors over ok legs.
    double cumulative_error() const;
};

struct RhcConfig {
    SensingMode mode = SensingMode::Active;
    MetricKind metric = MetricKind::Displacement;
    double horizon_m = 3.0;
    int n_nodes = 250;
    double completion_fraction = 0.95;
    double goal_tolerance = 0.25;
    int max_steps = 400;
    double passive_step_m = 0.5;
    double sigma_r = 0.02;
    double coverage_min_fraction = 0.45;
    bool paired_passive = false;  // also capture a passive leg at every step
    bool feature_alignment = true;
    std::uint64_t seed = 1;
    double init_tilt = deg2rad(30.0);
    std::vector<double> init_pans = {deg2rad(-45.0), 0.0, deg2rad(45.0)};
    CameraIntrinsics intr;
    PlanConstraints constraints;
    EdgeCostParams edge;
    AlignParams align;
    PrmParams prm;
};

struct RunOutcome {
    RunLog primary;
    std::optional<RunLog> passive;  // paired baseline when requested
    int reinit_count = 0;
    int planner_incomplete_count = 0;
    std::vector<std::pair<int, double>> planner_ms;  // step -> wall milliseconds
};

/// Receding-horizon executive: coverage pre-check (reinit on degeneracy),
/// plan over the horizon, execute the first scheduled observation, run VO
/// against the previous capture, update the map and feature map, repeat
/// until the body path is exhausted. Throws MaxStepsExceeded.
RunOutcome rhc_execute(const TerrainWorld& world, BeliefGrid& grid, FeatureMap& fm,
                       const BodyPose& start, const BodyPose& goal,
                       const RhcConfig& config);

}  // namespace vosap
