#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vosap/belief.hpp"
#include "vosap/errors.hpp"
#include "vosap/planner.hpp"
#include "vosap/prediction.hpp"
#include "vosap/rng.hpp"
#include "vosap/world.hpp"

#include <cmath>
#include <set>

using namespace vosap;

namespace {

CameraIntrinsics default_intr() {
    return CameraIntrinsics::from_fov(640, 480, 82.0, 66.0);
}

ExtendedState make_state(double x, double y, double heading, double pan,
                         double tilt_deg) {
    ExtendedState s;
    s.body = {x, y, heading};
    s.mast = {pan, deg2rad(tilt_deg), 1.4};
    return s;
}

struct Fixture {
    TerrainWorld world;
    BeliefGrid grid;
    FeatureMap fm;
    BodyPath path;
    ExtendedState root;
    CameraIntrinsics intr;
    PlanConstraints constraints;

    static Fixture make(Scenario sc, std::uint64_t seed) {
        WorldSpec spec;
        spec.scenario = sc;
        Fixture f{generate_terrain(seed, spec),
                  BeliefGrid{},
                  FeatureMap{0.02},
                  BodyPath::from_points({{-4.0, 0.0}, {4.0, 0.0}}, 0.042, 0.0),
                  ExtendedState{},
                  default_intr(),
                  PlanConstraints::from_tilt_limits(1.4, deg2rad(30.0), deg2rad(45.0),
                                                    1.5, 40.0)};
        std::vector<ExtendedState> states;
        std::vector<GrayImage> images;
        for (const double pan : {-45.0, 0.0, 45.0}) {
            states.push_back(make_state(-4.0, 0.0, 0.0, deg2rad(pan), 30.0));
            images.push_back(capture_image(f.world, states.back(), f.intr,
                                           {0.02, derive_seed(seed, 77, images.size())}));
        }
        NoiseParams p;
        f.grid = init_map(images, states, f.intr,  p,
                          GridGeometry::cover(-11, -10.5, 11, 10.5, 0.02));
        for (std::size_t i = 0; i < images.size(); ++i)
            update_feature_map(f.fm, images[i],
                               invert_homography(ground_homography(f.intr, states[i])),
                               f.intr, HarrisParams{});
        f.root = make_state(-4.0, 0.0, 0.0, 0.0, 30.0);
        return f;
    }

    VosapParams params(int n_nodes) const {
        VosapParams vp;
        vp.n_nodes = n_nodes;
        vp.horizon_m = 3.0;
        vp.intr = intr;
        vp.edge.vo.harris.max_corners = 200;
        return vp;
    }
};

}  // namespace

TEST_CASE("prm: straight line in the open") {
    PrmParams params;
    const WorldBounds bounds{-11, -10.5, 11, 10.5};
    const BodyPath path = build_prm(bounds, {0, 0, 0}, {10, 0, 0}, params);
    CHECK(path.length() <= 10.5);
    CHECK(path.end_time() - path.start_time() ==
          doctest::Approx(path.length() / 0.042).epsilon(1e-9));

    const BodyPose mid = path.query((path.start_time() + path.end_time()) / 2.0);
    CHECK(mid.y == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("prm: start equals goal") {
    PrmParams params;
    const WorldBounds bounds{-11, -10.5, 11, 10.5};
    const BodyPath path = build_prm(bounds, {1, 2, 0.5}, {1, 2, 0.5}, params);
    CHECK(path.waypoints().size() == 1);
    CHECK(path.end_time() == path.start_time());
    const BodyPose p = path.query(10.0);
    CHECK(p.x == doctest::Approx(1.0));
    CHECK(p.y == doctest::Approx(2.0));
}

TEST_CASE("prm: keep-out zones reroute or disconnect") {
    PrmParams params;
    params.keep_out.push_back({{0.0, 0.0}, 2.0});
    const WorldBounds bounds{-11, -10.5, 11, 10.5};
    const BodyPath path = build_prm(bounds, {-6, 0, 0}, {6, 0, 0}, params);
    CHECK(path.length() > 12.0);  // must bend around the disc
    for (const auto& w : path.waypoints())
        CHECK(std::hypot(w.p.x, w.p.y) >= 2.0 - 1e-9);

    PrmParams blocked = params;
    blocked.keep_out = {{{0.0, 0.0}, 30.0}};  // covers everything
    CHECK_THROWS_AS((void)build_prm(bounds, {-6, 0, 0}, {6, 0, 0}, blocked), NoPath);
}

TEST_CASE("prm: interpolation stays on the polyline") {
    PrmParams params;
    params.shortcut = false;
    const WorldBounds bounds{-11, -10.5, 11, 10.5};
    const BodyPath path = build_prm(bounds, {-5, -3, 0}, {5, 3, 0}, params);
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        const double t = rng.uniform(path.start_time(), path.end_time());
        const BodyPose p = path.query(t);
        // Distance from the queried point to the polyline is ~0.
        double best = 1e18;
        const auto& w = path.waypoints();
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            const double dx = w[i + 1].p.x - w[i].p.x;
            const double dy = w[i + 1].p.y - w[i].p.y;
            const double len2 = dx * dx + dy * dy;
            const double u =
                std::clamp(((p.x - w[i].p.x) * dx + (p.y - w[i].p.y) * dy) / len2, 0.0,
                           1.0);
            best = std::min(best, std::hypot(p.x - (w[i].p.x + u * dx),
                                             p.y - (w[i].p.y + u * dy)));
        }
        CHECK(best < 1e-9);
    }
}

TEST_CASE("constraints: causality, overlap, ring") {
    const PlanConstraints c =
        PlanConstraints::from_tilt_limits(1.4, deg2rad(30.0), deg2rad(45.0), 1.5, 40.0);
    const BodyPath path = BodyPath::from_points({{0, 0}, {8, 0}}, 0.042, 0.0);

    const auto node_at = [&](double tau, double tx, double ty) {
        PlanNode n;
        n.tau = tau;
        const BodyPose body = path.query(tau);
        n.target = {tx, ty};
        n.mast = mast_config_for_target(body, n.target, c.mast_height);
        n.state = {body, n.mast, tau};
        return n;
    };

    const PlanNode a = node_at(10.0, 2.0, 0.3);
    const PlanNode b = node_at(20.0, 2.4, 0.4);
    CHECK(satisfies_constraints(a, b, path, c));
    CHECK_FALSE(satisfies_constraints(b, a, path, c));  // causality

    // Search window.
    const PlanNode far_future = node_at(55.0, 4.0, 0.4);
    CHECK_FALSE(satisfies_constraints(a, far_future, path, c));

    // Overlap bound.
    const PlanNode swung = node_at(11.0, 2.0, -1.8);
    CHECK(distance(a.target, swung.target) > c.d_overlap);
    CHECK_FALSE(satisfies_constraints(a, swung, path, c));

    // FOV ring bound: target too far from the body.
    PlanNode outside = node_at(12.0, 3.2, 0.0);
    const double r = distance(outside.target,
                              {outside.state.body.x, outside.state.body.y});
    CHECK(r > c.d_far);
    CHECK_FALSE(satisfies_constraints(a, outside, path, c));
}

TEST_CASE("vosap tree: every edge is constraint-valid, taus in the window") {
    const Fixture f = Fixture::make(Scenario::Split, 3);
    for (const std::uint64_t seed : {11ull, 12ull}) {
        const PlanTree tree =
            vosap_grow_tree(f.grid, f.fm, f.path, f.root, MetricKind::Displacement,
                            f.constraints, f.params(120), seed);
        REQUIRE(tree.nodes.size() > 10);
        for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
            const PlanNode& n = tree.nodes[i];
            REQUIRE(n.parent >= 0);
            const PlanNode& p = tree.nodes[static_cast<std::size_t>(n.parent)];
            CHECK(satisfies_constraints(p, n, f.path, f.constraints));
            CHECK(n.tau >= tree.t0);
            CHECK(n.tau <= tree.t_end + 1e-9);
        }
    }
}

TEST_CASE("vosap: rewiring keeps audited chain costs consistent") {
    const Fixture f = Fixture::make(Scenario::Split, 5);
    const std::uint64_t seed = 21;
    const VosapParams vp = f.params(100);
    const PlanTree tree = vosap_grow_tree(f.grid, f.fm, f.path, f.root,
                                          MetricKind::Displacement, f.constraints, vp,
                                          seed);
    REQUIRE(tree.nodes.size() > 10);

    for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
        // Recompute the chain cost from scratch with the same per-edge seeds.
        std::vector<int> chain;
        for (int u = static_cast<int>(i); u != -1;
             u = tree.nodes[static_cast<std::size_t>(u)].parent)
            chain.push_back(u);
        std::reverse(chain.begin(), chain.end());
        double cost = 0.0;
        for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
            EdgeCostParams p = vp.edge;
            p.vo.ransac.seed = plan_edge_seed(seed, chain[k], chain[k + 1]);
            const double e = edge_cost(MetricKind::Displacement, f.grid, f.fm,
                                       tree.nodes[static_cast<std::size_t>(chain[k])].state,
                                       tree.nodes[static_cast<std::size_t>(chain[k + 1])].state,
                                       f.intr, p);
            cost += std::pow(vp.edge.gamma, static_cast<double>(k)) * e;
        }
        CHECK(std::abs(cost - tree.nodes[i].cost_to_node) < 1e-9);
    }
}

TEST_CASE("vosap: anytime best cost is non-increasing across nested runs") {
    const Fixture f = Fixture::make(Scenario::Split, 7);
    const std::uint64_t seed = 33;
    double prev = std::numeric_limits<double>::infinity();
    for (const int n : {50, 100, 250}) {
        const PlanTree tree =
            vosap_grow_tree(f.grid, f.fm, f.path, f.root, MetricKind::Displacement,
                            f.constraints, f.params(n), seed);
        CHECK(best_chain_cost(tree) <= prev + 1e-12);
        prev = best_chain_cost(tree);
    }
    CHECK(std::isfinite(prev));
}

TEST_CASE("vosap: empty tree reports an infinite best cost") {
    const Fixture f = Fixture::make(Scenario::Split, 7);
    const PlanTree tree = vosap_grow_tree(f.grid, f.fm, f.path, f.root,
                                          MetricKind::Displacement, f.constraints,
                                          f.params(0), 1);
    CHECK(std::isinf(best_chain_cost(tree)));
    CHECK_FALSE(tree.complete);
}

TEST_CASE("vosap: unobserved belief cannot complete a plan") {
    const Fixture f = Fixture::make(Scenario::Split, 9);
    BeliefGrid empty(GridGeometry::cover(-11, -10.5, 11, 10.5, 0.02), NoiseParams{});
    CHECK_THROWS_AS((void)vosap_plan(empty, f.fm, f.path, f.root,
                                     MetricKind::Displacement, f.constraints,
                                     f.params(80), 1),
                    PlanIncomplete);
}

TEST_CASE("vosap: schedule is causal, bounded, and within mast limits") {
    const Fixture f = Fixture::make(Scenario::Split, 13);
    const ObservationSchedule s =
        vosap_plan(f.grid, f.fm, f.path, f.root, MetricKind::Displacement,
                   f.constraints, f.params(150), 5);
    REQUIRE(s.entries.size() >= 2);
    const double window = f.path.time_after_distance(0.0, 3.0);
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        const auto& e = s.entries[i];
        CHECK(e.tau <= window + 1e-9);
        if (i > 0) {
            CHECK(e.tau >= s.entries[i - 1].tau);
            CHECK(e.tau - s.entries[i - 1].tau < f.constraints.t_search);
        }
        CHECK(e.mast.pan >= -kPi / 2 - 1e-9);
        CHECK(e.mast.pan <= kPi / 2 + 1e-9);
        CHECK(e.mast.tilt >= deg2rad(30.0) - 1e-9);
        CHECK(e.mast.tilt <= deg2rad(45.0) + 1e-9);
    }
}

TEST_CASE("vosap: identical seed gives an identical schedule") {
    const Fixture f = Fixture::make(Scenario::Split, 15);
    const ObservationSchedule a =
        vosap_plan(f.grid, f.fm, f.path, f.root, MetricKind::SyntheticFeatureCount,
                   f.constraints, f.params(120), 99);
    const ObservationSchedule b =
        vosap_plan(f.grid, f.fm, f.path, f.root, MetricKind::SyntheticFeatureCount,
                   f.constraints, f.params(120), 99);
    REQUIRE(a.entries.size() == b.entries.size());
    CHECK(a.total_cost == b.total_cost);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].tau == b.entries[i].tau);
        CHECK(a.entries[i].state.body.x == b.entries[i].state.body.x);
        CHECK(a.entries[i].mast.pan == b.entries[i].mast.pan);
    }
}

TEST_CASE("vosap: split world steers the gaze toward the textured half") {
    const Fixture f = Fixture::make(Scenario::Split, 17);
    int rock = 0, total = 0;
    for (const std::uint64_t seed : {1ull, 2ull}) {
        const ObservationSchedule s =
            vosap_plan(f.grid, f.fm, f.path, f.root, MetricKind::Displacement,
                       f.constraints, f.params(150), seed);
        for (std::size_t i = 1; i < s.entries.size(); ++i) {
            const GroundPoint t = mast_target(s.entries[i].state);
            if (t.y > 0.0) ++rock;
            ++total;
        }
    }
    REQUIRE(total >= 4);
    CHECK(rock >= total * 7 / 10);
}

TEST_CASE("vosap: well-mapped rock world completes cheaply under J_D") {
    const Fixture f = Fixture::make(Scenario::UniformRock, 19);
    const ObservationSchedule s =
        vosap_plan(f.grid, f.fm, f.path, f.root, MetricKind::Displacement,
                   f.constraints, f.params(150), 3);
    const std::size_t legs = s.entries.size() - 1;
    REQUIRE(legs >= 1);
    CHECK(s.total_cost < 0.1 * static_cast<double>(legs));
}

TEST_CASE("rhc: reaches the goal on rock with small cumulative error") {
    WorldSpec spec;
    spec.scenario = Scenario::UniformRock;
    const TerrainWorld world = generate_terrain(23, spec);
    BeliefGrid grid(GridGeometry::cover(-11, -10.5, 11, 10.5, 0.02), NoiseParams{});
    FeatureMap fm(0.02);

    RhcConfig cfg;
    cfg.intr = default_intr();
    cfg.n_nodes = 60;
    cfg.seed = 23;
    cfg.max_steps = 60;
    cfg.edge.vo.harris.max_corners = 200;
    const RunOutcome out = rhc_execute(world, grid, fm, {-2.0, 0, 0}, {2.0, 0, 0}, cfg);

    REQUIRE(out.primary.rows.size() >= 3);
    CHECK_FALSE(out.primary.failed);
    CHECK(out.primary.cumulative_error() < 0.3);
    const auto& last = out.primary.rows.back();
    CHECK(std::hypot(last.true_x - 2.0, last.true_y) < 0.26);
    // Taus advance monotonically.
    for (std::size_t i = 1; i < out.primary.rows.size(); ++i)
        CHECK(out.primary.rows[i].time > out.primary.rows[i - 1].time);
}

TEST_CASE("rhc: passive mode on sand records VO failures") {
    WorldSpec spec;
    spec.scenario = Scenario::UniformSand;
    const TerrainWorld world = generate_terrain(29, spec);
    BeliefGrid grid(GridGeometry::cover(-11, -10.5, 11, 10.5, 0.02), NoiseParams{});
    FeatureMap fm(0.02);

    RhcConfig cfg;
    cfg.intr = default_intr();
    cfg.mode = SensingMode::Passive;
    cfg.seed = 29;
    cfg.max_steps = 40;
    const RunOutcome out = rhc_execute(world, grid, fm, {-1.5, 0, 0}, {1.5, 0, 0}, cfg);
    REQUIRE(!out.primary.rows.empty());
    CHECK(out.primary.failed);
    int failures = 0;
    for (const auto& r : out.primary.rows) failures += r.vo_ok ? 0 : 1;
    CHECK(failures >= 1);
    for (const auto& r : out.primary.rows) CHECK(r.metric == "passive");
}

TEST_CASE("rhc: paired runs share body poses between pipelines") {
    WorldSpec spec;
    spec.scenario = Scenario::UniformRock;
    const TerrainWorld world = generate_terrain(31, spec);
    BeliefGrid grid(GridGeometry::cover(-11, -10.5, 11, 10.5, 0.02), NoiseParams{});
    FeatureMap fm(0.02);

    RhcConfig cfg;
    cfg.intr = default_intr();
    cfg.n_nodes = 50;
    cfg.seed = 31;
    cfg.max_steps = 40;
    cfg.paired_passive = true;
    cfg.edge.vo.harris.max_corners = 200;
    const RunOutcome out = rhc_execute(world, grid, fm, {-1.5, 0, 0}, {1.5, 0, 0}, cfg);
    REQUIRE(out.passive.has_value());
    REQUIRE(out.passive->rows.size() == out.primary.rows.size());
    for (std::size_t i = 0; i < out.primary.rows.size(); ++i) {
        CHECK(out.primary.rows[i].true_x == out.passive->rows[i].true_x);
        CHECK(out.primary.rows[i].true_y == out.passive->rows[i].true_y);
        CHECK(out.primary.rows[i].time == out.passive->rows[i].time);
        CHECK(out.passive->rows[i].pan == 0.0);
    }
}
