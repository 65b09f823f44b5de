#include "vosap/planner.hpp"

#include "vosap/errors.hpp"
#include "vosap/rng.hpp"
#include "vosap/vision.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace vosap {

namespace {
constexpr double kEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

// ---------------------------------------------------------------------------
// BodyPath

BodyPath BodyPath::from_points(const std::vector<GroundPoint>& pts, double speed,
                               double start_heading) {
    if (pts.empty()) throw Error("BodyPath requires at least one point");
    BodyPath path;
    path.speed_ = speed;

    std::vector<GroundPoint> clean;
    clean.push_back(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (distance(pts[i], clean.back()) > 1e-12) clean.push_back(pts[i]);

    double t = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        Waypoint w;
        w.p = clean[i];
        w.t = t;
        if (i + 1 < clean.size()) {
            const double d = distance(clean[i], clean[i + 1]);
            w.heading = std::atan2(clean[i + 1].y - clean[i].y, clean[i + 1].x - clean[i].x);
            t += d / speed;
        } else {
            w.heading = clean.size() > 1 ? path.waypoints_.back().heading : start_heading;
        }
        path.waypoints_.push_back(w);
    }
    return path;
}

BodyPose BodyPath::query(double t) const {
    const auto& w = waypoints_;
    if (w.size() == 1 || t <= w.front().t)
        return {w.front().p.x, w.front().p.y, w.front().heading};
    if (t >= w.back().t) return {w.back().p.x, w.back().p.y, w.back().heading};

    std::size_t hi = 1;
    while (w[hi].t < t) ++hi;
    const auto& a = w[hi - 1];
    const auto& b = w[hi];
    const double f = (t - a.t) / (b.t - a.t);
    return {a.p.x + f * (b.p.x - a.p.x), a.p.y + f * (b.p.y - a.p.y), a.heading};
}

double BodyPath::length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < waypoints_.size(); ++i)
        s += distance(waypoints_[i - 1].p, waypoints_[i].p);
    return s;
}

double BodyPath::time_after_distance(double from_t, double s) const {
    if (s <= 0.0) return std::min(std::max(from_t, start_time()), end_time());
    return std::min(end_time(), std::max(from_t, start_time()) + s / speed_);
}

// ---------------------------------------------------------------------------
// PRM

namespace {

bool in_keep_out(const GroundPoint& p, const std::vector<KeepOutZone>& zones) {
    for (const auto& z : zones)
        if (distance(p, z.center) < z.radius) return true;
    return false;
}

bool segment_clear(const GroundPoint& a, const GroundPoint& b,
                   const std::vector<KeepOutZone>& zones) {
    for (const auto& z : zones) {
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        double t = 0.0;
        if (len2 > 1e-18)
            t = std::clamp(((z.center.x - a.x) * dx + (z.center.y - a.y) * dy) / len2,
                           0.0, 1.0);
        const GroundPoint q{a.x + t * dx, a.y + t * dy};
        if (distance(q, z.center) < z.radius) return false;
    }
    return true;
}

}  // namespace

BodyPath build_prm(const WorldBounds& bounds, const BodyPose& start,
                   const BodyPose& goal, const PrmParams& params) {
    const GroundPoint s{start.x, start.y};
    const GroundPoint g{goal.x, goal.y};
    if (distance(s, g) < 1e-9) return BodyPath::from_points({s}, params.speed, start.heading);

    std::vector<GroundPoint> nodes = {s, g};
    Rng rng(derive_seed(params.seed, 0x9127u));
    for (int i = 0; i < params.samples; ++i) {
        const GroundPoint p{rng.uniform(bounds.min_x, bounds.max_x),
                            rng.uniform(bounds.min_y, bounds.max_y)};
        if (!in_keep_out(p, params.keep_out)) nodes.push_back(p);
    }

    const int n = static_cast<int>(nodes.size());
    std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
    std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            order[static_cast<std::size_t>(j)] = {distance(nodes[static_cast<std::size_t>(i)],
                                                           nodes[static_cast<std::size_t>(j)]),
                                                  j};
        std::sort(order.begin(), order.end());
        int added = 0;
        for (const auto& [d, j] : order) {
            if (j == i) continue;
            if (added >= params.k_nearest) break;
            if (d > params.connect_radius) break;
            if (!segment_clear(nodes[static_cast<std::size_t>(i)],
                               nodes[static_cast<std::size_t>(j)], params.keep_out))
                continue;
            adj[static_cast<std::size_t>(i)].push_back({j, d});
            adj[static_cast<std::size_t>(j)].push_back({i, d});
            ++added;
        }
    }

    // Dijkstra from start (0) to goal (1).
    std::vector<double> dist(static_cast<std::size_t>(n), kInf);
    std::vector<int> prev(static_cast<std::size_t>(n), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[0] = 0.0;
    pq.push({0.0, 0});
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[static_cast<std::size_t>(u)] + 1e-15) continue;
        if (u == 1) break;
        for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
            const double nd = d + w;
            if (nd < dist[static_cast<std::size_t>(v)] - 1e-15) {
                dist[static_cast<std::size_t>(v)] = nd;
                prev[static_cast<std::size_t>(v)] = u;
                pq.push({nd, v});
            }
        }
    }
    if (!std::isfinite(dist[1])) throw NoPath("PRM cannot connect start to goal");

    std::vector<GroundPoint> pts;
    for (int u = 1; u != -1; u = prev[static_cast<std::size_t>(u)])
        pts.push_back(nodes[static_cast<std::size_t>(u)]);
    std::reverse(pts.begin(), pts.end());

    if (params.shortcut && pts.size() > 2) {
        std::vector<GroundPoint> cut;
        std::size_t i = 0;
        cut.push_back(pts[0]);
        while (i + 1 < pts.size()) {
            std::size_t j = pts.size() - 1;
            while (j > i + 1 && !segment_clear(pts[i], pts[j], params.keep_out)) --j;
            cut.push_back(pts[j]);
            i = j;
        }
        pts = std::move(cut);
    }

    return BodyPath::from_points(pts, params.speed, start.heading);
}

// ---------------------------------------------------------------------------
// Constraints

PlanConstraints PlanConstraints::from_tilt_limits(double mast_height, double tilt_min,
                                                  double tilt_max, double d_overlap,
                                                  double t_search) {
    PlanConstraints c;
    c.mast_height = mast_height;
    c.tilt_min = tilt_min;
    c.tilt_max = tilt_max;
    c.d_near = mast_height / std::tan(tilt_max);
    c.d_far = mast_height / std::tan(tilt_min);
    c.d_overlap = d_overlap;
    c.t_search = t_search;
    return c;
}

namespace {

bool mast_within_limits(const PlanNode& node, const PlanConstraints& c) {
    return node.mast.pan >= c.pan_min - kEps && node.mast.pan <= c.pan_max + kEps &&
           node.mast.tilt >= c.tilt_min - kEps && node.mast.tilt <= c.tilt_max + kEps;
}

bool in_fov_ring(const PlanNode& node, const PlanConstraints& c) {
    const GroundPoint body{node.state.body.x, node.state.body.y};
    const double r = distance(node.target, body);
    return r >= c.d_near - kEps && r <= c.d_far + kEps;
}

}  // namespace

bool satisfies_constraints(const PlanNode& pred, const PlanNode& next,
                           const BodyPath& path, const PlanConstraints& c) {
    (void)path;
    if (pred.tau > next.tau) return false;                    // causality
    if (next.tau - pred.tau >= c.t_search) return false;      // search window
    if (!in_fov_ring(pred, c) || !in_fov_ring(next, c)) return false;
    if (distance(pred.target, next.target) >= c.d_overlap) return false;
    if (!mast_within_limits(pred, c) || !mast_within_limits(next, c)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Spatio-temporal RRT*

std::uint64_t plan_edge_seed(std::uint64_t plan_seed, int a_id, int b_id) {
    return derive_seed(plan_seed, static_cast<std::uint64_t>(a_id),
                       static_cast<std::uint64_t>(b_id), 0xed6eu);
}

double PlanTree::best_chain_cost() const { return complete ? best.total_cost : kInf; }

double best_chain_cost(const PlanTree& tree) { return tree.best_chain_cost(); }

namespace {

struct TreeScratch {
    std::vector<NodeScratch> node;
    std::unordered_map<std::uint64_t, EdgeEval> edge;

    static std::uint64_t key(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }
};

ObservationSchedule snapshot_chain(const PlanTree& tree, int leaf) {
    ObservationSchedule s;
    std::vector<int> chain;
    for (int u = leaf; u != -1; u = tree.nodes[static_cast<std::size_t>(u)].parent)
        chain.push_back(u);
    std::reverse(chain.begin(), chain.end());
    for (int u : chain) {
        const PlanNode& n = tree.nodes[static_cast<std::size_t>(u)];
        s.entries.push_back({n.tau, n.mast, n.state, n.edge_from_parent_failed});
    }
    s.total_cost = tree.nodes[static_cast<std::size_t>(leaf)].cost_to_node;
    return s;
}

}  // namespace

PlanTree vosap_grow_tree(const BeliefGrid& grid, const FeatureMap& fm,
                         const BodyPath& path, const ExtendedState& root_state,
                         MetricKind metric, const PlanConstraints& c,
                         const VosapParams& params, std::uint64_t seed) {
    PlanTree tree;
    tree.plan_seed = seed;
    tree.t0 = root_state.time;
    tree.t_end = path.time_after_distance(root_state.time, params.horizon_m);
    tree.t_complete = tree.t0 + params.completion_fraction * (tree.t_end - tree.t0);
    tree.best.total_cost = kInf;

    PlanNode root;
    root.tau = tree.t0;
    root.state = root_state;
    root.mast = root_state.mast;
    root.target = mast_target(root_state);
    tree.nodes.push_back(root);

    if (tree.t_end <= tree.t0 + kEps) return tree;

    TreeScratch scratch;
    scratch.node.resize(1);
    std::vector<std::vector<int>> children(1);

    Rng sampler(derive_seed(seed, 0x5a3bu));

    const auto eval_edge = [&](int a_id, int b_id, const PlanNode& a, const PlanNode& b,
                               NodeScratch* sa, NodeScratch* sb) {
        EdgeCostParams p = params.edge;
        p.vo.ransac.seed = plan_edge_seed(seed, a_id, b_id);
        ++tree.costed_edges;
        return evaluate_edge(metric, grid, fm, a.state, b.state, params.intr, p, sa, sb);
    };

    const auto refresh_best = [&]() {
        int best_leaf = -1;
        double best_cost = kInf;
        for (int i = 1; i < static_cast<int>(tree.nodes.size()); ++i) {
            const PlanNode& n = tree.nodes[static_cast<std::size_t>(i)];
            if (n.tau < tree.t_complete) continue;
            if (!n.chain_has_real_edge) continue;
            if (n.cost_to_node < best_cost) {
                best_cost = n.cost_to_node;
                best_leaf = i;
            }
        }
        if (best_leaf >= 0 && best_cost < tree.best.total_cost - 1e-15) {
            tree.best = snapshot_chain(tree, best_leaf);
            tree.complete = true;
        }
    };

    for (int iter = 0; iter < params.n_nodes; ++iter) {
        // Fixed three draws per iteration keeps nested runs prefix-stable.
        const double tau = sampler.uniform(tree.t0, tree.t_end);
        const double pan = sampler.uniform(c.pan_min, c.pan_max);
        const double r2 = sampler.uniform(c.d_near * c.d_near, c.d_far * c.d_far);
        const double radius = std::sqrt(r2);

        const BodyPose body = path.query(tau);
        PlanNode cand;
        cand.tau = tau;
        const double bearing = body.heading + pan;
        cand.target = {body.x + radius * std::cos(bearing),
                       body.y + radius * std::sin(bearing)};
        cand.mast = mast_config_for_target(body, cand.target, c.mast_height);
        cand.state = {body, cand.mast, tau};

        const int cand_id = static_cast<int>(tree.nodes.size());
        NodeScratch cand_scratch;

        int best_parent = -1;
        double best_cost = kInf;
        EdgeEval best_edge;
        std::vector<std::pair<int, EdgeEval>> pending;

        for (int j = 0; j < static_cast<int>(tree.nodes.size()); ++j) {
            const PlanNode& pred = tree.nodes[static_cast<std::size_t>(j)];
            if (pred.tau > tau) continue;
            if (!satisfies_constraints(pred, cand, path, c)) continue;
            const EdgeEval e = eval_edge(j, cand_id, pred, cand,
                                         &scratch.node[static_cast<std::size_t>(j)],
                                         &cand_scratch);
            pending.push_back({j, e});
            const double cost =
                pred.cost_to_node + std::pow(params.edge.gamma, pred.depth) * e.cost;
            if (cost < best_cost) {
                best_cost = cost;
                best_parent = j;
                best_edge = e;
            }
        }
        if (best_parent < 0) continue;  // no feasible connection; node discarded

        cand.parent = best_parent;
        cand.depth = tree.nodes[static_cast<std::size_t>(best_parent)].depth + 1;
        cand.cost_to_node = best_cost;
        cand.chain_has_real_edge =
            tree.nodes[static_cast<std::size_t>(best_parent)].chain_has_real_edge ||
            !best_edge.failed;
        cand.edge_from_parent_failed = best_edge.failed;
        tree.nodes.push_back(cand);
        scratch.node.push_back(std::move(cand_scratch));
        children.push_back({});
        children[static_cast<std::size_t>(best_parent)].push_back(cand_id);
        for (const auto& [j, e] : pending) scratch.edge[TreeScratch::key(j, cand_id)] = e;

        // Rewire later nodes through the new one when that lowers their cost.
        const PlanNode& fixed_cand = tree.nodes[static_cast<std::size_t>(cand_id)];
        for (int j = 1; j < cand_id; ++j) {
            PlanNode& succ = tree.nodes[static_cast<std::size_t>(j)];
            if (succ.tau < fixed_cand.tau) continue;
            if (!satisfies_constraints(fixed_cand, succ, path, c)) continue;
            const auto key = TreeScratch::key(cand_id, j);
            auto it = scratch.edge.find(key);
            if (it == scratch.edge.end()) {
                const EdgeEval e = eval_edge(cand_id, j, fixed_cand, succ,
                                             &scratch.node[static_cast<std::size_t>(cand_id)],
                                             &scratch.node[static_cast<std::size_t>(j)]);
                it = scratch.edge.emplace(key, e).first;
            }
            const double cost = fixed_cand.cost_to_node +
                                std::pow(params.edge.gamma, fixed_cand.depth) * it->second.cost;
            if (cost < succ.cost_to_node - 1e-15) {
                auto& old_children =
                    children[static_cast<std::size_t>(succ.parent)];
                old_children.erase(std::find(old_children.begin(), old_children.end(), j));
                succ.parent = cand_id;
                children[static_cast<std::size_t>(cand_id)].push_back(j);

                // Propagate depth/cost/flags through the rewired subtree.
                std::vector<int> stack = {j};
                while (!stack.empty()) {
                    const int u = stack.back();
                    stack.pop_back();
                    PlanNode& nu = tree.nodes[static_cast<std::size_t>(u)];
                    const PlanNode& pu = tree.nodes[static_cast<std::size_t>(nu.parent)];
                    const auto ek = TreeScratch::key(nu.parent, u);
                    const EdgeEval& e = scratch.edge.at(ek);
                    nu.depth = pu.depth + 1;
                    nu.cost_to_node =
                        pu.cost_to_node + std::pow(params.edge.gamma, pu.depth) * e.cost;
                    nu.chain_has_real_edge = pu.chain_has_real_edge || !e.failed;
                    nu.edge_from_parent_failed = e.failed;
                    for (int ch : children[static_cast<std::size_t>(u)]) stack.push_back(ch);
                }
            }
        }

        refresh_best();
    }

    return tree;
}

ObservationSchedule vosap_plan(const BeliefGrid& grid, const FeatureMap& fm,
                               const BodyPath& path, const ExtendedState& root_state,
                               MetricKind metric, const PlanConstraints& c,
                               const VosapParams& params, std::uint64_t seed) {
    const PlanTree tree =
        vosap_grow_tree(grid, fm, path, root_state, metric, c, params, seed);
    if (!tree.complete)
        throw PlanIncomplete("no chain with a usable edge reaches the horizon end");
    return tree.best;
}

// ---------------------------------------------------------------------------
// Receding-horizon executive

SensingMode parse_mode(std::string_view name) {
    if (name == "active") return SensingMode::Active;
    if (name == "passive") return SensingMode::Passive;
    throw ConfigError("unknown mode: " + std::string(name));
}

std::string mode_name(SensingMode m) {
    return m == SensingMode::Active ? "active" : "passive";
}

double RunLog::cumulative_error() const {
    double sum = 0.0;
    for (const auto& r : rows)
        if (r.vo_ok) sum += r.leg_error_m;
    return sum;
}

namespace {

struct Pipeline {
    GrayImage prev_img;
    ExtendedState prev_state;
    double est_x = 0.0, est_y = 0.0;
    RunLog log;
};

MastConfig passive_mast(const RhcConfig& cfg) {
    MastConfig m;
    m.pan = 0.0;
    m.tilt = cfg.init_tilt;
    m.mast_height = cfg.constraints.mast_height;
    return m;
}

// Captures the three-view initialization sequence at the current pose and
// fuses it into the map. Initialization trusts the state; feature alignment
// is attempted first for mid-run reinits.
void run_init_sequence(const TerrainWorld& world, BeliefGrid& grid, FeatureMap& fm,
                       const ExtendedState& at, const RhcConfig& cfg, int step,
                       bool allow_alignment) {
    int k = 0;
    for (const double pan : cfg.init_pans) {
        ExtendedState s = at;
        s.mast.pan = pan;
        s.mast.tilt = cfg.init_tilt;
        s.mast.mast_height = cfg.constraints.mast_height;
        SensorNoise noise{cfg.sigma_r,
                          derive_seed(cfg.seed, 0x1217u + static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(k))};
        const GrayImage img = capture_image(world, s, cfg.intr, noise);
        MapAlignment alignment;
        if (allow_alignment && cfg.feature_alignment) {
            try {
                AlignParams ap = cfg.align;
                ap.vo.ransac.seed = derive_seed(cfg.seed, 0xa119u,
                                                static_cast<std::uint64_t>(step),
                                                static_cast<std::uint64_t>(k));
                alignment = align_to_map(img, grid, s, cfg.intr, ap);
            } catch (const AlignmentFailed&) {
                ++grid.registration_failures;
            }
        }
        update_map(grid, img, s, cfg.intr, alignment);
        const Homography gfi =
            alignment ? *alignment : invert_homography(ground_homography(cfg.intr, s));
        update_feature_map(fm, img, gfi, cfg.intr, cfg.align.vo.harris);
        ++k;
    }
}

}  // namespace

RunOutcome rhc_execute(const TerrainWorld& world, BeliefGrid& grid, FeatureMap& fm,
                       const BodyPose& start, const BodyPose& goal,
                       const RhcConfig& config) {
    RunOutcome out;
    WorldBounds bounds{world.min_x(), world.min_y(), world.max_x(), world.max_y()};
    PrmParams prm = config.prm;
    prm.seed = derive_seed(config.seed, 0x9a7bu);
    const BodyPath path = build_prm(bounds, start, goal, prm);

    const MastConfig fixed_mast = passive_mast(config);
    double t = path.start_time();

    Pipeline active;
    Pipeline passive;
    const ExtendedState start_state{path.query(t), fixed_mast, t};
    active.est_x = passive.est_x = start.x;
    active.est_y = passive.est_y = start.y;

    // Initial mapping at the start pose (no prior map).
    if (grid.observed_count() == 0)
        run_init_sequence(world, grid, fm, start_state, config, 0, false);

    // Step-0 captures anchor the VO chains; both pipelines share the initial
    // mast pose.
    active.prev_state = start_state;
    active.prev_img = capture_image(world, start_state, config.intr,
                                    {config.sigma_r, derive_seed(config.seed, 0, 0)});
    update_map(grid, active.prev_img, start_state, config.intr, MapAlignment{});
    update_feature_map(fm, active.prev_img,
                       invert_homography(ground_homography(config.intr, start_state)),
                       config.intr, config.align.vo.harris);
    if (config.paired_passive) {
        passive.prev_state = start_state;
        passive.prev_img = capture_image(world, start_state, config.intr,
                                         {config.sigma_r, derive_seed(config.seed, 0, 2)});
    }

    const double passive_step_t = config.passive_step_m / config.prm.speed;
    VosapParams vp;
    vp.n_nodes = config.n_nodes;
    vp.horizon_m = config.horizon_m;
    vp.completion_fraction = config.completion_fraction;
    vp.intr = config.intr;
    vp.edge = config.edge;

    int step = 0;
    while (t < path.end_time() - kEps) {
        ++step;
        if (step > config.max_steps)
            throw MaxStepsExceeded("receding-horizon loop exceeded max_steps");

        bool reinit_flag = false;
        double next_tau = 0.0;
        MastConfig next_mast = fixed_mast;

        if (config.mode == SensingMode::Active) {
            const ExtendedState root_state{path.query(t), active.prev_state.mast, t};

            // Degeneracy pre-check: forward probes across the horizon window.
            if (config.coverage_min_fraction > 0.0) {
                const double t_h = path.time_after_distance(t, config.horizon_m);
                std::vector<ExtendedState> probes;
                for (const double f : {1.0 / 3.0, 2.0 / 3.0, 1.0}) {
                    const double pt = t + f * (t_h - t);
                    probes.push_back({path.query(pt), fixed_mast, pt});
                }
                if (!coverage_ok(grid, probes, config.intr, config.coverage_min_fraction)) {
                    run_init_sequence(world, grid, fm, root_state, config, step, true);
                    ++out.reinit_count;
                    reinit_flag = true;
                }
            }

            ObservationSchedule schedule;
            bool planned = false;
            const auto t_start = std::chrono::steady_clock::now();
            for (int attempt = 0; attempt < 2 && !planned; ++attempt) {
                try {
                    schedule = vosap_plan(grid, fm, path, root_state, config.metric,
                                          config.constraints, vp,
                                          derive_seed(config.seed, 0x717a,
                                                      static_cast<std::uint64_t>(step)));
                    planned = true;
                } catch (const PlanIncomplete&) {
                    ++out.planner_incomplete_count;
                    if (attempt == 0 && !reinit_flag) {
                        run_init_sequence(world, grid, fm, root_state, config, step, true);
                        ++out.reinit_count;
                        reinit_flag = true;
                    } else {
                        break;
                    }
                }
            }
            const auto t_stop = std::chrono::steady_clock::now();
            out.planner_ms.push_back(
                {step, std::chrono::duration<double, std::milli>(t_stop - t_start).count()});

            // A first command whose own edge was failure-priced predicts a VO
            // failure on the live pair; hold the gaze instead.
            if (planned && schedule.entries.size() >= 2 && !schedule.entries[1].risky) {
                // Drive steps are bounded: image acquisition happens at most
                // passive_step_m along the path, with the mast tracking the
                // planned target until the command's own time is reached.
                const auto& first = schedule.entries[1];
                next_tau = std::min(first.tau, t + passive_step_t);
                const BodyPose body = path.query(next_tau);
                const GroundPoint target = mast_target(first.state);
                MastConfig m = mast_config_for_target(body, target,
                                                      config.constraints.mast_height);
                m.pan = std::clamp(m.pan, config.constraints.pan_min,
                                   config.constraints.pan_max);
                m.tilt = std::clamp(m.tilt, config.constraints.tilt_min,
                                    config.constraints.tilt_max);
                next_mast = m;
            } else {
                // Graceful fallback: hold the current gaze for one step so the
                // next capture stays matchable against the previous one.
                next_tau = std::min(path.end_time(), t + passive_step_t);
                next_mast = active.prev_state.mast;
            }
        } else {
            next_tau = std::min(path.end_time(), t + passive_step_t);
            next_mast = fixed_mast;
        }

        if (next_tau <= t + kEps) next_tau = std::min(path.end_time(), t + 1.0);

        const ExtendedState new_state{path.query(next_tau), next_mast, next_tau};

        // Execute the observation: capture, VO against the previous capture,
        // then fuse the measurement into the belief.
        const GrayImage img =
            capture_image(world, new_state, config.intr,
                          {config.sigma_r, derive_seed(config.seed,
                                                       static_cast<std::uint64_t>(step), 0)});
        VoParams vo_params = config.align.vo;
        vo_params.ransac.seed =
            derive_seed(config.seed, static_cast<std::uint64_t>(step), 1);
        const VoResult vo =
            visual_odometry(active.prev_img, img, config.intr, active.prev_state, vo_params);

        const double true_leg = true_displacement(active.prev_state, new_state);
        RunLogRow row;
        row.step = step;
        row.time = next_tau;
        row.true_x = new_state.body.x;
        row.true_y = new_state.body.y;
        row.metric = config.mode == SensingMode::Active ? metric_name(config.metric)
                                                        : "passive";
        row.vo_ok = vo.ok;
        row.heading = new_state.body.heading;
        row.pan = new_state.mast.pan;
        row.tilt = new_state.mast.tilt;
        {
            const GroundPoint tgt = mast_target(new_state);
            row.target_x = tgt.x;
            row.target_y = tgt.y;
        }
        if (vo.ok) {
            active.est_x += vo.delta.x();
            active.est_y += vo.delta.y();
            row.leg_error_m = std::abs(vo.displacement - true_leg);
        } else {
            active.est_x += new_state.body.x - active.prev_state.body.x;
            active.est_y += new_state.body.y - active.prev_state.body.y;
            row.leg_error_m = -1.0;
            active.log.failed = true;
        }
        row.est_x = active.est_x;
        row.est_y = active.est_y;

        bool align_failed = false;
        MapAlignment alignment;
        if (config.feature_alignment) {
            try {
                AlignParams ap = config.align;
                ap.vo.ransac.seed =
                    derive_seed(config.seed, static_cast<std::uint64_t>(step), 4);
                alignment = align_to_map(img, grid, new_state, config.intr, ap);
            } catch (const AlignmentFailed&) {
                ++grid.registration_failures;
                align_failed = true;
            }
        }
        update_map(grid, img, new_state, config.intr, alignment);
        const Homography gfi = alignment ? *alignment
                                         : invert_homography(
                                               ground_homography(config.intr, new_state));
        update_feature_map(fm, img, gfi, config.intr, config.align.vo.harris);
        if (align_failed) {
            run_init_sequence(world, grid, fm, new_state, config, step, true);
            ++out.reinit_count;
            reinit_flag = true;
        }
        row.reinit = reinit_flag;
        active.log.rows.push_back(row);
        active.prev_img = img;
        active.prev_state = new_state;

        if (config.paired_passive) {
            const ExtendedState pstate{new_state.body, fixed_mast, next_tau};
            const GrayImage pimg = capture_image(
                world, pstate, config.intr,
                {config.sigma_r, derive_seed(config.seed,
                                             static_cast<std::uint64_t>(step), 2)});
            VoParams pvo_params = config.align.vo;
            pvo_params.ransac.seed =
                derive_seed(config.seed, static_cast<std::uint64_t>(step), 3);
            const VoResult pvo = visual_odometry(passive.prev_img, pimg, config.intr,
                                                 passive.prev_state, pvo_params);
            RunLogRow prow;
            prow.step = step;
            prow.time = next_tau;
            prow.true_x = pstate.body.x;
            prow.true_y = pstate.body.y;
            prow.metric = "passive";
            prow.vo_ok = pvo.ok;
            prow.heading = pstate.body.heading;
            prow.pan = pstate.mast.pan;
            prow.tilt = pstate.mast.tilt;
            {
                const GroundPoint tgt = mast_target(pstate);
                prow.target_x = tgt.x;
                prow.target_y = tgt.y;
            }
            const double ptrue = true_displacement(passive.prev_state, pstate);
            if (pvo.ok) {
                passive.est_x += pvo.delta.x();
                passive.est_y += pvo.delta.y();
                prow.leg_error_m = std::abs(pvo.displacement - ptrue);
            } else {
                passive.est_x += pstate.body.x - passive.prev_state.body.x;
                passive.est_y += pstate.body.y - passive.prev_state.body.y;
                prow.leg_error_m = -1.0;
                passive.log.failed = true;
            }
            prow.est_x = passive.est_x;
            prow.est_y = passive.est_y;
            prow.reinit = reinit_flag;
            passive.log.rows.push_back(prow);
            passive.prev_img = pimg;
            passive.prev_state = pstate;
        }

        t = next_tau;
        const double dist_to_goal =
            std::hypot(new_state.body.x - goal.x, new_state.body.y - goal.y);
        if (dist_to_goal <= config.goal_tolerance) break;
    }

    out.primary = std::move(active.log);
    if (config.paired_passive) out.passive = std::move(passive.log);
    return out;
}

}  // namespace vosap
