#include "vosap/config.hpp"

#include "vosap/errors.hpp"
#include "vosap/rng.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vosap {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigStore ConfigStore::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ConfigStore store;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        store.set(section.empty() ? key : section + "." + key, value);
    }
    return store;
}

std::string ConfigStore::get_string(const std::string& key,
                                    const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double ConfigStore::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: " + it->second);
    }
}

int ConfigStore::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not an integer: " + it->second);
    }
}

bool ConfigStore::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + it->second);
}

ExperimentConfig ExperimentConfig::from_store(const ConfigStore& s) {
    ExperimentConfig c;
    c.scenario = s.get_string("experiment.scenario", c.scenario);
    c.seed = static_cast<std::uint64_t>(s.get_int("experiment.seed",
                                                  static_cast<int>(c.seed)));
    c.metric = parse_metric(s.get_string("experiment.metric", metric_name(c.metric)));
    c.mode = parse_mode(s.get_string("experiment.mode", mode_name(c.mode)));
    c.out_dir = s.get_string("experiment.out_dir", c.out_dir);
    c.start_x = s.get_double("experiment.start_x", c.start_x);
    c.start_y = s.get_double("experiment.start_y", c.start_y);
    c.goal_x = s.get_double("experiment.goal_x", c.goal_x);
    c.goal_y = s.get_double("experiment.goal_y", c.goal_y);
    c.max_steps = s.get_int("experiment.max_steps", c.max_steps);
    c.goal_tolerance = s.get_double("experiment.goal_tolerance", c.goal_tolerance);

    c.world.scenario = parse_scenario(c.scenario);
    c.world.extent_x = s.get_double("world.extent_x", c.world.extent_x);
    c.world.extent_y = s.get_double("world.extent_y", c.world.extent_y);
    c.world.texel = s.get_double("world.texel", c.world.texel);
    c.world.rock_density = s.get_double("world.rock_density", c.world.rock_density);
    c.sigma_r = s.get_double("world.sigma_r", c.sigma_r);

    c.cam_width = s.get_int("camera.width", c.cam_width);
    c.cam_height = s.get_int("camera.height", c.cam_height);
    c.fov_h = s.get_double("camera.fov_h", c.fov_h);
    c.fov_v = s.get_double("camera.fov_v", c.fov_v);

    c.mast_height = s.get_double("mast.height", c.mast_height);
    c.tilt_min_deg = s.get_double("mast.tilt_min", c.tilt_min_deg);
    c.tilt_max_deg = s.get_double("mast.tilt_max", c.tilt_max_deg);
    c.pan_min_deg = s.get_double("mast.pan_min", c.pan_min_deg);
    c.pan_max_deg = s.get_double("mast.pan_max", c.pan_max_deg);
    c.init_tilt_deg = s.get_double("mast.init_tilt", c.init_tilt_deg);

    c.grid_resolution = s.get_double("belief.resolution", c.grid_resolution);
    c.map_noise.r = s.get_double("belief.r", c.map_noise.r);
    c.map_noise.q = s.get_double("belief.q", c.map_noise.q);
    c.map_noise.var_init = s.get_double("belief.var_init", c.map_noise.var_init);

    c.harris.k = s.get_double("vision.harris_k", c.harris.k);
    c.harris.response_rel_threshold =
        s.get_double("vision.harris_threshold", c.harris.response_rel_threshold);
    c.harris.nms_radius = s.get_int("vision.nms_radius", c.harris.nms_radius);
    c.harris.max_corners = s.get_int("vision.max_corners", c.harris.max_corners);
    c.patch.ratio = s.get_double("vision.patch_ratio", c.patch.ratio);
    c.ransac.iters = s.get_int("vision.ransac_iters", c.ransac.iters);
    c.ransac.inlier_px = s.get_double("vision.inlier_px", c.ransac.inlier_px);
    c.ransac.min_inliers = s.get_int("vision.min_inliers", c.ransac.min_inliers);
    c.planning_max_corners = s.get_int("vision.planning_max_corners",
                                       c.planning_max_corners);
    c.planning_min_inliers = s.get_int("vision.planning_min_inliers",
                                       c.planning_min_inliers);
    c.planning_ransac_iters = s.get_int("vision.planning_ransac_iters",
                                        c.planning_ransac_iters);

    c.edge_defaults.gamma = s.get_double("prediction.gamma", c.edge_defaults.gamma);
    c.edge_defaults.failure_penalty =
        s.get_double("prediction.failure_penalty", c.edge_defaults.failure_penalty);
    c.edge_defaults.feature_scale =
        s.get_double("prediction.feature_scale", c.edge_defaults.feature_scale);
    c.edge_defaults.min_valid = s.get_double("prediction.min_valid",
                                             c.edge_defaults.min_valid);

    c.horizon_m = s.get_double("planner.horizon_m", c.horizon_m);
    c.n_nodes = s.get_int("planner.n_nodes", c.n_nodes);
    c.d_overlap = s.get_double("planner.d_overlap", c.d_overlap);
    c.t_search = s.get_double("planner.t_search", c.t_search);
    c.speed = s.get_double("planner.speed", c.speed);
    c.completion_fraction =
        s.get_double("planner.completion_fraction", c.completion_fraction);
    c.coverage_min_fraction =
        s.get_double("planner.coverage_min_fraction", c.coverage_min_fraction);
    c.passive_step_m = s.get_double("planner.passive_step_m", c.passive_step_m);
    c.prm_samples = s.get_int("planner.prm_samples", c.prm_samples);
    c.prm_k = s.get_int("planner.prm_k", c.prm_k);
    c.prm_radius = s.get_double("planner.prm_radius", c.prm_radius);
    c.feature_alignment = s.get_bool("planner.feature_alignment", c.feature_alignment);
    c.align_min_valid = s.get_double("planner.align_min_valid", c.align_min_valid);

    c.bench_repeats = s.get_int("bench.repeats", c.bench_repeats);
    return c;
}

CameraIntrinsics ExperimentConfig::intrinsics() const {
    return CameraIntrinsics::from_fov(cam_width, cam_height, fov_h, fov_v);
}

PlanConstraints ExperimentConfig::constraints() const {
    PlanConstraints pc = PlanConstraints::from_tilt_limits(
        mast_height, deg2rad(tilt_min_deg), deg2rad(tilt_max_deg), d_overlap, t_search);
    pc.pan_min = deg2rad(pan_min_deg);
    pc.pan_max = deg2rad(pan_max_deg);
    return pc;
}

VoParams ExperimentConfig::vo_params() const {
    VoParams v;
    v.harris = harris;
    v.patch = patch;
    v.ransac = ransac;
    return v;
}

EdgeCostParams ExperimentConfig::edge_params() const {
    EdgeCostParams e = edge_defaults;
    e.vo = vo_params();
    e.vo.harris.max_corners = planning_max_corners;
    e.vo.ransac.min_inliers = planning_min_inliers;
    e.vo.ransac.iters = planning_ransac_iters;
    e.vo.ransac.hopeless_after = EdgeCostParams::planning_vo_defaults().ransac.hopeless_after;
    return e;
}

GridGeometry ExperimentConfig::grid_geometry() const {
    return GridGeometry::cover(-world.extent_x / 2.0, -world.extent_y / 2.0,
                               world.extent_x / 2.0, world.extent_y / 2.0,
                               grid_resolution);
}

RhcConfig ExperimentConfig::rhc_config() const {
    RhcConfig r;
    r.mode = mode;
    r.metric = metric;
    r.horizon_m = horizon_m;
    r.n_nodes = n_nodes;
    r.completion_fraction = completion_fraction;
    r.goal_tolerance = goal_tolerance;
    r.max_steps = max_steps;
    r.passive_step_m = passive_step_m;
    r.sigma_r = sigma_r;
    r.coverage_min_fraction = coverage_min_fraction;
    r.feature_alignment = feature_alignment;
    r.seed = seed;
    r.init_tilt = deg2rad(init_tilt_deg);
    r.intr = intrinsics();
    r.constraints = constraints();
    r.edge = edge_params();
    r.align.vo = vo_params();
    r.align.min_valid = align_min_valid;
    r.prm.samples = prm_samples;
    r.prm.k_nearest = prm_k;
    r.prm.connect_radius = prm_radius;
    r.prm.speed = speed;
    return r;
}

void ExperimentConfig::write_manifest(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << "[experiment]\n";
    out << "scenario = " << scenario << "\n";
    out << "seed = " << seed << "\n";
    out << "metric = " << metric_name(metric) << "\n";
    out << "mode = " << mode_name(mode) << "\n";
    out << "out_dir = " << out_dir << "\n";
    out << "start_x = " << start_x << "\nstart_y = " << start_y << "\n";
    out << "goal_x = " << goal_x << "\ngoal_y = " << goal_y << "\n";
    out << "max_steps = " << max_steps << "\n";
    out << "goal_tolerance = " << goal_tolerance << "\n";
    out << "[world]\n";
    out << "extent_x = " << world.extent_x << "\nextent_y = " << world.extent_y << "\n";
    out << "texel = " << world.texel << "\n";
    out << "rock_density = " << world.rock_density << "\n";
    out << "sigma_r = " << sigma_r << "\n";
    out << "[camera]\n";
    out << "width = " << cam_width << "\nheight = " << cam_height << "\n";
    out << "fov_h = " << fov_h << "\nfov_v = " << fov_v << "\n";
    out << "[mast]\n";
    out << "height = " << mast_height << "\n";
    out << "tilt_min = " << tilt_min_deg << "\ntilt_max = " << tilt_max_deg << "\n";
    out << "pan_min = " << pan_min_deg << "\npan_max = " << pan_max_deg << "\n";
    out << "init_tilt = " << init_tilt_deg << "\n";
    out << "[belief]\n";
    out << "resolution = " << grid_resolution << "\n";
    out << "r = " << map_noise.r << "\nq = " << map_noise.q << "\n";
    out << "var_init = " << map_noise.var_init << "\n";
    out << "[vision]\n";
    out << "harris_k = " << harris.k << "\n";
    out << "harris_threshold = " << harris.response_rel_threshold << "\n";
    out << "nms_radius = " << harris.nms_radius << "\n";
    out << "max_corners = " << harris.max_corners << "\n";
    out << "patch_ratio = " << patch.ratio << "\n";
    out << "ransac_iters = " << ransac.iters << "\n";
    out << "inlier_px = " << ransac.inlier_px << "\n";
    out << "min_inliers = " << ransac.min_inliers << "\n";
    out << "planning_max_corners = " << planning_max_corners << "\n";
    out << "planning_min_inliers = " << planning_min_inliers << "\n";
    out << "planning_ransac_iters = " << planning_ransac_iters << "\n";
    out << "[prediction]\n";
    out << "gamma = " << edge_defaults.gamma << "\n";
    out << "failure_penalty = " << edge_defaults.failure_penalty << "\n";
    out << "feature_scale = " << edge_defaults.feature_scale << "\n";
    out << "min_valid = " << edge_defaults.min_valid << "\n";
    out << "[planner]\n";
    out << "horizon_m = " << horizon_m << "\n";
    out << "n_nodes = " << n_nodes << "\n";
    out << "d_overlap = " << d_overlap << "\n";
    out << "t_search = " << t_search << "\n";
    out << "speed = " << speed << "\n";
    out << "completion_fraction = " << completion_fraction << "\n";
    out << "coverage_min_fraction = " << coverage_min_fraction << "\n";
    out << "passive_step_m = " << passive_step_m << "\n";
    out << "prm_samples = " << prm_samples << "\n";
    out << "prm_k = " << prm_k << "\n";
    out << "prm_radius = " << prm_radius << "\n";
    out << "feature_alignment = " << (feature_alignment ? "true" : "false") << "\n";
    out << "align_min_valid = " << align_min_valid << "\n";
    out << "[bench]\n";
    out << "repeats = " << bench_repeats << "\n";
    out << "[derived_seeds]\n";
    out << "world = " << seed << "\n";
    out << "prm = " << derive_seed(seed, 0x9a7bu) << "\n";
    out << "plan_step_1 = " << derive_seed(seed, 0x717a, 1) << "\n";
    out << "capture_step_1 = " << derive_seed(seed, 1, 0) << "\n";
    out << "vo_step_1 = " << derive_seed(seed, 1, 1) << "\n";
}

}  // namespace vosap
