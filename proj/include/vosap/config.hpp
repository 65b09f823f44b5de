#pragma once

#include "vosap/planner.hpp"
#include "vosap/prediction.hpp"
#include "vosap/world.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vosap {

/// Flat key/value store parsed from a sectioned `key = value` config file.
/// Keys are stored as "section.key".
class ConfigStore {
public:
    static ConfigStore from_file(const std::string& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Complete experiment configuration with every module default pinned.
struct ExperimentConfig {
    // experiment
    std::string scenario = "split";
    std::uint64_t seed = 1;
    MetricKind metric = MetricKind::Displacement;
    SensingMode mode = SensingMode::Active;
    std::string out_dir = "out";
    double start_x = -4.0, start_y = 0.0;
    double goal_x = 4.0, goal_y = 0.0;
    int max_steps = 400;
    double goal_tolerance = 0.25;

    // world
    WorldSpec world;
    double sigma_r = 0.02;

    // camera
    int cam_width = 640, cam_height = 480;
    double fov_h = 82.0, fov_v = 66.0;

    // mast
    double mast_height = 1.4;
    double tilt_min_deg = 30.0, tilt_max_deg = 45.0;
    double pan_min_deg = -90.0, pan_max_deg = 90.0;
    double init_tilt_deg = 30.0;

    // belief
    double grid_resolution = 0.02;
    NoiseParams map_noise;

    // vision
    HarrisParams harris;
    PatchParams patch;
    RansacParams ransac;
    int planning_max_corners = 200;
    // Synthetic pairs are noiseless, so plans demand a consensus margin over
    // the live VO gate; edges that barely match in prediction are priced as
    // failures rather than risked.
    int planning_min_inliers = 26;
    int planning_ransac_iters = 500;

    // prediction
    EdgeCostParams edge_defaults;  // vo filled by builders below

    // planner
    double horizon_m = 3.0;
    int n_nodes = 250;
    double d_overlap = 1.5;
    double t_search = 40.0;
    double speed = 0.042;
    double completion_fraction = 0.95;
    double coverage_min_fraction = 0.45;
    double passive_step_m = 0.5;
    int prm_samples = 200;
    int prm_k = 10;
    double prm_radius = 3.0;
    bool feature_alignment = true;
    double align_min_valid = 0.5;

    // bench
    int bench_repeats = 5;
    std::vector<int> bench_nodes = {50, 100, 250};

    static ExperimentConfig from_store(const ConfigStore& store);

    CameraIntrinsics intrinsics() const;
    PlanConstraints constraints() const;
    VoParams vo_params() const;        // full-resolution detector (mapping / real VO)
    EdgeCostParams edge_params() const;  // planning detector cap applied
    GridGeometry grid_geometry() const;
    RhcConfig rhc_config() const;

    /// Echoes every effective value plus the derived sub-seeds.
    void write_manifest(const std::string& path) const;
};

}  // namespace vosap
