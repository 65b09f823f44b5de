#include "vosap/experiments.hpp"

#include "vosap/errors.hpp"
#include "vosap/rng.hpp"
#include "vosap/svg_plot.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vosap {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path);
    out << text;
}

}  // namespace

void write_runlog_csv(const RunLog& log, const std::string& path) {
    std::ostringstream csv;
    csv << "step,time,true_x,true_y,est_x,est_y,leg_error_m,metric,vo_ok,reinit_flag\n";
    for (const auto& r : log.rows) {
        csv << r.step << "," << num(r.time) << "," << num(r.true_x) << ","
            << num(r.true_y) << "," << num(r.est_x) << "," << num(r.est_y) << ","
            << num(r.leg_error_m) << "," << r.metric << "," << (r.vo_ok ? 1 : 0) << ","
            << (r.reinit ? 1 : 0) << "\n";
    }
    write_text(path, csv.str());
}

void write_observations_csv(const RunLog& log, const std::string& path) {
    std::ostringstream csv;
    csv << "step,time,body_x,body_y,heading,pan,tilt,target_x,target_y\n";
    for (const auto& r : log.rows) {
        csv << r.step << "," << num(r.time) << "," << num(r.true_x) << ","
            << num(r.true_y) << "," << num(r.heading) << "," << num(r.pan) << ","
            << num(r.tilt) << "," << num(r.target_x) << "," << num(r.target_y) << "\n";
    }
    write_text(path, csv.str());
}

void write_timings_csv(const std::vector<std::pair<int, double>>& timings,
                       const std::string& path) {
    std::ostringstream csv;
    csv << "step,planner_ms\n";
    for (const auto& [step, ms] : timings) csv << step << "," << num(ms) << "\n";
    write_text(path, csv.str());
}

RunLog read_observations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    RunLog log;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        RunLogRow r;
        std::stringstream ss(line);
        std::string field;
        const auto next = [&]() {
            if (!std::getline(ss, field, ',')) throw Error(path + ": short row");
            return field;
        };
        r.step = std::stoi(next());
        r.time = std::stod(next());
        r.true_x = std::stod(next());
        r.true_y = std::stod(next());
        r.heading = std::stod(next());
        r.pan = std::stod(next());
        r.tilt = std::stod(next());
        r.target_x = std::stod(next());
        r.target_y = std::stod(next());
        log.rows.push_back(r);
    }
    return log;
}

SimulateResult run_simulate(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);

    const TerrainWorld world = generate_terrain(cfg.seed, cfg.world);
    BeliefGrid grid(cfg.grid_geometry(), cfg.map_noise);
    FeatureMap fm(cfg.grid_resolution);

    const BodyPose start{cfg.start_x, cfg.start_y, 0.0};
    const BodyPose goal{cfg.goal_x, cfg.goal_y, 0.0};

    SimulateResult res;
    res.out_dir = cfg.out_dir;
    res.outcome = rhc_execute(world, grid, fm, start, goal, cfg.rhc_config());

    write_runlog_csv(res.outcome.primary, join(cfg.out_dir, "runlog.csv"));
    write_observations_csv(res.outcome.primary, join(cfg.out_dir, "observations.csv"));
    write_timings_csv(res.outcome.planner_ms, join(cfg.out_dir, "timings.csv"));
    grid.export_layers(join(cfg.out_dir, "belief_mean.pgm"),
                       join(cfg.out_dir, "belief_var.pgm"),
                       join(cfg.out_dir, "belief_header.txt"));
    // The plot is generated from the exported artifacts so that `render`
    // reproduces it byte for byte.
    rerender_plot(cfg.out_dir);
    cfg.write_manifest(join(cfg.out_dir, "manifest.txt"));
    return res;
}

void rerender_plot(const std::string& dir) {
    const GrayImage mean = read_pgm(join(dir, "belief_mean.pgm"));
    const ConfigStore hdr = ConfigStore::from_file(join(dir, "belief_header.txt"));
    const RunLog log = read_observations_csv(join(dir, "observations.csv"));

    MapPlotData data;
    data.background = mean;
    data.origin = {hdr.get_double("origin_x", 0.0), hdr.get_double("origin_y", 0.0)};
    data.resolution = hdr.get_double("resolution", 0.02);
    for (const auto& r : log.rows) {
        MapPlotData::Obs o;
        o.x = r.true_x;
        o.y = r.true_y;
        o.target_x = r.target_x;
        o.target_y = r.target_y;
        data.observations.push_back(o);
    }
    write_text(join(dir, "trajectory.svg"), render_map_svg(data));
}

ExperimentReport run_compare(const ExperimentConfig& cfg,
                             const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ConfigError("compare requires at least one seed");
    fs::create_directories(cfg.out_dir);

    ExperimentReport report;
    for (const std::uint64_t seed : seeds) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.seed = seed;
        run_cfg.mode = SensingMode::Active;

        const TerrainWorld world = generate_terrain(seed, run_cfg.world);
        BeliefGrid grid(run_cfg.grid_geometry(), run_cfg.map_noise);
        FeatureMap fm(run_cfg.grid_resolution);
        RhcConfig rhc = run_cfg.rhc_config();
        rhc.paired_passive = true;

        const BodyPose start{run_cfg.start_x, run_cfg.start_y, 0.0};
        const BodyPose goal{run_cfg.goal_x, run_cfg.goal_y, 0.0};
        const RunOutcome outcome = rhc_execute(world, grid, fm, start, goal, rhc);

        CompareRow row;
        row.seed = seed;
        row.active_failed = outcome.primary.failed;
        row.active_m = outcome.primary.cumulative_error();
        row.passive_failed = !outcome.passive || outcome.passive->failed;
        row.passive_m = outcome.passive ? outcome.passive->cumulative_error() : 0.0;
        if (!row.passive_failed && !row.active_failed && row.passive_m > 0.0)
            row.improvement_pct =
                (row.passive_m - row.active_m) / row.passive_m * 100.0;
        report.rows.push_back(row);
    }

    write_compare_csv(report, join(cfg.out_dir, "compare.csv"));
    return report;
}

void write_compare_csv(const ExperimentReport& report, const std::string& path) {
    std::ostringstream csv;
    csv << "seed,passive_m,active_m,improvement_pct\n";
    for (const auto& r : report.rows) {
        csv << r.seed << ",";
        if (r.passive_failed)
            csv << "Failed,";
        else
            csv << num(r.passive_m) << ",";
        if (r.active_failed)
            csv << "Failed,";
        else
            csv << num(r.active_m) << ",";
        if (r.passive_failed || r.active_failed)
            csv << "--";
        else
            csv << num(r.improvement_pct);
        csv << "\n";
    }
    write_text(path, csv.str());
}

BenchReport run_bench_metrics(const ExperimentConfig& cfg) {
    if (cfg.bench_repeats < 5)
        throw ConfigError("bench-metrics requires at least 5 repeats");
    fs::create_directories(cfg.out_dir);

    // Fixed snapshot: an init-mapped split world at the start pose.
    ExperimentConfig fix = cfg;
    fix.scenario = "split";
    fix.world.scenario = Scenario::Split;
    const TerrainWorld world = generate_terrain(fix.seed, fix.world);
    const CameraIntrinsics intr = fix.intrinsics();

    const BodyPose start{fix.start_x, fix.start_y, 0.0};
    const BodyPose goal{fix.goal_x, fix.goal_y, 0.0};
    PrmParams prm;
    prm.samples = fix.prm_samples;
    prm.k_nearest = fix.prm_k;
    prm.connect_radius = fix.prm_radius;
    prm.speed = fix.speed;
    prm.seed = derive_seed(fix.seed, 0x9a7bu);
    const WorldBounds bounds{world.min_x(), world.min_y(), world.max_x(), world.max_y()};
    const BodyPath path = build_prm(bounds, start, goal, prm);

    MastConfig mast;
    mast.pan = 0.0;
    mast.tilt = deg2rad(fix.init_tilt_deg);
    mast.mast_height = fix.mast_height;
    const ExtendedState root{path.query(0.0), mast, 0.0};

    std::vector<GrayImage> images;
    std::vector<ExtendedState> states;
    int k = 0;
    for (const double pan_deg : {-45.0, 0.0, 45.0}) {
        ExtendedState s = root;
        s.mast.pan = deg2rad(pan_deg);
        states.push_back(s);
        images.push_back(capture_image(
            world, s, intr,
            {fix.sigma_r, derive_seed(fix.seed, 0xbe9c, static_cast<std::uint64_t>(k++))}));
    }
    BeliefGrid grid = init_map(images, states, intr, fix.map_noise, fix.grid_geometry());
    FeatureMap fm(fix.grid_resolution);
    for (std::size_t i = 0; i < images.size(); ++i)
        update_feature_map(fm, images[i],
                           invert_homography(ground_homography(intr, states[i])), intr,
                           fix.harris);

    const PlanConstraints constraints = fix.constraints();
    BenchReport report;
    const MetricKind metrics[] = {MetricKind::VisibleFeatureCount,
                                  MetricKind::SyntheticFeatureCount,
                                  MetricKind::Displacement};
    for (const int nodes : fix.bench_nodes) {
        for (const MetricKind metric : metrics) {
            VosapParams vp;
            vp.n_nodes = nodes;
            vp.horizon_m = fix.horizon_m;
            vp.completion_fraction = fix.completion_fraction;
            vp.intr = intr;
            vp.edge = fix.edge_params();
            double total = 0.0;
            for (int rep = 0; rep < fix.bench_repeats; ++rep) {
                const auto t0 = std::chrono::steady_clock::now();
                vosap_grow_tree(grid, fm, path, root, metric, constraints, vp,
                                derive_seed(fix.seed, static_cast<std::uint64_t>(nodes),
                                            static_cast<std::uint64_t>(rep)));
                const auto t1 = std::chrono::steady_clock::now();
                total += std::chrono::duration<double>(t1 - t0).count();
            }
            BenchCell cell;
            cell.metric = metric;
            cell.nodes = nodes;
            cell.repeats = fix.bench_repeats;
            cell.mean_s = total / fix.bench_repeats;
            report.cells.push_back(cell);
        }
    }

    // Expected ordering per tree size: J_V < J_F < J_D.
    for (const int nodes : fix.bench_nodes) {
        double jv = 0.0, jf = 0.0, jd = 0.0;
        for (const auto& c : report.cells) {
            if (c.nodes != nodes) continue;
            if (c.metric == MetricKind::VisibleFeatureCount) jv = c.mean_s;
            if (c.metric == MetricKind::SyntheticFeatureCount) jf = c.mean_s;
            if (c.metric == MetricKind::Displacement) jd = c.mean_s;
        }
        if (!(jv < jf && jf < jd)) {
            report.ordering_ok = false;
            report.violations.push_back("ordering violated at " + std::to_string(nodes) +
                                        " nodes: jv=" + num(jv) + " jf=" + num(jf) +
                                        " jd=" + num(jd));
        }
    }

    write_bench_csv(report, join(cfg.out_dir, "bench.csv"));
    std::vector<BarChartGroup> groups;
    for (const int nodes : fix.bench_nodes) {
        BarChartGroup g;
        g.label = std::to_string(nodes) + " nodes";
        for (const MetricKind metric : metrics)
            for (const auto& c : report.cells)
                if (c.nodes == nodes && c.metric == metric) g.values.push_back(c.mean_s);
        groups.push_back(g);
    }
    write_text(join(cfg.out_dir, "bench.svg"),
               render_bar_chart_svg({"jv", "jf", "jd"}, groups,
                                    "planner runtime by metric (s)"));
    return report;
}

void write_bench_csv(const BenchReport& report, const std::string& path) {
    std::ostringstream csv;
    csv << "metric,nodes,repeats,mean_s\n";
    for (const auto& c : report.cells)
        csv << metric_name(c.metric) << "," << c.nodes << "," << c.repeats << ","
            << num(c.mean_s) << "\n";
    if (!report.ordering_ok)
        for (const auto& v : report.violations) csv << "# " << v << "\n";
    write_text(path, csv.str());
}

}  // namespace vosap
