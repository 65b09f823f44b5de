#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vosap/config.hpp"
#include "vosap/errors.hpp"
#include "vosap/experiments.hpp"
#include "vosap/svg_plot.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vosap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

// Small, fast experiment: short path, cheap metric, few nodes.
ExperimentConfig small_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.scenario = "split";
    cfg.world.scenario = Scenario::Split;
    cfg.seed = 2;
    cfg.metric = MetricKind::VisibleFeatureCount;
    cfg.n_nodes = 50;
    cfg.start_x = -1.0;
    cfg.goal_x = 1.0;
    cfg.out_dir = out_dir;
    cfg.planning_max_corners = 150;
    return cfg;
}

}  // namespace

TEST_CASE("config file parsing with sections, comments, overrides") {
    const std::string path = "harness_test_config.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "[experiment]\n";
        out << "scenario = scattered\n";
        out << "seed = 9\n";
        out << "metric = jf   # trailing comment\n";
        out << "[planner]\n";
        out << "n_nodes = 77\n";
        out << "t_search = 25.5\n";
        out << "feature_alignment = false\n";
    }
    ConfigStore store = ConfigStore::from_file(path);
    CHECK(store.get_string("experiment.scenario", "") == "scattered");
    CHECK(store.get_int("experiment.seed", 0) == 9);
    CHECK(store.get_double("planner.t_search", 0.0) == 25.5);
    CHECK(store.get_bool("planner.feature_alignment", true) == false);

    store.set("experiment.scenario", "sparse");  // CLI-style override
    const ExperimentConfig cfg = ExperimentConfig::from_store(store);
    CHECK(cfg.scenario == "sparse");
    CHECK(cfg.n_nodes == 77);
    CHECK(cfg.metric == MetricKind::SyntheticFeatureCount);
    CHECK(cfg.t_search == 25.5);
    CHECK_FALSE(cfg.feature_alignment);
}

TEST_CASE("config errors are diagnosed") {
    const std::string path = "harness_bad_config.txt";
    {
        std::ofstream out(path);
        out << "[planner]\n";
        out << "n_nodes = soon\n";
    }
    const ConfigStore store = ConfigStore::from_file(path);
    CHECK_THROWS_AS((void)store.get_int("planner.n_nodes", 1), ConfigError);
    CHECK_THROWS_AS((void)ConfigStore::from_file("does_not_exist.txt"), ConfigError);

    ConfigStore bad;
    bad.set("experiment.scenario", "volcano");
    CHECK_THROWS_AS((void)ExperimentConfig::from_store(bad), UnknownScenario);
}

TEST_CASE("derived defaults: intrinsics, constraints, grid") {
    const ExperimentConfig cfg;
    const CameraIntrinsics intr = cfg.intrinsics();
    CHECK(intr.width == 640);
    CHECK(intr.fx == doctest::Approx(320.0 / std::tan(deg2rad(41.0))));
    const PlanConstraints pc = cfg.constraints();
    CHECK(pc.d_near == doctest::Approx(1.4));
    CHECK(pc.d_far == doctest::Approx(1.4 / std::tan(deg2rad(30.0))));
    const GridGeometry gg = cfg.grid_geometry();
    CHECK(gg.cols == 1100);
    CHECK(gg.rows == 1050);
}

TEST_CASE("simulate writes every artifact and is byte-deterministic") {
    const ExperimentConfig cfg_a = small_config("harness_out_a");
    const ExperimentConfig cfg_b = small_config("harness_out_b");
    const SimulateResult ra = run_simulate(cfg_a);
    const SimulateResult rb = run_simulate(cfg_b);
    CHECK(!ra.outcome.primary.rows.empty());

    for (const char* name :
         {"runlog.csv", "observations.csv", "timings.csv", "belief_mean.pgm",
          "belief_var.pgm", "belief_header.txt", "trajectory.svg", "manifest.txt"}) {
        CAPTURE(name);
        CHECK(fs::exists(fs::path("harness_out_a") / name));
    }

    CHECK(slurp("harness_out_a/runlog.csv") == slurp("harness_out_b/runlog.csv"));
    CHECK(slurp("harness_out_a/observations.csv") ==
          slurp("harness_out_b/observations.csv"));
    CHECK(slurp("harness_out_a/trajectory.svg") == slurp("harness_out_b/trajectory.svg"));
    CHECK(slurp("harness_out_a/belief_mean.pgm") == slurp("harness_out_b/belief_mean.pgm"));
}

TEST_CASE("render subcommand reproduces the trajectory plot") {
    const ExperimentConfig cfg = small_config("harness_out_render");
    run_simulate(cfg);
    const std::string before = slurp("harness_out_render/trajectory.svg");
    fs::remove("harness_out_render/trajectory.svg");
    rerender_plot("harness_out_render");
    CHECK(slurp("harness_out_render/trajectory.svg") == before);
}

TEST_CASE("map plot carries one circle, pan line, and cross per step") {
    BeliefGrid grid(GridGeometry::cover(-2, -2, 2, 2, 0.05), NoiseParams{});
    RunLog log;
    for (int k = 0; k < 6; ++k) {
        RunLogRow r;
        r.step = k + 1;
        r.true_x = -1.0 + 0.3 * k;
        r.true_y = 0.1 * k;
        r.target_x = r.true_x + 1.5;
        r.target_y = r.true_y + 0.5;
        log.rows.push_back(r);
    }
    const std::string svg = emit_map_plot(grid, log);
    CHECK(count_occurrences(svg, "class=\"camera\"") == 6);
    CHECK(count_occurrences(svg, "class=\"pan\"") == 6);
    CHECK(count_occurrences(svg, "class=\"cross\"") == 6);

    const std::string empty_svg = emit_map_plot(grid, RunLog{});
    CHECK(count_occurrences(empty_svg, "class=\"camera\"") == 0);
    CHECK(count_occurrences(empty_svg, "<svg") == 1);
}

TEST_CASE("compare: paired rock runs both succeed with comparable errors") {
    ExperimentConfig cfg = small_config("harness_out_cmp");
    cfg.scenario = "uniform-rock";
    cfg.world.scenario = Scenario::UniformRock;
    cfg.metric = MetricKind::Displacement;
    cfg.n_nodes = 40;
    const ExperimentReport report = run_compare(cfg, {4});
    REQUIRE(report.rows.size() == 1);
    const CompareRow& row = report.rows[0];
    CHECK_FALSE(row.active_failed);
    CHECK_FALSE(row.passive_failed);
    CHECK(row.active_m >= 0.0);
    CHECK(row.passive_m >= 0.0);
    CHECK(fs::exists("harness_out_cmp/compare.csv"));

    const std::string csv = slurp("harness_out_cmp/compare.csv");
    CHECK(csv.find("seed,passive_m,active_m,improvement_pct") == 0);
}

TEST_CASE("bench: fewer than five repeats is rejected") {
    ExperimentConfig cfg = small_config("harness_out_bench");
    cfg.bench_repeats = 1;
    CHECK_THROWS_AS((void)run_bench_metrics(cfg), ConfigError);
}

TEST_CASE("observations round-trip through the CSV sidecar") {
    RunLog log;
    for (int k = 0; k < 3; ++k) {
        RunLogRow r;
        r.step = k;
        r.time = 3.5 * k;
        r.true_x = 0.25 * k;
        r.true_y = -0.5 + 0.1 * k;
        r.heading = 0.01 * k;
        r.pan = 0.2 - 0.1 * k;
        r.tilt = 0.6;
        r.target_x = r.true_x + 2.0;
        r.target_y = r.true_y - 0.3;
        log.rows.push_back(r);
    }
    write_observations_csv(log, "harness_obs.csv");
    const RunLog back = read_observations_csv("harness_obs.csv");
    REQUIRE(back.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.rows[i].step == log.rows[i].step);
        CHECK(back.rows[i].time == doctest::Approx(log.rows[i].time).epsilon(1e-6));
        CHECK(back.rows[i].target_x ==
              doctest::Approx(log.rows[i].target_x).epsilon(1e-6));
    }
}

TEST_CASE("runlog csv marks failures and reinits") {
    RunLog log;
    RunLogRow ok;
    ok.step = 1;
    ok.metric = "jd";
    ok.vo_ok = true;
    ok.leg_error_m = 0.01;
    RunLogRow bad;
    bad.step = 2;
    bad.metric = "jd";
    bad.vo_ok = false;
    bad.leg_error_m = -1.0;
    bad.reinit = true;
    log.rows = {ok, bad};
    log.failed = true;
    write_runlog_csv(log, "harness_runlog.csv");
    const std::string csv = slurp("harness_runlog.csv");
    CHECK(csv.find("step,time,true_x,true_y,est_x,est_y,leg_error_m,metric,vo_ok,"
                   "reinit_flag") == 0);
    CHECK(csv.find(",jd,1,0") != std::string::npos);
    CHECK(csv.find(",jd,0,1") != std::string::npos);
    CHECK(log.cumulative_error() == doctest::Approx(0.01));
}
