#pragma once

#include "vosap/config.hpp"
#include "vosap/planner.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vosap {

void write_runlog_csv(const RunLog& log, const std::string& path);
void write_observations_csv(const RunLog& log, const std::string& path);
void write_timings_csv(const std::vector<std::pair<int, double>>& timings,
                       const std::string& path);

/// Reads the observation sidecar back into a RunLog (pose fields only).
RunLog read_observations_csv(const std::string& path);

struct SimulateResult {
    RunOutcome outcome;
    std::string out_dir;
};

/// Runs one experiment in the configured mode and writes every artifact
/// (runlog.csv, observations.csv, timings.csv, belief PGM layers, trajectory
/// SVG, manifest).
SimulateResult run_simulate(const ExperimentConfig& cfg);

/// Re-emits trajectory.svg from the artifacts in a simulate output directory.
void rerender_plot(const std::string& dir);

struct CompareRow {
    std::uint64_t seed = 0;
    bool passive_failed = false;
    bool active_failed = false;
    double passive_m = 0.0;
    double active_m = 0.0;
    double improvement_pct = 0.0;  // meaningful when both runs succeed
};

struct ExperimentReport {
    std::vector<CompareRow> rows;
};

/// Paired active-vs-passive runs sharing world, body path and initial mast
/// pose per seed. Failures are reported in-table, never thrown.
ExperimentReport run_compare(const ExperimentConfig& cfg,
                             const std::vector<std::uint64_t>& seeds);

void write_compare_csv(const ExperimentReport& report, const std::string& path);

struct BenchCell {
    MetricKind metric = MetricKind::Displacement;
    int nodes = 0;
    int repeats = 0;
    double mean_s = 0.0;
};

struct BenchReport {
    std::vector<BenchCell> cells;
    bool ordering_ok = true;
    std::vector<std::string> violations;
};

/// Times vosap planning for each metric and tree size on a fixed init-mapped
/// split-world snapshot. Requires >= 5 repeats.
BenchReport run_bench_metrics(const ExperimentConfig& cfg);

void write_bench_csv(const BenchReport& report, const std::string& path);

}  // namespace vosap
