#include "vosap/config.hpp"
#include "vosap/errors.hpp"
#include "vosap/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
    std::string config_path;
    std::string scenario;
    std::string mode;
    std::string metric;
    std::string out;
    int seed = -1;
    int nodes = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "config file (key = value sections)");
    cmd->add_option("--scenario", f.scenario,
                    "uniform-rock | uniform-sand | split | scattered | sparse");
    cmd->add_option("--seed", f.seed, "experiment seed");
    cmd->add_option("--mode", f.mode, "active | passive");
    cmd->add_option("--metric", f.metric, "jd | jf | jv");
    cmd->add_option("--nodes", f.nodes, "planner tree size");
    cmd->add_option("--out", f.out, "output directory (default $VOSAP_OUT or ./out)");
}

vosap::ExperimentConfig build_config(const CommonFlags& f) {
    vosap::ConfigStore store;
    if (!f.config_path.empty()) store = vosap::ConfigStore::from_file(f.config_path);
    if (!f.scenario.empty()) store.set("experiment.scenario", f.scenario);
    if (f.seed >= 0) store.set("experiment.seed", std::to_string(f.seed));
    if (!f.mode.empty()) store.set("experiment.mode", f.mode);
    if (!f.metric.empty()) store.set("experiment.metric", f.metric);
    if (f.nodes > 0) store.set("planner.n_nodes", std::to_string(f.nodes));
    if (!f.out.empty()) {
        store.set("experiment.out_dir", f.out);
    } else if (!store.has("experiment.out_dir")) {
        const char* env = std::getenv("VOSAP_OUT");
        store.set("experiment.out_dir", env ? env : "out");
    }
    return vosap::ExperimentConfig::from_store(store);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vosap: perception-aware mast observation planning on a simulated "
                 "planar world"};
    app.require_subcommand(1);

    CommonFlags sim_flags;
    auto* sim = app.add_subcommand("simulate", "run one experiment and write artifacts");
    add_common(sim, sim_flags);

    CommonFlags cmp_flags;
    std::vector<int> cmp_seeds;
    auto* cmp = app.add_subcommand("compare", "paired active-vs-passive runs per seed");
    add_common(cmp, cmp_flags);
    cmp->add_option("--seeds", cmp_seeds, "seeds for the paired runs")->delimiter(',');

    CommonFlags bench_flags;
    int bench_repeats = -1;
    auto* bench = app.add_subcommand("bench-metrics",
                                     "time the planner per metric and tree size");
    add_common(bench, bench_flags);
    bench->add_option("--repeats", bench_repeats, "repeats per cell (min 5)");

    std::string render_dir;
    auto* render = app.add_subcommand("render",
                                      "re-emit trajectory.svg from a simulate output dir");
    render->add_option("--out", render_dir, "simulate output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const auto cfg = build_config(sim_flags);
            const auto res = vosap::run_simulate(cfg);
            std::printf("simulate: %zu steps, cumulative VO error %.4f m%s -> %s\n",
                        res.outcome.primary.rows.size(),
                        res.outcome.primary.cumulative_error(),
                        res.outcome.primary.failed ? " (VO failed on some legs)" : "",
                        res.out_dir.c_str());
            return 0;
        }
        if (cmp->parsed()) {
            const auto cfg = build_config(cmp_flags);
            std::vector<std::uint64_t> seeds;
            for (int s : cmp_seeds) seeds.push_back(static_cast<std::uint64_t>(s));
            if (seeds.empty()) seeds.push_back(cfg.seed);
            const auto report = vosap::run_compare(cfg, seeds);
            for (const auto& r : report.rows) {
                std::printf("seed %llu: passive %s, active %s",
                            static_cast<unsigned long long>(r.seed),
                            r.passive_failed ? "Failed" : (std::to_string(r.passive_m) + " m").c_str(),
                            r.active_failed ? "Failed" : (std::to_string(r.active_m) + " m").c_str());
                if (!r.passive_failed && !r.active_failed)
                    std::printf(", improvement %.1f%%", r.improvement_pct);
                std::printf("\n");
            }
            return 0;
        }
        if (bench->parsed()) {
            auto cfg = build_config(bench_flags);
            if (bench_repeats > 0) cfg.bench_repeats = bench_repeats;
            const auto report = vosap::run_bench_metrics(cfg);
            for (const auto& c : report.cells)
                std::printf("%s %d nodes: %.4f s\n", vosap::metric_name(c.metric).c_str(),
                            c.nodes, c.mean_s);
            if (!report.ordering_ok)
                for (const auto& v : report.violations)
                    std::fprintf(stderr, "warning: %s\n", v.c_str());
            return 0;
        }
        if (render->parsed()) {
            vosap::rerender_plot(render_dir);
            std::printf("render: wrote %s/trajectory.svg\n", render_dir.c_str());
            return 0;
        }
    } catch (const vosap::UnknownScenario& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const vosap::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const vosap::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
