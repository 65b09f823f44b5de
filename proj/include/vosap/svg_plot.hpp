#pragma once

#include "vosap/belief.hpp"
#include "vosap/image.hpp"
#include "vosap/planner.hpp"

#include <string>
#include <vector>

namespace vosap {

/// View model of the top-view map plot: belief-mean background plus one
/// camera-position circle, pan segment, and mast-target cross per step.
struct MapPlotData {
    GrayImage background;  // belief mean, row 0 at origin.y
    GroundPoint origin;
    double resolution = 0.02;
    struct Obs {
        double x = 0.0, y = 0.0;
        double target_x = 0.0, target_y = 0.0;
    };
    std::vector<Obs> observations;
};

/// Deterministic SVG text (fixed number formatting, no timestamps).
std::string render_map_svg(const MapPlotData& data);

std::string emit_map_plot(const BeliefGrid& grid, const RunLog& runlog);

/// Grouped bar chart used by the metric runtime benchmark.
struct BarChartGroup {
    std::string label;                 // e.g. "50"
    std::vector<double> values;        // one per series
};
std::string render_bar_chart_svg(const std::vector<std::string>& series,
                                 const std::vector<BarChartGroup>& groups,
                                 const std::string& title);

}  // namespace vosap
