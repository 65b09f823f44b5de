#include "vosap/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vosap {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string render_map_svg(const MapPlotData& data) {
    const double scale = 40.0;  // px per meter
    const double w_m = data.background.width * data.resolution;
    const double h_m = data.background.height * data.resolution;
    const double width = w_m * scale;
    const double height = h_m * scale;

    // World (x, y) -> SVG pixels with y flipped.
    const auto px = [&](double x) { return (x - data.origin.x) * scale; };
    const auto py = [&](double y) { return (data.origin.y + h_m - y) * scale; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
        << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " "
        << fmt(height) << "\">\n";
    svg << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
        << "\" fill=\"#181818\"/>\n";

    // Background raster, block-averaged to keep the file diff-friendly.
    const int block = std::max(1, static_cast<int>(std::lround(0.25 / data.resolution)));
    for (int by = 0; by < data.background.height; by += block) {
        for (int bx = 0; bx < data.background.width; bx += block) {
            double sum = 0.0;
            int n = 0;
            for (int y = by; y < std::min(by + block, data.background.height); ++y)
                for (int x = bx; x < std::min(bx + block, data.background.width); ++x)
                    if (data.background.is_valid(x, y)) {
                        sum += data.background.at(x, y);
                        ++n;
                    }
            if (n == 0) continue;
            const int g = static_cast<int>(std::lround(255.0 * sum / n));
            const double x0 = data.origin.x + bx * data.resolution;
            const double y1 = data.origin.y +
                              std::min(by + block, data.background.height) * data.resolution;
            const double bw = (std::min(bx + block, data.background.width) - bx) *
                              data.resolution * scale;
            const double bh = (std::min(by + block, data.background.height) - by) *
                              data.resolution * scale;
            char color[16];
            std::snprintf(color, sizeof(color), "#%02x%02x%02x", g, g, g);
            svg << "<rect x=\"" << fmt(px(x0)) << "\" y=\"" << fmt(py(y1)) << "\" width=\""
                << fmt(bw) << "\" height=\"" << fmt(bh) << "\" fill=\"" << color
                << "\"/>\n";
        }
    }

    // Pan segments, then camera positions, then mast-target crosses.
    for (const auto& o : data.observations) {
        svg << "<line class=\"pan\" x1=\"" << fmt(px(o.x)) << "\" y1=\"" << fmt(py(o.y))
            << "\" x2=\"" << fmt(px(o.target_x)) << "\" y2=\"" << fmt(py(o.target_y))
            << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }
    for (const auto& o : data.observations) {
        svg << "<circle class=\"camera\" cx=\"" << fmt(px(o.x)) << "\" cy=\""
            << fmt(py(o.y)) << "\" r=\"4\" fill=\"#3b6fd4\" stroke=\"white\" "
               "stroke-width=\"0.8\"/>\n";
    }
    const double c = 4.0;
    for (const auto& o : data.observations) {
        const double x = px(o.target_x), y = py(o.target_y);
        svg << "<path class=\"cross\" d=\"M " << fmt(x - c) << " " << fmt(y) << " L "
            << fmt(x + c) << " " << fmt(y) << " M " << fmt(x) << " " << fmt(y - c)
            << " L " << fmt(x) << " " << fmt(y + c)
            << "\" stroke=\"#e8c832\" stroke-width=\"1.8\" fill=\"none\"/>\n";
    }

    svg << "</svg>\n";
    return svg.str();
}

std::string emit_map_plot(const BeliefGrid& grid, const RunLog& runlog) {
    MapPlotData data;
    const auto& geom = grid.geometry();
    data.origin = geom.origin;
    data.resolution = geom.resolution;
    data.background = GrayImage(geom.cols, geom.rows);
    for (int cy = 0; cy < geom.rows; ++cy)
        for (int cx = 0; cx < geom.cols; ++cx) {
            const BeliefCell& cell = grid.cell(cx, cy);
            data.background.set(cx, cy, static_cast<float>(cell.mean), cell.observed);
        }
    for (const auto& r : runlog.rows) {
        MapPlotData::Obs o;
        o.x = r.true_x;
        o.y = r.true_y;
        o.target_x = r.target_x;
        o.target_y = r.target_y;
        data.observations.push_back(o);
    }
    return render_map_svg(data);
}

std::string render_bar_chart_svg(const std::vector<std::string>& series,
                                 const std::vector<BarChartGroup>& groups,
                                 const std::string& title) {
    const double width = 640.0, height = 400.0;
    const double margin_l = 70.0, margin_b = 50.0, margin_t = 40.0, margin_r = 20.0;
    double max_v = 0.0;
    for (const auto& g : groups)
        for (double v : g.values) max_v = std::max(max_v, v);
    if (max_v <= 0.0) max_v = 1.0;

    const char* palette[] = {"#3b6fd4", "#d47f3b", "#4caf50", "#b03bd4"};
    const double plot_w = width - margin_l - margin_r;
    const double plot_h = height - margin_t - margin_b;
    const double group_w = plot_w / std::max<std::size_t>(1, groups.size());

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
        << "\" height=\"" << fmt(height) << "\">\n";
    svg << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << fmt(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">"
        << title << "</text>\n";

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const double gx = margin_l + group_w * static_cast<double>(gi);
        const double bar_w = group_w / (static_cast<double>(g.values.size()) + 1.0);
        for (std::size_t si = 0; si < g.values.size(); ++si) {
            // Log scale keeps orders-of-magnitude gaps visible.
            const double frac = std::log10(1.0 + 9.0 * g.values[si] / max_v);
            const double bh = plot_h * std::max(0.0, frac);
            const double bx = gx + bar_w * (0.5 + static_cast<double>(si));
            svg << "<rect x=\"" << fmt(bx) << "\" y=\"" << fmt(margin_t + plot_h - bh)
                << "\" width=\"" << fmt(bar_w * 0.9) << "\" height=\"" << fmt(bh)
                << "\" fill=\"" << palette[si % 4] << "\"/>\n";
            svg << "<text x=\"" << fmt(bx + bar_w * 0.45) << "\" y=\""
                << fmt(margin_t + plot_h - bh - 4) << "\" text-anchor=\"middle\" "
                   "font-family=\"sans-serif\" font-size=\"10\">"
                << fmt(g.values[si]) << "</text>\n";
        }
        svg << "<text x=\"" << fmt(gx + group_w / 2) << "\" y=\""
            << fmt(height - margin_b + 20) << "\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\" font-size=\"12\">"
            << g.label << "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const double lx = margin_l + 120.0 * static_cast<double>(si);
        svg << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(height - 18) << "\" width=\"12\" "
            << "height=\"12\" fill=\"" << palette[si % 4] << "\"/>\n";
        svg << "<text x=\"" << fmt(lx + 16) << "\" y=\"" << fmt(height - 8)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[si]
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace vosap
