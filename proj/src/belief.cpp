#include "vosap/belief.hpp"

#include "vosap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vosap {

BeliefCell kalman_cell_update(const BeliefCell& cell, double z, const NoiseParams& p) {
    BeliefCell out;
    out.observed = true;
    if (p.r == 0.0) {
        out.mean = z;
        out.var = 0.0;
        return out;
    }
    const double prior_var = (cell.observed ? cell.var : p.var_init) + p.q;
    out.var = 1.0 / (1.0 / prior_var + 1.0 / p.r);
    if (!cell.observed) {
        out.mean = z;
    } else {
        out.mean = out.var * (cell.mean / prior_var + z / p.r);
    }
    return out;
}

GridGeometry GridGeometry::cover(double min_x, double min_y, double max_x, double max_y,
                                 double resolution) {
    GridGeometry g;
    g.origin = {min_x, min_y};
    g.resolution = resolution;
    g.cols = static_cast<int>(std::ceil((max_x - min_x) / resolution));
    g.rows = static_cast<int>(std::ceil((max_y - min_y) / resolution));
    return g;
}

BeliefGrid::BeliefGrid(const GridGeometry& geom, const NoiseParams& params)
    : geom_(geom), params_(params) {
    BeliefCell init;
    init.var = params.var_init;
    cells_.assign(static_cast<std::size_t>(geom.cols) * geom.rows, init);
}

std::optional<std::pair<int, int>> BeliefGrid::locate(const GroundPoint& g) const {
    const int cx = static_cast<int>(std::floor((g.x - geom_.origin.x) / geom_.resolution));
    const int cy = static_cast<int>(std::floor((g.y - geom_.origin.y) / geom_.resolution));
    if (!cell_in_bounds(cx, cy)) return std::nullopt;
    return std::make_pair(cx, cy);
}

std::optional<double> BeliefGrid::interpolate_mean(const GroundPoint& g) const {
    // Sample on the lattice of the cell centers.
    const double gx = (g.x - geom_.origin.x) / geom_.resolution - 0.5;
    const double gy = (g.y - geom_.origin.y) / geom_.resolution - 0.5;
    const int cx = static_cast<int>(std::floor(gx));
    const int cy = static_cast<int>(std::floor(gy));
    if (cx < 0 || cy < 0 || cx + 1 >= geom_.cols || cy + 1 >= geom_.rows)
        return std::nullopt;
    const BeliefCell& c00 = cell(cx, cy);
    const BeliefCell& c10 = cell(cx + 1, cy);
    const BeliefCell& c01 = cell(cx, cy + 1);
    const BeliefCell& c11 = cell(cx + 1, cy + 1);
    if (!c00.observed || !c10.observed || !c01.observed || !c11.observed)
        return std::nullopt;
    const double fx = gx - cx;
    const double fy = gy - cy;
    const double top = c00.mean * (1.0 - fx) + c10.mean * fx;
    const double bot = c01.mean * (1.0 - fx) + c11.mean * fx;
    return top * (1.0 - fy) + bot * fy;
}

std::size_t BeliefGrid::observed_count() const {
    std::size_t n = 0;
    for (const auto& c : cells_) n += c.observed ? 1 : 0;
    return n;
}

void BeliefGrid::set_chain(const Homography& ground_from_image) {
    if (!chain_anchor_) chain_anchor_ = ground_from_image;
    chain_current_ = ground_from_image;
}

void BeliefGrid::export_layers(const std::string& mean_path, const std::string& var_path,
                               const std::string& header_path) const {
    GrayImage mean_img(geom_.cols, geom_.rows);
    GrayImage var_img(geom_.cols, geom_.rows);
    for (int cy = 0; cy < geom_.rows; ++cy) {
        for (int cx = 0; cx < geom_.cols; ++cx) {
            const BeliefCell& c = cell(cx, cy);
            mean_img.set(cx, cy, c.observed ? static_cast<float>(c.mean) : 0.0f,
                         c.observed);
            const double scaled = params_.var_init > 0.0 ? c.var / params_.var_init : 0.0;
            var_img.set(cx, cy, static_cast<float>(std::clamp(scaled, 0.0, 1.0)));
        }
    }
    write_pgm(mean_img, mean_path);
    write_pgm(var_img, var_path);
    std::ofstream hdr(header_path);
    if (!hdr) throw Error("cannot open " + header_path);
    hdr << "origin_x = " << geom_.origin.x << "\n";
    hdr << "origin_y = " << geom_.origin.y << "\n";
    hdr << "resolution = " << geom_.resolution << "\n";
    hdr << "cols = " << geom_.cols << "\n";
    hdr << "rows = " << geom_.rows << "\n";
}

namespace {

// Ground -> pixel homography with the scale sign fixed so that projective
// depth is positive for points in front of the camera. The mast target is
// always in front, which pins the sign.
Homography canonical_pixel_from_ground(const Homography& ground_from_image,
                                       const ExtendedState& state) {
    Homography h = invert_homography(ground_from_image);
    const GroundPoint target = mast_target(state);
    const Eigen::Vector3d p = h.h * Eigen::Vector3d(target.x, target.y, 1.0);
    if (p.z() < 0.0) h.h = -h.h;
    return h;
}

struct Footprint {
    int cx0, cy0, cx1, cy1;
    bool empty;
};

// Conservative cell bounding box of the view footprint: back-projects the
// image border; if the horizon crosses the image the footprint is unbounded
// and the whole grid is scanned.
Footprint footprint_bbox(const BeliefGrid& grid, const Homography& ground_from_image,
                         int width, int height) {
    const auto& geom = grid.geometry();
    double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
    bool horizon = false;
    bool any = false;

    const auto probe = [&](double u, double v) {
        const Eigen::Vector3d g = ground_from_image.h * Eigen::Vector3d(u, v, 1.0);
        // Homogeneous scale per pixel: a sign change along the border means
        // the horizon is inside the image.
        if (std::abs(g.z()) < 1e-9) {
            horizon = true;
            return;
        }
        const double x = g.x() / g.z(), y = g.y() / g.z();
        if (!any) {
            any = true;
            min_x = max_x = x;
            min_y = max_y = y;
        } else {
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
        }
    };

    double prev_sign = 0.0;
    const auto probe_sign = [&](double u, double v) {
        const Eigen::Vector3d g = ground_from_image.h * Eigen::Vector3d(u, v, 1.0);
        const double s = g.z() > 0.0 ? 1.0 : (g.z() < 0.0 ? -1.0 : 0.0);
        if (prev_sign != 0.0 && s != 0.0 && s != prev_sign) horizon = true;
        if (s != 0.0) prev_sign = s;
        probe(u, v);
    };

    const int step = 4;
    for (int x = 0; x < width; x += step) probe_sign(x, 0);
    for (int y = 0; y < height; y += step) probe_sign(width - 1.0, y);
    for (int x = width - 1; x >= 0; x -= step) probe_sign(x, height - 1.0);
    for (int y = height - 1; y >= 0; y -= step) probe_sign(0, y);

    Footprint fp{};
    if (horizon || !any) {
        fp.cx0 = 0;
        fp.cy0 = 0;
        fp.cx1 = geom.cols - 1;
        fp.cy1 = geom.rows - 1;
        fp.empty = geom.cols == 0 || geom.rows == 0;
        return fp;
    }
    fp.cx0 = std::max(0, static_cast<int>(std::floor((min_x - geom.origin.x) / geom.resolution)) - 1);
    fp.cy0 = std::max(0, static_cast<int>(std::floor((min_y - geom.origin.y) / geom.resolution)) - 1);
    fp.cx1 = std::min(geom.cols - 1,
                      static_cast<int>(std::floor((max_x - geom.origin.x) / geom.resolution)) + 1);
    fp.cy1 = std::min(geom.rows - 1,
                      static_cast<int>(std::floor((max_y - geom.origin.y) / geom.resolution)) + 1);
    fp.empty = fp.cx0 > fp.cx1 || fp.cy0 > fp.cy1;
    return fp;
}

std::size_t register_image(BeliefGrid& grid, const GrayImage& image,
                           const ExtendedState& state,
                           const Homography& ground_from_image) {
    const Homography pix_from_ground = canonical_pixel_from_ground(ground_from_image, state);
    const Footprint fp =
        footprint_bbox(grid, ground_from_image, image.width, image.height);
    if (fp.empty) return 0;

    const NoiseParams& np = grid.noise_params();
    std::size_t updated = 0;
    for (int cy = fp.cy0; cy <= fp.cy1; ++cy) {
        for (int cx = fp.cx0; cx <= fp.cx1; ++cx) {
            const GroundPoint c = grid.cell_center(cx, cy);
            const Eigen::Vector3d p =
                pix_from_ground.h * Eigen::Vector3d(c.x, c.y, 1.0);
            if (p.z() <= 1e-12) continue;  // behind the camera or at the horizon
            const double u = p.x() / p.z();
            const double v = p.y() / p.z();
            const auto z = image.sample_bilinear(u, v);
            if (!z) continue;
            BeliefCell& cell = grid.cell(cx, cy);
            cell = kalman_cell_update(cell, static_cast<double>(*z), np);
            ++updated;
        }
    }
    grid.set_chain(ground_from_image);
    return updated;
}

}  // namespace

BeliefGrid init_map(std::span<const GrayImage> images,
                    std::span<const ExtendedState> states, const CameraIntrinsics& intr,
                    const NoiseParams& params, const GridGeometry& geom) {
    if (images.empty()) throw EmptyInit("init_map requires at least one image");
    if (images.size() != states.size())
        throw Error("init_map: images and states differ in length");

    BeliefGrid grid(geom, params);
    for (std::size_t i = 0; i < images.size(); ++i) {
        try {
            const Homography h = invert_homography(ground_homography(intr, states[i]));
            register_image(grid, images[i], states[i], h);
        } catch (const DegenerateView&) {
            ++grid.registration_failures;
        } catch (const NoIntersection&) {
            ++grid.registration_failures;
        }
    }
    return grid;
}

std::size_t update_map(BeliefGrid& grid, const GrayImage& image,
                       const ExtendedState& state, const CameraIntrinsics& intr,
                       const MapAlignment& alignment) {
    Homography ground_from_image;
    if (alignment) {
        ground_from_image = *alignment;
    } else {
        ground_from_image = invert_homography(ground_homography(intr, state));
    }
    return register_image(grid, image, state, ground_from_image);
}

std::int64_t FeatureMap::bucket_key(double x, double y) const {
    const double s = merge_radius_ > 0.0 ? merge_radius_ : 1e-3;
    const auto ix = static_cast<std::int64_t>(std::floor(x / s));
    const auto iy = static_cast<std::int64_t>(std::floor(y / s));
    return ix * 0x100000000LL + iy;
}

void FeatureMap::insert(const GroundPoint& p, double strength) {
    const double s = merge_radius_ > 0.0 ? merge_radius_ : 1e-3;
    const auto bx = static_cast<std::int64_t>(std::floor(p.x / s));
    const auto by = static_cast<std::int64_t>(std::floor(p.y / s));
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const auto it = buckets_.find((bx + dx) * 0x100000000LL + (by + dy));
            if (it == buckets_.end()) continue;
            for (int idx : it->second) {
                Landmark& lm = landmarks_[static_cast<std::size_t>(idx)];
                if (distance(lm.p, p) < merge_radius_) {
                    lm.strength = std::max(lm.strength, strength);
                    return;
                }
            }
        }
    }
    landmarks_.push_back({p, strength});
    buckets_[bucket_key(p.x, p.y)].push_back(static_cast<int>(landmarks_.size()) - 1);
}

void update_feature_map(FeatureMap& fm, const GrayImage& image,
                        const Homography& ground_from_image,
                        const CameraIntrinsics& intr, const HarrisParams& params) {
    (void)intr;
    const auto corners = detect_features(image, params);
    for (const auto& c : corners) {
        const Eigen::Vector3d g = ground_from_image.h * Eigen::Vector3d(c.u, c.v, 1.0);
        if (std::abs(g.z()) < 1e-12) continue;
        fm.insert({g.x() / g.z(), g.y() / g.z()}, c.strength);
    }
}

bool coverage_ok(const BeliefGrid& grid, std::span<const ExtendedState> states,
                 const CameraIntrinsics& intr, double min_fraction) {
    const int step = 4;
    for (const auto& state : states) {
        const CameraPose pose = camera_pose_of(state);
        std::size_t total = 0, covered = 0;
        for (int y = 0; y < intr.height; y += step) {
            for (int x = 0; x < intr.width; x += step) {
                ++total;
                const auto g = pixel_to_ground(intr, pose, x, y);
                if (!g) continue;
                const auto loc = grid.locate(*g);
                if (!loc) continue;
                if (grid.cell(loc->first, loc->second).observed) ++covered;
            }
        }
        if (total == 0) return false;
        const double fraction = static_cast<double>(covered) / static_cast<double>(total);
        if (fraction < min_fraction) return false;
    }
    return true;
}

}  // namespace vosap
