#pragma once

#include "vosap/geometry.hpp"
#include "vosap/image.hpp"
#include "vosap/vision.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vosap {

/// Scalar Kalman settings for per-cell intensity fusion.
struct NoiseParams {
    double r = 4e-4;       // observation variance (0.02^2)
    // Process noise keeps the filter adaptive: early long-range views store
    // low-resolution texture, and without forgetting their small posterior
    // variance would freeze out later close-range detail.
    double q = 1e-4;
    double var_init = 1.0; // prior variance of unobserved cells
};

/// Intensity belief of one grid cell. Unobserved cells carry var = var_init;
/// their mean is meaningless until the first measurement, which initializes
/// it directly (the prior is uninformative about the mean).
struct BeliefCell {
    double mean = 0.0;
    double var = 1.0;
    bool observed = false;
};

/// Scalar Kalman update: p- = var + q, var' = (1/p- + 1/r)^-1,
/// mean' = var' (mean/p- + z/r). r = 0 is an exact measurement. The first
/// measurement of an unobserved cell sets mean' = z with the same variance
/// update from var_init.
BeliefCell kalman_cell_update(const BeliefCell& cell, double z, const NoiseParams& p);

struct GridGeometry {
    GroundPoint origin;        // minimum corner
    double resolution = 0.02;  // meters per cell
    int cols = 0;
    int rows = 0;

    static GridGeometry cover(double min_x, double min_y, double max_x, double max_y,
                              double resolution);
};

/// Either a feature-based ground-from-image homography or (when empty) the
/// state-derived registration.
using MapAlignment = std::optional<Homography>;

/// 2D grid of intensity beliefs over the ground plane plus the homography
/// chain bookkeeping of the running registration.
class BeliefGrid {
public:
    BeliefGrid() = default;
    BeliefGrid(const GridGeometry& geom, const NoiseParams& params);

    const GridGeometry& geometry() const { return geom_; }
    const NoiseParams& noise_params() const { return params_; }

    bool cell_in_bounds(int cx, int cy) const {
        return cx >= 0 && cx < geom_.cols && cy >= 0 && cy < geom_.rows;
    }
    std::size_t cell_idx(int cx, int cy) const {
        return static_cast<std::size_t>(cy) * geom_.cols + cx;
    }
    const BeliefCell& cell(int cx, int cy) const { return cells_[cell_idx(cx, cy)]; }
    BeliefCell& cell(int cx, int cy) { return cells_[cell_idx(cx, cy)]; }
    const std::vector<BeliefCell>& cells() const { return cells_; }

    GroundPoint cell_center(int cx, int cy) const {
        return {geom_.origin.x + (cx + 0.5) * geom_.resolution,
                geom_.origin.y + (cy + 0.5) * geom_.resolution};
    }

    /// Cell containing a ground point, or nullopt outside the grid.
    std::optional<std::pair<int, int>> locate(const GroundPoint& g) const;

    /// Bilinear interpolation of cell means at a ground point. Returns
    /// nullopt when the 2x2 support contains any unobserved cell or leaves
    /// the grid.
    std::optional<double> interpolate_mean(const GroundPoint& g) const;

    std::size_t observed_count() const;

    // Homography chain of the registration (map anchor and last image).
    const MapAlignment& chain_anchor() const { return chain_anchor_; }
    const MapAlignment& chain_current() const { return chain_current_; }
    void set_chain(const Homography& ground_from_image);

    int registration_failures = 0;

    /// Export: mean layer as 8-bit PGM, variance layer scaled by var_init,
    /// and a plain-text header with origin/resolution.
    void export_layers(const std::string& mean_path, const std::string& var_path,
                       const std::string& header_path) const;

private:
    GridGeometry geom_;
    NoiseParams params_;
    std::vector<BeliefCell> cells_;
    MapAlignment chain_anchor_;
    MapAlignment chain_current_;
};

/// Builds a fresh map from images with exactly known states (initialization
/// trusts the state). Throws EmptyInit when no image is given; degenerate
/// views are skipped and counted in registration_failures.
BeliefGrid init_map(std::span<const GrayImage> images,
                    std::span<const ExtendedState> states, const CameraIntrinsics& intr,
                    const NoiseParams& params, const GridGeometry& geom);

/// Fuses one image into the grid. Only cells inside the valid view footprint
/// are touched. Alignment is feature-based when supplied, otherwise derived
/// from the state. Returns the number of cells updated.
std::size_t update_map(BeliefGrid& grid, const GrayImage& image,
                       const ExtendedState& state, const CameraIntrinsics& intr,
                       const MapAlignment& alignment);

/// Sparse landmark map used by the J_V metric.
struct Landmark {
    GroundPoint p;
    double strength = 0.0;
};

class FeatureMap {
public:
    explicit FeatureMap(double merge_radius = 0.02) : merge_radius_(merge_radius) {}

    const std::vector<Landmark>& landmarks() const { return landmarks_; }
    std::size_t size() const { return landmarks_.size(); }
    double merge_radius() const { return merge_radius_; }

    /// Inserts or merges: an existing landmark within the merge radius keeps
    /// its position and takes the maximum strength.
    void insert(const GroundPoint& p, double strength);

private:
    std::int64_t bucket_key(double x, double y) const;

    double merge_radius_;
    std::vector<Landmark> landmarks_;
    std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

/// Detects corners in the image and back-projects them into the landmark map
/// through the ground-from-image alignment.
void update_feature_map(FeatureMap& fm, const GrayImage& image,
                        const Homography& ground_from_image,
                        const CameraIntrinsics& intr, const HarrisParams& params);

/// True iff every state's view footprint is backed by at least min_fraction
/// observed cells (fractions are pixel-weighted: rays are sampled on a
/// subgrid of the image, matching what a synthetic render would need).
bool coverage_ok(const BeliefGrid& grid, std::span<const ExtendedState> states,
                 const CameraIntrinsics& intr, double min_fraction);

}  // namespace vosap
