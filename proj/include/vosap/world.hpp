#pragma once

#include "vosap/geometry.hpp"
#include "vosap/image.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vosap {

enum class Scenario { UniformRock, UniformSand, Split, Scattered, Sparse };

/// Parses a scenario name (`uniform-rock`, `uniform-sand`, `split`,
/// `scattered`, `sparse`). Throws UnknownScenario otherwise.
Scenario parse_scenario(std::string_view name);
std::string scenario_name(Scenario s);

struct WorldSpec {
    Scenario scenario = Scenario::Split;
    double extent_x = 22.0;  // meters, centered on the origin
    double extent_y = 21.0;
    double texel = 0.01;     // meters per texture sample
    double rock_density = 1.0;  // scales pebble counts in rock regions
};

/// Per-pixel observation noise. Each capture derives its own generator from
/// `seed`, so captures are reproducible and independent across streams.
struct SensorNoise {
    double sigma_r = 0.0;
    std::uint64_t seed = 0;
};

/// Procedural ground-truth world: a deterministic intensity field over the
/// plane. Sand regions carry low-amplitude smooth noise; rock regions add
/// dense hard-edged pebbles in several size classes.
class TerrainWorld {
public:
    static TerrainWorld generate(std::uint64_t seed, const WorldSpec& spec);

    double min_x() const { return -spec_.extent_x / 2.0; }
    double max_x() const { return spec_.extent_x / 2.0; }
    double min_y() const { return -spec_.extent_y / 2.0; }
    double max_y() const { return spec_.extent_y / 2.0; }
    const WorldSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    bool contains(double x, double y) const;

    /// Bilinear texture lookup; caller must ensure contains(x, y).
    double texture_at(double x, double y) const;

    /// Region labeling used by the scenario layouts.
    bool rock_region(double x, double y) const;

    /// Full-lattice export for inspection (downsampled by `stride`).
    GrayImage to_image(int stride = 2) const;

private:
    WorldSpec spec_;
    std::uint64_t seed_ = 0;
    int nx_ = 0, ny_ = 0;
    std::vector<float> lattice_;

    struct Patch {
        double x, y, r;
    };
    std::vector<Patch> patches_;  // rock patches for scattered/sparse layouts

    double sand_value(double x, double y) const;
    friend struct WorldBuilder;
};

TerrainWorld generate_terrain(std::uint64_t seed, const WorldSpec& spec);

/// Renders the world through a pinhole camera at `state`. Each pixel samples
/// the texture at its back-projected ground point plus N(0, sigma_r^2) noise,
/// clamped to [0,1]. Pixels above the horizon or outside the world extent are
/// invalid.
GrayImage capture_image(const TerrainWorld& world, const ExtendedState& state,
                        const CameraIntrinsics& intr, const SensorNoise& noise);

/// Euclidean distance between the body positions of two states.
double true_displacement(const ExtendedState& a, const ExtendedState& b);

}  // namespace vosap
