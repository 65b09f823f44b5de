#include "vosap/world.hpp"

#include "vosap/errors.hpp"
#include "vosap/rng.hpp"

#include <algorithm>
#include <cmath>

namespace vosap {

namespace {

// Lattice value noise: hashed corner values blended with the quintic fade
// curve, giving a C2 field whose wavelength equals the lattice spacing.
double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double hash_unit(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    std::uint64_t s = seed ^ (static_cast<std::uint64_t>(ix) * 0x8da6b343ULL) ^
                      (static_cast<std::uint64_t>(iy) * 0xd8163841ULL);
    return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y, double wavelength) {
    const double gx = x / wavelength;
    const double gy = y / wavelength;
    const auto ix = static_cast<std::int64_t>(std::floor(gx));
    const auto iy = static_cast<std::int64_t>(std::floor(gy));
    const double fx = fade(gx - ix);
    const double fy = fade(gy - iy);
    const double v00 = hash_unit(seed, ix, iy);
    const double v10 = hash_unit(seed, ix + 1, iy);
    const double v01 = hash_unit(seed, ix, iy + 1);
    const double v11 = hash_unit(seed, ix + 1, iy + 1);
    const double top = v00 * (1.0 - fx) + v10 * fx;
    const double bot = v01 * (1.0 - fx) + v11 * fx;
    return top * (1.0 - fy) + bot * fy;
}

struct Pebble {
    double cx, cy;
    double intensity;
    std::vector<double> vx, vy;  // convex hull vertices, CCW
    double bound_r;
};

Pebble make_pebble(Rng& rng, double cx, double cy, double r_lo, double r_hi) {
    Pebble p;
    p.cx = cx;
    p.cy = cy;
    const double r = rng.uniform(r_lo, r_hi);
    const int n = 4 + static_cast<int>(rng.uniform_index(4));  // 4..7 vertices
    const bool bright = rng.uniform() < 0.5;
    const double mag = rng.uniform(0.35, 0.42);
    p.intensity = bright ? 0.5 + mag : 0.5 - mag;
    p.bound_r = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a = (i + rng.uniform(0.1, 0.9)) * (2.0 * kPi / n);
        const double rr = r * rng.uniform(0.65, 1.0);
        p.vx.push_back(cx + rr * std::cos(a));
        p.vy.push_back(cy + rr * std::sin(a));
        p.bound_r = std::max(p.bound_r, rr);
    }
    return p;
}

bool inside_convex(const Pebble& p, double x, double y) {
    const std::size_t n = p.vx.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double cross = (p.vx[j] - p.vx[i]) * (y - p.vy[i]) -
                             (p.vy[j] - p.vy[i]) * (x - p.vx[i]);
        if (cross < 0.0) return false;
    }
    return true;
}

}  // namespace

Scenario parse_scenario(std::string_view name) {
    if (name == "uniform-rock") return Scenario::UniformRock;
    if (name == "uniform-sand") return Scenario::UniformSand;
    if (name == "split") return Scenario::Split;
    if (name == "scattered") return Scenario::Scattered;
    if (name == "sparse") return Scenario::Sparse;
    throw UnknownScenario("unknown scenario: " + std::string(name));
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::UniformRock: return "uniform-rock";
        case Scenario::UniformSand: return "uniform-sand";
        case Scenario::Split: return "split";
        case Scenario::Scattered: return "scattered";
        case Scenario::Sparse: return "sparse";
    }
    return "?";
}

bool TerrainWorld::contains(double x, double y) const {
    return x >= min_x() && x <= max_x() && y >= min_y() && y <= max_y();
}

double TerrainWorld::sand_value(double x, double y) const {
    // Smooth low-contrast bed, peak-to-peak 0.05.
    const double n = value_noise(seed_ ^ 0x5a17dULL, x, y, 0.33);
    return 0.5 + 0.05 * (n - 0.5);
}

bool TerrainWorld::rock_region(double x, double y) const {
    switch (spec_.scenario) {
        case Scenario::UniformRock: return true;
        case Scenario::UniformSand: return false;
        case Scenario::Split: return y > 0.0;
        case Scenario::Scattered:
        case Scenario::Sparse:
            for (const auto& p : patches_) {
                const double dx = x - p.x, dy = y - p.y;
                if (dx * dx + dy * dy <= p.r * p.r) return true;
            }
            return false;
    }
    return false;
}

struct WorldBuilder {
    static void build(TerrainWorld& w) {
        const auto& spec = w.spec_;
        w.nx_ = static_cast<int>(std::floor(spec.extent_x / spec.texel)) + 1;
        w.ny_ = static_cast<int>(std::floor(spec.extent_y / spec.texel)) + 1;
        w.lattice_.assign(static_cast<std::size_t>(w.nx_) * w.ny_, 0.5f);

        place_patches(w);

        // Sand bed everywhere.
        for (int iy = 0; iy < w.ny_; ++iy) {
            const double y = w.min_y() + iy * spec.texel;
            for (int ix = 0; ix < w.nx_; ++ix) {
                const double x = w.min_x() + ix * spec.texel;
                w.lattice_[static_cast<std::size_t>(iy) * w.nx_ + ix] =
                    static_cast<float>(w.sand_value(x, y));
            }
        }

        // Pebbles in rock regions: three size classes so features survive
        // both near-field and far-field ground sample distances.
        struct SizeClass {
            double r_lo, r_hi, per_m2;
        };
        const SizeClass classes[] = {
            {0.010, 0.022, 6.0},
            {0.022, 0.050, 3.0},
            {0.050, 0.090, 1.2},
        };
        Rng rng(derive_seed(w.seed_, 0x9ebb1e5));
        const double area = spec.extent_x * spec.extent_y;
        // Sparse clusters read as dense rubble piles rather than thin
        // scatter, so their interior pebble density is boosted.
        const double density_boost =
            spec.scenario == Scenario::Sparse ? 3.0 : 1.0;
        for (const auto& cls : classes) {
            const auto count = static_cast<std::size_t>(
                area * cls.per_m2 * spec.rock_density * density_boost);
            for (std::size_t i = 0; i < count; ++i) {
                const double cx = rng.uniform(w.min_x(), w.max_x());
                const double cy = rng.uniform(w.min_y(), w.max_y());
                // Pebble parameters are always drawn so the stream position
                // does not depend on the region test.
                Pebble p = make_pebble(rng, cx, cy, cls.r_lo, cls.r_hi);
                if (!w.rock_region(cx, cy)) continue;
                rasterize(w, p);
            }
        }
    }

    static void place_patches(TerrainWorld& w) {
        Rng rng(derive_seed(w.seed_, 0xfa7c4e5));
        if (w.spec_.scenario == Scenario::Scattered) {
            for (int i = 0; i < 18; ++i) {
                TerrainWorld::Patch p;
                p.x = rng.uniform(w.min_x() + 1.0, w.max_x() - 1.0);
                p.y = rng.uniform(w.min_y() + 1.0, w.max_y() - 1.0);
                p.r = rng.uniform(0.4, 0.9);
                w.patches_.push_back(p);
            }
        } else if (w.spec_.scenario == Scenario::Sparse) {
            // Isolated patches along one flank of the central corridor:
            // close enough for a steered mast to hand over between them,
            // with jittered spacing that leaves some stretches blind to a
            // fixed forward view.
            const int n = 9;
            for (int i = 0; i < n; ++i) {
                TerrainWorld::Patch p;
                const double span = w.max_x() - w.min_x() - 4.0;
                p.x = w.min_x() + 2.0 + span * (i + rng.uniform(0.05, 0.95)) / n;
                p.y = rng.uniform(1.0, 1.8);
                p.r = rng.uniform(0.45, 0.65);
                w.patches_.push_back(p);
            }
        }
    }

    static void rasterize(TerrainWorld& w, const Pebble& p) {
        const double t = w.spec_.texel;
        const int ix0 = std::max(0, static_cast<int>((p.cx - p.bound_r - w.min_x()) / t));
        const int ix1 = std::min(w.nx_ - 1,
                                 static_cast<int>((p.cx + p.bound_r - w.min_x()) / t) + 1);
        const int iy0 = std::max(0, static_cast<int>((p.cy - p.bound_r - w.min_y()) / t));
        const int iy1 = std::min(w.ny_ - 1,
                                 static_cast<int>((p.cy + p.bound_r - w.min_y()) / t) + 1);
        for (int iy = iy0; iy <= iy1; ++iy) {
            const double y = w.min_y() + iy * t;
            for (int ix = ix0; ix <= ix1; ++ix) {
                const double x = w.min_x() + ix * t;
                if (inside_convex(p, x, y))
                    w.lattice_[static_cast<std::size_t>(iy) * w.nx_ + ix] =
                        static_cast<float>(p.intensity);
            }
        }
    }
};

TerrainWorld TerrainWorld::generate(std::uint64_t seed, const WorldSpec& spec) {
    TerrainWorld w;
    w.spec_ = spec;
    w.seed_ = seed;
    WorldBuilder::build(w);
    return w;
}

TerrainWorld generate_terrain(std::uint64_t seed, const WorldSpec& spec) {
    return TerrainWorld::generate(seed, spec);
}

double TerrainWorld::texture_at(double x, double y) const {
    const double gx = (x - min_x()) / spec_.texel;
    const double gy = (y - min_y()) / spec_.texel;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    ix = std::clamp(ix, 0, nx_ - 2);
    iy = std::clamp(iy, 0, ny_ - 2);
    const double fx = std::clamp(gx - ix, 0.0, 1.0);
    const double fy = std::clamp(gy - iy, 0.0, 1.0);
    const auto v = [&](int a, int b) {
        return static_cast<double>(lattice_[static_cast<std::size_t>(b) * nx_ + a]);
    };
    const double top = v(ix, iy) * (1.0 - fx) + v(ix + 1, iy) * fx;
    const double bot = v(ix, iy + 1) * (1.0 - fx) + v(ix + 1, iy + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

GrayImage TerrainWorld::to_image(int stride) const {
    const int w = nx_ / stride;
    const int h = ny_ / stride;
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.set(x, y, lattice_[static_cast<std::size_t>(y) * stride * nx_ + x * stride]);
    return img;
}

GrayImage capture_image(const TerrainWorld& world, const ExtendedState& state,
                        const CameraIntrinsics& intr, const SensorNoise& noise) {
    if (state.mast.tilt <= 0.0)
        throw DegenerateView("camera does not look at the ground");
    const CameraPose pose = camera_pose_of(state);
    GrayImage img(intr.width, intr.height, 0.0f, false);
    Rng rng(derive_seed(noise.seed, 0xca97u));
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const auto g = pixel_to_ground(intr, pose, x, y);
            if (!g || !world.contains(g->x, g->y)) continue;
            double v = world.texture_at(g->x, g->y);
            if (noise.sigma_r > 0.0) v += noise.sigma_r * rng.normal();
            img.set(x, y, static_cast<float>(std::clamp(v, 0.0, 1.0)));
        }
    }
    return img;
}

double true_displacement(const ExtendedState& a, const ExtendedState& b) {
    const double dx = a.body.x - b.body.x;
    const double dy = a.body.y - b.body.y;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace vosap
