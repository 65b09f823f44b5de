#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vosap {

/// W x H intensity raster in [0,1] with a per-pixel validity mask.
/// Invalid pixels mark rays that miss the mapped ground (above the horizon,
/// outside the world, or over unobserved belief).
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;         // row-major
    std::vector<std::uint8_t> valid;   // 0/1, same layout

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f, bool all_valid = true)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill),
          valid(static_cast<std::size_t>(w) * h, all_valid ? 1 : 0) {}

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }
    float at(int x, int y) const { return pixels[idx(x, y)]; }
    float& at(int x, int y) { return pixels[idx(x, y)]; }
    bool is_valid(int x, int y) const { return valid[idx(x, y)] != 0; }
    void set(int x, int y, float v, bool ok = true) {
        pixels[idx(x, y)] = v;
        valid[idx(x, y)] = ok ? 1 : 0;
    }

    std::size_t count_valid() const;

    /// Bilinear sample at fractional pixel coordinates. Returns nullopt when
    /// the support touches the border or any invalid pixel.
    std::optional<float> sample_bilinear(double u, double v) const;
};

/// Mean absolute difference over pixels valid in both images.
/// Returns nullopt when no pixel is valid in both.
std::optional<double> mean_abs_diff(const GrayImage& a, const GrayImage& b);

/// Binary PGM (P5), 8-bit. Invalid pixels are written as 0.
void write_pgm(const GrayImage& img, const std::string& path);
GrayImage read_pgm(const std::string& path);

}  // namespace vosap
