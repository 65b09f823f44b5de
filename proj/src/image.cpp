#include "vosap/image.hpp"

#include "vosap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace vosap {

std::size_t GrayImage::count_valid() const {
    std::size_t n = 0;
    for (auto v : valid) n += v;
    return n;
}

std::optional<float> GrayImage::sample_bilinear(double u, double v) const {
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    if (x0 < 0 || y0 < 0 || x0 + 1 >= width || y0 + 1 >= height) return std::nullopt;
    if (!is_valid(x0, y0) || !is_valid(x0 + 1, y0) || !is_valid(x0, y0 + 1) ||
        !is_valid(x0 + 1, y0 + 1))
        return std::nullopt;
    const double fx = u - x0;
    const double fy = v - y0;
    const double top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    const double bot = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

std::optional<double> mean_abs_diff(const GrayImage& a, const GrayImage& b) {
    if (a.width != b.width || a.height != b.height) return std::nullopt;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        if (a.valid[i] && b.valid[i]) {
            sum += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float v = img.is_valid(x, y) ? img.at(x, y) : 0.0f;
            const int q = static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
            row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(q);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw Error(path + ": not a binary PGM");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    in.get();  // single whitespace after the header
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw Error(path + ": unsupported PGM header");
    GrayImage img(w, h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw Error(path + ": truncated PGM data");
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.pixels[i] = static_cast<float>(buf[i]) / static_cast<float>(maxval);
    return img;
}

}  // namespace vosap
