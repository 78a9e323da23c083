#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "colight/vec3.hpp"

namespace colight {

/// Linear-radiance RGB raster with an optional binary mask plane.
/// Pixels are stored row major, top row first; PFM I/O flips rows to the
/// format's bottom-up order. Values are doubles in memory and 32-bit floats
/// on disk.
class HdrImage {
public:
    HdrImage() = default;
    HdrImage(int width, int height) : width_(width), height_(height), rgb_(size_t(width) * height * 3, 0.0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    size_t pixel_count() const { return size_t(width_) * height_; }

    Rgb at(int x, int y) const {
        const double* p = &rgb_[(size_t(y) * width_ + x) * 3];
        return {p[0], p[1], p[2]};
    }
    Rgb at_index(size_t i) const {
        const double* p = &rgb_[i * 3];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, const Rgb& c) {
        double* p = &rgb_[(size_t(y) * width_ + x) * 3];
        p[0] = c.r; p[1] = c.g; p[2] = c.b;
    }
    void set_index(size_t i, const Rgb& c) {
        double* p = &rgb_[i * 3];
        p[0] = c.r; p[1] = c.g; p[2] = c.b;
    }

    bool has_mask() const { return !mask_.empty(); }
    void ensure_mask(uint8_t fill = 1) {
        if (mask_.empty()) mask_.assign(pixel_count(), fill);
    }
    uint8_t mask_at(size_t i) const { return mask_.empty() ? 1 : mask_[i]; }
    void set_mask(size_t i, uint8_t v) { mask_[i] = v; }
    const std::vector<uint8_t>& mask() const { return mask_; }
    std::vector<uint8_t>& mask() { return mask_; }

    const std::vector<double>& data() const { return rgb_; }
    std::vector<double>& data() { return rgb_; }

private:
    int width_ = 0, height_ = 0;
    std::vector<double> rgb_;
    std::vector<uint8_t> mask_;
};

/// Single-channel raster (depth, accumulated alpha, scalar textures).
class ScalarImage {
public:
    ScalarImage() = default;
    ScalarImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height), v_(size_t(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return v_.size(); }
    double at(int x, int y) const { return v_[size_t(y) * width_ + x]; }
    double& at(int x, int y) { return v_[size_t(y) * width_ + x]; }
    double operator[](size_t i) const { return v_[i]; }
    double& operator[](size_t i) { return v_[i]; }
    const std::vector<double>& data() const { return v_; }
    std::vector<double>& data() { return v_; }

private:
    int width_ = 0, height_ = 0;
    std::vector<double> v_;
};

// ---- PFM (portable float map; little-endian, bottom-up rows) ----

void write_pfm(const std::string& path, const HdrImage& img);
void write_pfm(const std::string& path, const ScalarImage& img);
HdrImage read_pfm(const std::string& path);
ScalarImage read_pfm_gray(const std::string& path);

// ---- PNG (via libpng) ----

struct PngImage {
    int width = 0, height = 0, channels = 0, bit_depth = 8;
    std::vector<uint16_t> pixels;  // row major, channel interleaved, 8-bit stored as 0..255
};

void write_png(const std::string& path, const PngImage& img);
PngImage read_png(const std::string& path);

/// Binary mask helpers: nonzero -> 255 on write, >127 -> 1 on read.
void write_mask_png(const std::string& path, const std::vector<uint8_t>& mask, int width, int height);
std::vector<uint8_t> read_mask_png(const std::string& path, int& width, int& height);

// ---- Transfer functions and previews ----

/// Linear [0,1] -> sRGB-encoded [0,1].
double srgb_encode(double linear);

/// Reinhard x/(1+x) then gamma 1/2.2, quantized to 8 bits.
PngImage tonemap_preview(const HdrImage& img);

/// sha256 hex digest of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const void* data, size_t n);

}  // namespace colight
