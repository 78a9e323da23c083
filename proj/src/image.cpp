#include "colight/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "colight/errors.hpp"

namespace colight {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode) {
    FILE* f = std::fopen(path.c_str(), mode);
    if (!f) throw InvalidInput("cannot open " + path);
    return FilePtr(f);
}

// Reads one whitespace-delimited token, skipping comments is not needed for PFM.
std::string read_token(FILE* f) {
    std::string tok;
    int c;
    while ((c = std::fgetc(f)) != EOF && std::isspace(c)) {
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(char(c));
        c = std::fgetc(f);
    }
    return tok;
}

void write_pfm_impl(const std::string& path, const double* data, int w, int h, int channels) {
    FilePtr f = open_or_throw(path, "wb");
    std::fprintf(f.get(), "%s\n%d %d\n-1.0\n", channels == 3 ? "PF" : "Pf", w, h);
    std::vector<float> row(size_t(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        const double* src = data + size_t(y) * w * channels;
        for (size_t i = 0; i < row.size(); ++i) row[i] = float(src[i]);
        if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            throw InvalidInput("short write to " + path);
    }
}

void read_pfm_impl(const std::string& path, std::vector<double>& out, int& w, int& h, int& channels) {
    FilePtr f = open_or_throw(path, "rb");
    std::string magic = read_token(f.get());
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw InvalidInput(path + ": not a PFM file");
    w = std::atoi(read_token(f.get()).c_str());
    h = std::atoi(read_token(f.get()).c_str());
    double scale = std::atof(read_token(f.get()).c_str());
    if (w <= 0 || h <= 0) throw InvalidInput(path + ": bad PFM dimensions");
    if (scale >= 0) throw InvalidInput(path + ": big-endian PFM not supported");
    out.assign(size_t(w) * h * channels, 0.0);
    std::vector<float> row(size_t(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            throw InvalidInput(path + ": truncated PFM data");
        double* dst = out.data() + size_t(y) * w * channels;
        double mag = -scale;
        for (size_t i = 0; i < row.size(); ++i) dst[i] = double(row[i]) * (mag == 1.0 ? 1.0 : mag);
    }
}

}  // namespace

void write_pfm(const std::string& path, const HdrImage& img) {
    write_pfm_impl(path, img.data().data(), img.width(), img.height(), 3);
}

void write_pfm(const std::string& path, const ScalarImage& img) {
    write_pfm_impl(path, img.data().data(), img.width(), img.height(), 1);
}

HdrImage read_pfm(const std::string& path) {
    std::vector<double> data;
    int w, h, ch;
    read_pfm_impl(path, data, w, h, ch);
    if (ch != 3) throw InvalidInput(path + ": expected 3-channel PFM");
    HdrImage img(w, h);
    img.data() = std::move(data);
    return img;
}

ScalarImage read_pfm_gray(const std::string& path) {
    std::vector<double> data;
    int w, h, ch;
    read_pfm_impl(path, data, w, h, ch);
    if (ch != 1) throw InvalidInput(path + ": expected 1-channel PFM");
    ScalarImage img(w, h);
    img.data() = std::move(data);
    return img;
}

// ---- PNG ----

void write_png(const std::string& path, const PngImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw InvalidInput("png: only 1 or 3 channels supported");
    if (img.bit_depth != 8 && img.bit_depth != 16) throw InvalidInput("png: bit depth must be 8 or 16");
    FilePtr f = open_or_throw(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw InvalidInput("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InvalidInput("libpng failure writing " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    size_t stride = size_t(img.width) * img.channels;
    if (img.bit_depth == 8) {
        std::vector<uint8_t> row(stride);
        for (int y = 0; y < img.height; ++y) {
            const uint16_t* src = img.pixels.data() + size_t(y) * stride;
            for (size_t i = 0; i < stride; ++i) row[i] = uint8_t(src[i] > 255 ? 255 : src[i]);
            png_write_row(png, row.data());
        }
    } else {
        std::vector<uint8_t> row(stride * 2);
        for (int y = 0; y < img.height; ++y) {
            const uint16_t* src = img.pixels.data() + size_t(y) * stride;
            for (size_t i = 0; i < stride; ++i) {
                row[2 * i] = uint8_t(src[i] >> 8);  // PNG is big endian
                row[2 * i + 1] = uint8_t(src[i] & 0xff);
            }
            png_write_row(png, row.data());
        }
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

PngImage read_png(const std::string& path) {
    FilePtr f = open_or_throw(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw InvalidInput("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidInput("libpng failure reading " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    PngImage img;
    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info);
    img.channels = png_get_channels(png, info);
    size_t stride = size_t(img.width) * img.channels;
    img.pixels.assign(stride * img.height, 0);

    std::vector<uint8_t> row(png_get_rowbytes(png, info));
    for (int y = 0; y < img.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        uint16_t* dst = img.pixels.data() + size_t(y) * stride;
        if (img.bit_depth == 8) {
            for (size_t i = 0; i < stride; ++i) dst[i] = row[i];
        } else {
            for (size_t i = 0; i < stride; ++i) dst[i] = uint16_t(row[2 * i] << 8 | row[2 * i + 1]);
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_mask_png(const std::string& path, const std::vector<uint8_t>& mask, int width, int height) {
    if (mask.size() != size_t(width) * height) throw InvalidInput("mask size mismatch");
    PngImage img;
    img.width = width;
    img.height = height;
    img.channels = 1;
    img.bit_depth = 8;
    img.pixels.resize(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
    write_png(path, img);
}

std::vector<uint8_t> read_mask_png(const std::string& path, int& width, int& height) {
    PngImage img = read_png(path);
    width = img.width;
    height = img.height;
    std::vector<uint8_t> mask(size_t(width) * height);
    double maxval = img.bit_depth == 16 ? 65535.0 : 255.0;
    for (size_t i = 0; i < mask.size(); ++i) {
        // Use the first channel for multi-channel masks.
        uint16_t v = img.pixels[i * img.channels];
        mask[i] = (v / maxval) > 0.5 ? 1 : 0;
    }
    return mask;
}

double srgb_encode(double linear) {
    double c = clamp(linear, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

PngImage tonemap_preview(const HdrImage& img) {
    PngImage out;
    out.width = img.width();
    out.height = img.height();
    out.channels = 3;
    out.bit_depth = 8;
    out.pixels.resize(img.pixel_count() * 3);
    const double inv_gamma = 1.0 / 2.2;
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        Rgb c = img.at_index(i);
        for (int ch = 0; ch < 3; ++ch) {
            double v = std::fmax(c[ch], 0.0);
            v = v / (1.0 + v);
            v = std::pow(v, inv_gamma);
            out.pixels[i * 3 + ch] = uint16_t(std::lround(clamp(v, 0.0, 1.0) * 255.0));
        }
    }
    return out;
}

}  // namespace colight
