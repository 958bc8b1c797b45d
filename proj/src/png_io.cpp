#include "increcon/image.hpp"

#include "increcon/core.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace increcon {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageF read_depth_png(const std::string& path, double depth_scale) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail("cannot open PNG: ", path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        fail("not a PNG file: ", path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) fail("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("PNG read error: ", path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int width = int(png_get_image_width(png, info));
    const int height = int(png_get_image_height(png, info));
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("depth PNG must be 16-bit grayscale: ", path);
    }
    png_set_swap(png);  // PNG is big-endian on disk

    std::vector<uint16_t> raw(size_t(width) * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(raw.data() + size_t(y) * width);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageF out(width, height);
    for (size_t i = 0; i < raw.size(); ++i)
        out.px[i] = raw[i] == 0 ? 0.0f : float(raw[i] / depth_scale);
    return out;
}

void write_depth_png(const std::string& path, const ImageF& depth_m, double depth_scale) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail("cannot write PNG: ", path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) fail("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("PNG write error: ", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, depth_m.width, depth_m.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);

    std::vector<uint16_t> raw(size_t(depth_m.width) * depth_m.height);
    for (size_t i = 0; i < raw.size(); ++i) {
        double v = std::round(double(depth_m.px[i]) * depth_scale);
        raw[i] = uint16_t(std::min(65535.0, std::max(0.0, v)));
    }
    std::vector<png_bytep> rows(depth_m.height);
    for (int y = 0; y < depth_m.height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(raw.data() + size_t(y) * depth_m.width);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace increcon
