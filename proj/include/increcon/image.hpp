#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace increcon {

// Row-major single-channel image.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> px;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), px(size_t(w) * h, fill) {}

    T& at(int x, int y) { return px[size_t(y) * width + x]; }
    const T& at(int x, int y) const { return px[size_t(y) * width + x]; }
    bool empty() const { return px.empty(); }
    size_t size() const { return px.size(); }
};

using ImageF = Image<float>;

// 16-bit grayscale PNG depth images: stored value / depth_scale = meters, 0 = invalid.
ImageF read_depth_png(const std::string& path, double depth_scale = 1000.0);
void write_depth_png(const std::string& path, const ImageF& depth_m, double depth_scale = 1000.0);

}  // namespace increcon
