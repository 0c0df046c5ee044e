#pragma once

#include <filesystem>
#include <vector>

#include "mtgan/tensor.hpp"

namespace mtgan {

// RGB image, interleaved rows, values in [-1, 1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> px;  // height*width*3

    Image() = default;
    Image(int h, int w) : height(h), width(w), px(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    double& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    bool empty() const { return height == 0 || width == 0; }
    int min_side() const { return height < width ? height : width; }
};

// 8-bit PNG/JPEG codecs. Values quantize as round((v+1)*127.5) clamped to
// [0,255]; decoding maps p/127.5 - 1, so a save/load round trip moves a
// pixel by at most 1/127.5.
Image load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& img);
void save_jpeg(const std::filesystem::path& path, const Image& img, int quality = 95);

// Full-precision raw container ("MTI1") for quantization-free metric input.
Image load_image_raw(const std::filesystem::path& path);
void save_image_raw(const std::filesystem::path& path, const Image& img);

// Loads PNG/JPEG by extension, or the raw container for ".mti".
Image load_image_any(const std::filesystem::path& path);

Image resize_bicubic(const Image& img, int new_h, int new_w);
Image crop(const Image& img, int top, int left, int h, int w);

// Catmull-Rom bicubic sample with border clamp; x,y in pixel coordinates.
double sample_bicubic(const Image& img, double y, double x, int c);

double clamp_unit(double v);  // clamp to [-1, 1]

// Luma/chroma transform used by the hue jitter: NTSC YIQ over [0,1] RGB.
void rgb_to_yiq(double r, double g, double b, double& y, double& i, double& q);
void yiq_to_rgb(double y, double i, double q, double& r, double& g, double& b);
double luminance(double r, double g, double b);  // the Y of rgb_to_yiq

Tensor image_to_tensor(const Image& img);               // 1x3xHxW
Tensor images_to_tensor(const std::vector<Image>&);     // Nx3xHxW, equal sizes
Image tensor_to_image(const Tensor& t, std::int64_t n = 0);  // clamps to [-1,1]

}  // namespace mtgan
