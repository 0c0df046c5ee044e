#include "mtgan/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "mtgan/serialize.hpp"

namespace mtgan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
    const double q = std::round((v + 1.0) * 127.5);
    return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

double from_byte(std::uint8_t b) { return static_cast<double>(b) / 127.5 - 1.0; }

Image load_png_file(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw IngestionError("cannot open PNG: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestionError("corrupt PNG: " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    Image img(h, w);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = from_byte(row[static_cast<std::size_t>(x) * 3 + c]);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Image load_jpeg_file(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw IngestionError("cannot open JPEG: " + path.string());
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IngestionError("corrupt JPEG: " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    Image img(h, w);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    JSAMPROW rows[1] = {row.data()};
    for (int y = 0; y < h; ++y) {
        jpeg_read_scanlines(&cinfo, rows, 1);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = from_byte(row[static_cast<std::size_t>(x) * 3 + c]);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

bool has_png_magic(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    unsigned char sig[8] = {};
    f.read(reinterpret_cast<char*>(sig), 8);
    return f.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IngestionError("no such image: " + path.string());
    return has_png_magic(path) ? load_png_file(path) : load_jpeg_file(path);
}

void save_png(const std::filesystem::path& path, const Image& img) {
    if (img.empty()) throw PreconditionError("save_png: empty image");
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw IngestionError("cannot create PNG: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IngestionError("PNG write failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = to_byte(img.at(y, x, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_jpeg(const std::filesystem::path& path, const Image& img, int quality) {
    if (img.empty()) throw PreconditionError("save_jpeg: empty image");
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw IngestionError("cannot create JPEG: " + path.string());
    jpeg_compress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw IngestionError("JPEG write failed: " + path.string());
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f.get());
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    JSAMPROW rows[1] = {row.data()};
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = to_byte(img.at(y, x, c));
        jpeg_write_scanlines(&cinfo, rows, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

Image load_image_raw(const std::filesystem::path& path) {
    std::string bytes = read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "MTI1", 4) != 0)
        throw IntegrityError("bad raw image header: " + path.string());
    std::int32_t h, w;
    std::memcpy(&h, bytes.data() + 4, 4);
    std::memcpy(&w, bytes.data() + 8, 4);
    const std::size_t n = static_cast<std::size_t>(h) * w * 3;
    if (bytes.size() != 12 + n * sizeof(double)) throw IntegrityError("truncated raw image: " + path.string());
    Image img(h, w);
    std::memcpy(img.px.data(), bytes.data() + 12, n * sizeof(double));
    return img;
}

void save_image_raw(const std::filesystem::path& path, const Image& img) {
    std::string bytes;
    bytes.append("MTI1", 4);
    const std::int32_t h = img.height, w = img.width;
    bytes.append(reinterpret_cast<const char*>(&h), 4);
    bytes.append(reinterpret_cast<const char*>(&w), 4);
    bytes.append(reinterpret_cast<const char*>(img.px.data()), img.px.size() * sizeof(double));
    write_file_atomic(path, bytes);
}

Image load_image_any(const std::filesystem::path& path) {
    return path.extension() == ".mti" ? load_image_raw(path) : load_image(path);
}

namespace {

// Catmull-Rom kernel (a = -0.5).
inline double cubic_weight(double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
    return 0.0;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

double sample_bicubic(const Image& img, double y, double x, int c) {
    const int iy = static_cast<int>(std::floor(y));
    const int ix = static_cast<int>(std::floor(x));
    double acc = 0.0;
    for (int dy = -1; dy <= 2; ++dy) {
        const double wy = cubic_weight(y - (iy + dy));
        if (wy == 0.0) continue;
        const int sy = clampi(iy + dy, 0, img.height - 1);
        for (int dx = -1; dx <= 2; ++dx) {
            const double wx = cubic_weight(x - (ix + dx));
            if (wx == 0.0) continue;
            const int sx = clampi(ix + dx, 0, img.width - 1);
            acc += wy * wx * img.at(sy, sx, c);
        }
    }
    return acc;
}

Image resize_bicubic(const Image& img, int new_h, int new_w) {
    if (img.empty() || new_h < 1 || new_w < 1) throw PreconditionError("resize_bicubic: bad sizes");
    if (new_h == img.height && new_w == img.width) return img;
    Image out(new_h, new_w);
    const double sy = static_cast<double>(img.height) / new_h;
    const double sx = static_cast<double>(img.width) / new_w;
    for (int y = 0; y < new_h; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < new_w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp_unit(sample_bicubic(img, src_y, src_x, c));
        }
    }
    return out;
}

Image crop(const Image& img, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || top + h > img.height || left + w > img.width)
        throw ShapeError("crop out of bounds: " + std::to_string(top) + "," + std::to_string(left) + " " +
                         std::to_string(h) + "x" + std::to_string(w) + " from " + std::to_string(img.height) + "x" +
                         std::to_string(img.width));
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
    return out;
}

double clamp_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

namespace {

// NTSC YIQ forward matrix; the inverse is derived from it exactly so that
// a forward/backward round trip preserves Y to machine precision.
constexpr double kYiq[3][3] = {
    {0.299, 0.587, 0.114},
    {0.595716, -0.274453, -0.321263},
    {0.211456, -0.522591, 0.311135},
};

const std::array<std::array<double, 3>, 3>& yiq_inverse() {
    static const std::array<std::array<double, 3>, 3> inv = [] {
        const auto& m = kYiq;
        const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        std::array<std::array<double, 3>, 3> r;
        r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
        r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
        r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
        r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
        r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
        r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
        r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
        r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        return r;
    }();
    return inv;
}

}  // namespace

void rgb_to_yiq(double r, double g, double b, double& y, double& i, double& q) {
    y = kYiq[0][0] * r + kYiq[0][1] * g + kYiq[0][2] * b;
    i = kYiq[1][0] * r + kYiq[1][1] * g + kYiq[1][2] * b;
    q = kYiq[2][0] * r + kYiq[2][1] * g + kYiq[2][2] * b;
}

void yiq_to_rgb(double y, double i, double q, double& r, double& g, double& b) {
    const auto& m = yiq_inverse();
    r = m[0][0] * y + m[0][1] * i + m[0][2] * q;
    g = m[1][0] * y + m[1][1] * i + m[1][2] * q;
    b = m[2][0] * y + m[2][1] * i + m[2][2] * q;
}

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

Tensor image_to_tensor(const Image& img) {
    Tensor t({1, 3, img.height, img.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) t.at4(0, c, y, x) = img.at(y, x, c);
    return t;
}

Tensor images_to_tensor(const std::vector<Image>& imgs) {
    if (imgs.empty()) throw PreconditionError("images_to_tensor: empty batch");
    const int h = imgs[0].height, w = imgs[0].width;
    Tensor t({static_cast<std::int64_t>(imgs.size()), 3, h, w});
    for (std::size_t n = 0; n < imgs.size(); ++n) {
        if (imgs[n].height != h || imgs[n].width != w) throw ShapeError("images_to_tensor: mixed sizes in batch");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) t.at4(static_cast<std::int64_t>(n), c, y, x) = imgs[n].at(y, x, c);
    }
    return t;
}

Image tensor_to_image(const Tensor& t, std::int64_t n) {
    if (t.dim() != 4 || t.size(1) != 3) throw ShapeError("tensor_to_image: expected Nx3xHxW, got " + t.shape_str());
    Image img(static_cast<int>(t.size(2)), static_cast<int>(t.size(3)));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp_unit(t.at4(n, c, y, x));
    return img;
}

}  // namespace mtgan
