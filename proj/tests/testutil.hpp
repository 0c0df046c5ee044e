#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "mtgan/autograd.hpp"
#include "mtgan/image.hpp"

namespace mtgan::testutil {

// Central finite difference of a scalar-valued function with respect to one
// entry of `subject`. Independent oracle for every autodiff check.
inline double central_difference(const std::function<double()>& eval, double* slot, double h = 1e-5) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = eval();
    *slot = saved - h;
    const double down = eval();
    *slot = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

// |a-b| <= atol + rtol*max(|a|,|b|), the usual gradcheck agreement form.
inline bool grad_close(double fd, double g, double rtol = 1e-5, double atol = 1e-8) {
    return std::abs(fd - g) <= atol + rtol * std::max(std::abs(fd), std::abs(g));
}

// Scratch directory unique to one test run.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("mtgan-" + tag + "-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Deterministic procedural textures for metric and loss tests. All are
// 3-channel in [-1,1] with non-trivial spatial structure.

// Oriented fibrous strands: anisotropic sinusoid plus seeded noise.
inline Image fibrous_texture(int side, std::uint64_t seed) {
    Image img(side, side);
    Rng rng = make_rng(seed, "fibrous");
    std::normal_distribution<double> jitter(0.0, 0.15);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double v = std::sin(0.35 * x + 0.08 * y) * std::cos(0.02 * y);
            const double n = jitter(rng);
            img.at(y, x, 0) = clamp_unit(0.6 * v + n);
            img.at(y, x, 1) = clamp_unit(0.5 * v + 0.2 + n);
            img.at(y, x, 2) = clamp_unit(0.3 * v - 0.2 + n);
        }
    return img;
}

// Cellular blobs: distance-to-seed-point pattern (honeycomb-ish).
inline Image cellular_texture(int side, std::uint64_t seed) {
    Image img(side, side);
    Rng rng = make_rng(seed, "cellular");
    std::uniform_int_distribution<int> pos(0, side - 1);
    constexpr int kPoints = 24;
    int px[kPoints], py[kPoints];
    for (int i = 0; i < kPoints; ++i) {
        px[i] = pos(rng);
        py[i] = pos(rng);
    }
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            double best = 1e18;
            for (int i = 0; i < kPoints; ++i) {
                const double dx = x - px[i], dy = y - py[i];
                best = std::min(best, dx * dx + dy * dy);
            }
            const double d = std::sqrt(best) / side;
            img.at(y, x, 0) = clamp_unit(1.0 - 14.0 * d);
            img.at(y, x, 1) = clamp_unit(0.8 - 10.0 * d);
            img.at(y, x, 2) = clamp_unit(0.4 - 6.0 * d);
        }
    return img;
}

// Radial spiral pattern (cobweb-ish center + rings).
inline Image radial_texture(int side, std::uint64_t seed) {
    Image img(side, side);
    Rng rng = make_rng(seed, "radial");
    std::normal_distribution<double> jitter(0.0, 0.1);
    const double cx = side / 2.0, cy = side / 2.0;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double r = std::hypot(x - cx, y - cy);
            const double a = std::atan2(y - cy, x - cx);
            const double v = std::sin(0.25 * r + 3.0 * a);
            const double n = jitter(rng);
            img.at(y, x, 0) = clamp_unit(0.7 * v + n);
            img.at(y, x, 1) = clamp_unit(0.4 * v + 0.1 + n);
            img.at(y, x, 2) = clamp_unit(-0.3 * v + n);
        }
    return img;
}

// Smooth color gradient with checkered modulation (stained-ish).
inline Image stained_texture(int side, std::uint64_t seed) {
    Image img(side, side);
    Rng rng = make_rng(seed, "stained");
    std::normal_distribution<double> jitter(0.0, 0.08);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double g = 2.0 * x / side - 1.0;
            const double h = 2.0 * y / side - 1.0;
            const double m = ((x / 16 + y / 16) % 2 == 0) ? 0.25 : -0.25;
            img.at(y, x, 0) = clamp_unit(0.5 * g + m + jitter(rng));
            img.at(y, x, 1) = clamp_unit(0.5 * h - m + jitter(rng));
            img.at(y, x, 2) = clamp_unit(0.3 * (g + h) + jitter(rng));
        }
    return img;
}

// Cracked plate: dark random polylines over a bright base.
inline Image cracked_texture(int side, std::uint64_t seed) {
    Image img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            img.at(y, x, 0) = 0.6;
            img.at(y, x, 1) = 0.5;
            img.at(y, x, 2) = 0.35;
        }
    Rng rng = make_rng(seed, "cracked");
    std::uniform_int_distribution<int> pos(0, side - 1);
    std::uniform_int_distribution<int> step(-2, 2);
    for (int c = 0; c < 18; ++c) {
        int x = pos(rng), y = pos(rng);
        for (int t = 0; t < side; ++t) {
            x = std::clamp(x + step(rng), 0, side - 1);
            y = std::clamp(y + step(rng), 0, side - 1);
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = -0.8;
        }
    }
    return img;
}

inline Image random_noise_image(int side, std::uint64_t seed) {
    Image img(side, side);
    Rng rng = make_rng(seed, "noise-img");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : img.px) v = u(rng);
    return img;
}

}  // namespace mtgan::testutil
