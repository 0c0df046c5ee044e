#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mtgan/image.hpp"

namespace mtgan::data {

inline constexpr std::array<std::string_view, 11> kDtd11Categories = {
    "braided", "bubbly", "bumpy", "cobwebbed", "cracked", "fibrous",
    "honeycombed", "scaly", "spiralled", "stained", "veined",
};
bool is_dtd11_category(std::string_view category);

struct TextureSample {
    Image image;
    std::string category;  // registered category or "unlabeled"
    std::string id;        // path-derived stable identifier
};

struct CategoryDataset {
    std::string category;
    std::uint64_t seed = 0;
    std::vector<TextureSample> train;
    std::vector<TextureSample> held_out;
};

// Minimum training side; smaller inputs are upscaled bicubically so that
// web-collected images still work.
inline constexpr int kMinTrainSide = 256;

// Normalizes one decoded image into a training sample (min side >= 256).
TextureSample make_sample(Image img, std::string category, std::string id);
TextureSample load_sample(const std::filesystem::path& path, std::string category);

// Deterministic 110/10 split of <root>/<category>/*.{png,jpg,jpeg}.
// The split permutes the sorted id list with a seed-derived stream, so the
// same (root, category, seed) always produces the same id partition.
CategoryDataset load_dtd11(const std::filesystem::path& root, const std::string& category, std::uint64_t seed);

std::string split_manifest_json(const CategoryDataset& ds);
void write_split_manifest(const std::filesystem::path& path, const CategoryDataset& ds);

struct CropPair {
    Image source;           // target_size/2 square
    Image target;           // target_size square
    int source_row = 0;     // offset of source inside target
    int source_col = 0;
    int target_row = 0;     // offset of target inside the sample
    int target_col = 0;
};

// Self-supervised expansion pair: target is a random window of the sample,
// source a random sub-window of the target (so the generator learns to
// extrapolate a true super-region of its input).
CropPair make_crop_pair(const TextureSample& sample, Rng& rng, int target_size = 256);

struct PerturbSpec {
    double noise_std = 0.0;    // additive Gaussian, [-1,1] units
    double brightness = 0.0;   // multiplicative jitter range
    double contrast = 0.0;
    double saturation = 0.0;
    double hue = 0.0;          // fraction of a full chroma rotation, <= 0.5

    bool identity() const {
        return noise_std == 0.0 && brightness == 0.0 && contrast == 0.0 && saturation == 0.0 && hue == 0.0;
    }
};

TextureSample perturb(const TextureSample& sample, const PerturbSpec& spec, Rng& rng);
Image perturb_image(const Image& img, const PerturbSpec& spec, Rng& rng);

}  // namespace mtgan::data
