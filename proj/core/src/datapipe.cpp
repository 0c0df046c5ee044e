#include "mtgan/datapipe.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "mtgan/serialize.hpp"

namespace mtgan::data {

using nlohmann::json;

bool is_dtd11_category(std::string_view category) {
    return std::find(kDtd11Categories.begin(), kDtd11Categories.end(), category) != kDtd11Categories.end();
}

TextureSample make_sample(Image img, std::string category, std::string id) {
    if (img.empty()) throw IngestionError("empty image for sample '" + id + "'");
    if (img.min_side() < kMinTrainSide) {
        const double f = static_cast<double>(kMinTrainSide) / img.min_side();
        const int nh = std::max(kMinTrainSide, static_cast<int>(std::lround(img.height * f)));
        const int nw = std::max(kMinTrainSide, static_cast<int>(std::lround(img.width * f)));
        img = resize_bicubic(img, nh, nw);
    }
    for (auto& v : img.px) v = clamp_unit(v);
    return TextureSample{std::move(img), std::move(category), std::move(id)};
}

TextureSample load_sample(const std::filesystem::path& path, std::string category) {
    return make_sample(load_image_any(path), std::move(category), path.stem().string());
}

namespace {

bool is_image_file(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

CategoryDataset load_dtd11(const std::filesystem::path& root, const std::string& category, std::uint64_t seed) {
    if (!is_dtd11_category(category))
        throw ConfigError("'" + category + "' is not a DTD-11 category (expected one of braided, bubbly, bumpy, "
                          "cobwebbed, cracked, fibrous, honeycombed, scaly, spiralled, stained, veined)");
    const auto dir = root / category;
    if (!std::filesystem::is_directory(dir)) throw IngestionError("no category directory: " + dir.string());

    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<std::pair<std::string, Image>> decoded;
    decoded.reserve(files.size());
    for (const auto& f : files) {
        try {
            decoded.emplace_back(f.stem().string(), load_image(f));
        } catch (const IngestionError&) {
            // unreadable file: skipped, counted below
        }
    }
    if (decoded.size() < 120)
        throw IngestionError("category '" + category + "' has only " + std::to_string(decoded.size()) +
                             " readable images, need 120");

    // Permute indices with a split-specific stream; ids were sorted above so
    // the permutation is a pure function of (file set, seed).
    std::vector<std::size_t> idx(decoded.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = make_rng(seed, "dtd11-split/" + category);
    std::shuffle(idx.begin(), idx.end(), rng);

    CategoryDataset ds;
    ds.category = category;
    ds.seed = seed;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        auto& [id, img] = decoded[idx[k]];
        auto sample = make_sample(std::move(img), category, id);
        if (k < 110)
            ds.train.push_back(std::move(sample));
        else
            ds.held_out.push_back(std::move(sample));
    }
    return ds;
}

std::string split_manifest_json(const CategoryDataset& ds) {
    json j;
    j["category"] = ds.category;
    j["seed"] = ds.seed;
    auto ids = [](const std::vector<TextureSample>& v) {
        std::vector<std::string> out;
        out.reserve(v.size());
        for (const auto& s : v) out.push_back(s.id);
        return out;
    };
    j["train"] = ids(ds.train);
    j["held_out"] = ids(ds.held_out);
    return j.dump(2);
}

void write_split_manifest(const std::filesystem::path& path, const CategoryDataset& ds) {
    write_file_atomic(path, split_manifest_json(ds));
}

CropPair make_crop_pair(const TextureSample& sample, Rng& rng, int target_size) {
    const Image& img = sample.image;
    if (target_size < 2 || target_size % 2 != 0) throw ConfigError("target crop size must be even, got " + std::to_string(target_size));
    if (img.height < target_size || img.width < target_size)
        throw PreconditionError("sample '" + sample.id + "' is " + std::to_string(img.height) + "x" +
                                std::to_string(img.width) + ", smaller than crop " + std::to_string(target_size));
    const int source_size = target_size / 2;
    std::uniform_int_distribution<int> dr(0, img.height - target_size);
    std::uniform_int_distribution<int> dc(0, img.width - target_size);
    CropPair pair;
    pair.target_row = dr(rng);
    pair.target_col = dc(rng);
    pair.target = crop(img, pair.target_row, pair.target_col, target_size, target_size);
    std::uniform_int_distribution<int> ds(0, target_size - source_size);
    pair.source_row = ds(rng);
    pair.source_col = ds(rng);
    pair.source = crop(pair.target, pair.source_row, pair.source_col, source_size, source_size);
    return pair;
}

namespace {

// Jitters operate on [0,1] RGB; factors are drawn once per image.
void apply_color_jitter(Image& img, const PerturbSpec& spec, Rng& rng) {
    auto factor = [&rng](double range) {
        std::uniform_real_distribution<double> d(-range, range);
        return 1.0 + d(rng);
    };
    const bool do_b = spec.brightness > 0.0;
    const bool do_c = spec.contrast > 0.0;
    const bool do_s = spec.saturation > 0.0;
    const bool do_h = spec.hue > 0.0;
    const double fb = do_b ? factor(spec.brightness) : 1.0;
    const double fc = do_c ? factor(spec.contrast) : 1.0;
    const double fs = do_s ? factor(spec.saturation) : 1.0;
    double theta = 0.0;
    if (do_h) {
        std::uniform_real_distribution<double> d(-spec.hue, spec.hue);
        theta = d(rng) * 2.0 * M_PI;
    }

    double mean_gray = 0.0;
    if (do_c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double r = (img.at(y, x, 0) + 1.0) * 0.5, g = (img.at(y, x, 1) + 1.0) * 0.5,
                             b = (img.at(y, x, 2) + 1.0) * 0.5;
                mean_gray += luminance(r, g, b);
            }
        mean_gray /= static_cast<double>(img.height) * img.width;
    }

    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double r = (img.at(y, x, 0) + 1.0) * 0.5;
            double g = (img.at(y, x, 1) + 1.0) * 0.5;
            double b = (img.at(y, x, 2) + 1.0) * 0.5;
            if (do_b) { r *= fb; g *= fb; b *= fb; }
            if (do_c) {
                r = mean_gray + (r - mean_gray) * fc;
                g = mean_gray + (g - mean_gray) * fc;
                b = mean_gray + (b - mean_gray) * fc;
            }
            if (do_s) {
                const double gray = luminance(r, g, b);
                r = gray + (r - gray) * fs;
                g = gray + (g - gray) * fs;
                b = gray + (b - gray) * fs;
            }
            if (do_h) {
                // Rotation in the IQ chroma plane leaves Y untouched.
                double yy, ii, qq;
                rgb_to_yiq(r, g, b, yy, ii, qq);
                const double i2 = ct * ii - st * qq;
                const double q2 = st * ii + ct * qq;
                yiq_to_rgb(yy, i2, q2, r, g, b);
            }
            img.at(y, x, 0) = r * 2.0 - 1.0;
            img.at(y, x, 1) = g * 2.0 - 1.0;
            img.at(y, x, 2) = b * 2.0 - 1.0;
        }
}

}  // namespace

Image perturb_image(const Image& img, const PerturbSpec& spec, Rng& rng) {
    if (spec.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
    if (spec.hue > 0.5) throw ConfigError("hue jitter range must be <= 0.5");
    Image out = img;
    if (spec.identity()) return out;
    if (spec.brightness > 0 || spec.contrast > 0 || spec.saturation > 0 || spec.hue > 0)
        apply_color_jitter(out, spec, rng);
    if (spec.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (auto& v : out.px) v += noise(rng);
    }
    for (auto& v : out.px) v = clamp_unit(v);
    return out;
}

TextureSample perturb(const TextureSample& sample, const PerturbSpec& spec, Rng& rng) {
    return TextureSample{perturb_image(sample.image, spec, rng), sample.category, sample.id};
}

}  // namespace mtgan::data
