#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mtgan/datapipe.hpp"
#include "mtgan/nn.hpp"

namespace mtgan::msts {

// Patch -> fixed-dimension feature vector. Implementations must be
// deterministic: the same patch always produces the same vector.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual int dim() const = 0;
    virtual int min_input_side() const = 0;
    virtual std::vector<double> extract(const Image& patch) const = 0;
    virtual std::string id() const = 0;
    virtual std::string weights_hash() const = 0;
};

// Training-free extractor: a seeded random projection of local color
// statistics and gradient-orientation histograms. Used by the test suite so
// the metric math is checkable without any trained network.
class SyntheticExtractor final : public FeatureExtractor {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x6d737473ULL;  // "msts"
    explicit SyntheticExtractor(std::uint64_t seed = kDefaultSeed, int dim = 128);

    int dim() const override { return dim_; }
    int min_input_side() const override { return 16; }
    std::vector<double> extract(const Image& patch) const override;
    std::string id() const override { return id_; }
    std::string weights_hash() const override { return hash_; }

    static std::vector<double> raw_descriptor(const Image& patch);  // pre-projection
    static constexpr int kDescriptorDim = 80;

private:
    int dim_;
    Tensor projection_;  // dim x kDescriptorDim
    std::string id_;
    std::string hash_;
};

// Small texture classifier whose penultimate layer (global average pooled
// last feature map) provides the metric features. Patches are resized to a
// fixed input side before the forward pass.
class ClassifierExtractor final : public FeatureExtractor {
public:
    struct TrainOptions {
        int iters = 300;
        int batch_size = 8;
        double lr = 1e-3;
        std::uint64_t seed = 0;
        int input_side = 64;
        int crop_side = 128;  // training crop taken from the sample, then resized
    };

    static ClassifierExtractor train(const std::vector<data::CategoryDataset>& datasets, const TrainOptions& opts,
                                     int feature_dim = 128);
    static ClassifierExtractor load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    int dim() const override;
    int min_input_side() const override { return 16; }
    std::vector<double> extract(const Image& patch) const override;
    std::string id() const override { return id_; }
    std::string weights_hash() const override { return hash_; }

    const std::vector<std::string>& categories() const { return categories_; }
    // Penultimate features for a batch (training-time path, grad-aware).
    Var features(const Var& batch) const;
    Var logits(const Var& batch) const;
    nn::ParamList parameters();

private:
    ClassifierExtractor() = default;
    static ClassifierExtractor build(int feature_dim, int num_classes, int input_side, Rng& rng);
    void finalize(std::string id);
    std::string encode() const;

    int input_side_ = 64;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::InstanceNorm2d> norms_;
    nn::Linear head_;
    std::vector<std::string> categories_;
    std::string id_;
    std::string hash_;
};

// Gaussian moment fit of a feature set: sample mean and (n-1)-normalized
// sample covariance, symmetrized. n == 1 yields a zero covariance.
struct FeatureDistribution {
    Tensor mean;  // {D}
    Tensor cov;   // {D, D}
    int n = 0;
};

FeatureDistribution fit_gaussian(const std::vector<std::vector<double>>& features);

// Wasserstein-2 distance between Gaussian fits, as
//   s = (||m_a-m_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^{1/2}))^{1/2}
// including the outer square root. The matrix square root is taken by
// eigendecomposition of the symmetrized product (C_a C_b + C_b C_a)/2 with
// negative eigenvalues clamped to zero; the trace argument is clamped at
// >= 0 before the outer root. Identical inputs return exactly 0.
double w2_distance(const FeatureDistribution& a, const FeatureDistribution& b);

// Random square patches fully inside the image. Scale must be one of
// {1, 3/4, 1/2, 1/4}; side = round(scale * min(H, W)). Scale 1 collapses to
// a single whole-image patch.
std::vector<Image> sample_patches(const Image& image, double scale, int count, Rng& rng);

struct MSTSReport {
    std::array<double, 4> s{};  // s1..s4, scales 1, 3/4, 1/2, 1/4
    double total = 0.0;         // (s1+s2+s3+s4) * 1e3
    int patch_count = 16;
    std::uint64_t seed = 0;
    std::string extractor_id;
    std::string extractor_hash;
};

struct MstsOptions {
    int patch_count = 16;
    // When set, original and generated use the same patch stream; with
    // identical images every per-scale score is exactly zero.
    bool shared_substream = false;
};

MSTSReport msts(const Image& original, const Image& generated, const FeatureExtractor& ext, std::uint64_t seed,
                const MstsOptions& opts = {});

enum class DistortionKind { shuffle, warp, blur, remove };
DistortionKind distortion_kind_from_string(const std::string& s);
std::string to_string(DistortionKind k);

struct DistortionSpec {
    DistortionKind kind = DistortionKind::blur;
    int level = 0;  // 0..4; 0 is the identity for every kind

    // Committed level constants (the levels are fixed, the constants are
    // configurable here): shuffle permutes level/4 of an 8x8 cell grid,
    // warp displaces by up to 4*level px, blur uses sigma = 1.0*level,
    // remove replaces 0.1*level of all pixels with the mean color.
    int shuffle_grid = 8;
    double warp_px_per_level = 4.0;
    double blur_sigma_per_level = 1.0;
    double remove_frac_per_level = 0.1;
};

Image distort(const Image& image, const DistortionSpec& spec, Rng& rng);

std::vector<std::pair<int, double>> sensitivity_curve(const Image& image, DistortionKind kind,
                                                      const FeatureExtractor& ext, std::uint64_t seed);

}  // namespace mtgan::msts
