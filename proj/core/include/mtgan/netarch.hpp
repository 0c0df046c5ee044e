#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtgan/nn.hpp"

namespace mtgan::net {

enum class FusionMode { per_block, end_only };

FusionMode fusion_mode_from_string(const std::string& s);
std::string to_string(FusionMode m);
UpsampleMode upsample_mode_from_string(const std::string& s);
std::string to_string(UpsampleMode m);

// Branch i (1-based) runs at down-sampling rate 4*2^(i-1): 4x, 8x, 16x, 32x.
struct GeneratorConfig {
    int num_branches = 3;        // 1..4
    int blocks_per_branch = 6;
    int base_channels = 64;
    FusionMode fusion_mode = FusionMode::per_block;
    UpsampleMode upsample_mode = UpsampleMode::nearest;

    void validate() const;
    int branch_rate(int branch) const { return 4 << branch; }  // branch 0-based here
    int largest_rate() const { return 4 << (num_branches - 1); }
    int channel_cap() const { return base_channels * 8; }
    int branch_channels(int branch) const;  // 0-based
    // Input sides must be divisible by the deepest down-sampling rate.
    int input_divisor() const { return largest_rate(); }

    std::string to_json() const;
    static GeneratorConfig from_json(const std::string& json_text);
    bool operator==(const GeneratorConfig&) const = default;
};

// A feature map tagged with its down-sampling rate relative to the input.
struct FeatureMap {
    Var values;
    int scale = 1;
};

// Eq.-style fusion unit: upsample the small-scale map 2x, concatenate with
// the adjacent large-scale map, and restore the large map's channel count
// through a 1x1 convolution.
FeatureMap fuse(const FeatureMap& f_s, const FeatureMap& f_l, const nn::Conv2d& conv1x1, UpsampleMode mode);

// Multi-branch texture expansion generator. The trunk (encoder, residual
// chains, fusion convolutions) is shared; each registered category owns a
// decoder. Forward maps Nx3xHxW -> Nx3x2Hx2W with values in [-1, 1].
class Generator {
public:
    Generator(GeneratorConfig config, const std::vector<std::string>& categories, Rng& rng);

    Var forward(const Var& image, const std::string& category) const;

    void add_decoder(const std::string& category, Rng& rng);
    bool has_category(const std::string& category) const;
    const std::vector<std::string>& categories() const { return categories_; }
    const GeneratorConfig& config() const { return config_; }

    nn::ParamList parameters();              // trunk + all decoders, stable order
    nn::ParamList trunk_parameters();
    nn::ParamList decoder_parameters(const std::string& category);

    nn::ParamMap state() const;
    void load_state(const nn::ParamMap& map);
    Generator clone() const;

    // Committed channel/stride plan, one line per layer; its hash is stored
    // in checkpoint manifests so architecture drift is detectable.
    std::string layer_table() const;

private:
    struct Decoder {
        std::vector<nn::Conv2d> up_convs;        // 3 stages, each after a 2x upsample
        std::vector<nn::InstanceNorm2d> up_norms;
        nn::Conv2d out_conv;                     // 7x7 to RGB, tanh-bounded
    };

    Var decode(const Var& feature, const Decoder& d) const;

    GeneratorConfig config_;
    // Encoder: stem + progressive stride-2 convolutions; branch i taps the
    // feature at its down-sampling rate.
    nn::Conv2d stem_;
    nn::InstanceNorm2d stem_norm_;
    std::vector<nn::Conv2d> downs_;
    std::vector<nn::InstanceNorm2d> down_norms_;
    std::vector<std::vector<nn::ResidualBlock>> chains_;   // [branch][block]
    std::vector<std::vector<nn::Conv2d>> fusions_;         // [pair][block] or [pair][0]
    std::vector<std::string> categories_;
    std::map<std::string, Decoder> decoders_;

    friend struct GeneratorAccess;
};

// 6-layer PatchGAN-style discriminator: 4x4 kernels, stride 2,2,2,2,1,1.
// The stride-1 layers use size-preserving padding so a 2x larger input
// yields an exactly 2x larger logit map. 256x256 -> 1x16x16 logits.
class PatchDiscriminator {
public:
    PatchDiscriminator(int base_channels, Rng& rng);

    Var forward(const Var& image) const;
    nn::ParamList parameters();
    nn::ParamMap state() const;
    void load_state(const nn::ParamMap& map);
    PatchDiscriminator clone() const;
    int base_channels() const { return base_channels_; }

    static constexpr int kLayers = 6;
    static constexpr int kMinInputSide = 16;  // stride product of the four stride-2 layers

private:
    int base_channels_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::InstanceNorm2d> norms_;  // layers 1..4 (first and last have no norm)
};

}  // namespace mtgan::net
