#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtgan/netarch.hpp"

namespace mtgan::loss {

// Frozen VGG-style feature extractor behind the style/perceptual losses.
// Five taps span shallow to deep (first convolution of each stage); the
// perceptual loss reads the middle tap. Weights come from a serialized
// container file or are generated deterministically from a seed; they are
// never trained, and the container hash is recorded in checkpoints.
//
// Input convention: images in [-1,1] are remapped internally to [0,1] and
// standardized with mean (0.485, 0.456, 0.406) and std (0.229, 0.224, 0.225).
class PerceptualEncoder {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x7465782d656e63ULL;
    static constexpr int kTapCount = 5;
    static constexpr int kPerceptualTap = 2;  // relu3_1
    static constexpr int kMinInputSide = 16;

    // widths: channel count of each of the five stages.
    static PerceptualEncoder generate(std::uint64_t seed, std::vector<int> widths = {16, 32, 64, 128, 128});
    static PerceptualEncoder generate_default() { return generate(kDefaultSeed); }
    static PerceptualEncoder load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::vector<Var> style_taps(const Var& image) const;  // kTapCount entries
    Var perceptual_tap(const Var& image) const;

    const std::string& id() const { return id_; }
    const std::string& weights_hash() const { return weights_hash_; }
    const std::vector<int>& widths() const { return widths_; }
    nn::ParamList parameters();  // frozen (requires_grad == false)
    std::string checksum();      // over parameter bytes, for freeze auditing

private:
    PerceptualEncoder() = default;
    void finalize(std::string id);
    std::string encode() const;

    std::vector<int> widths_;
    std::vector<nn::Conv2d> convs_;  // conv{s}_1, conv{s}_2 per stage, single conv in stage 5
    std::string id_;
    std::string weights_hash_;
};

// Per-sample Gram matrix of a feature map, normalized by C*H*W.
using mtgan::gram;

// Sum over taps of MSE between Gram matrices. Zero iff Grams match at
// every tap; always >= 0.
Var style_loss(const PerceptualEncoder& enc, const Var& generated, const Var& target);

// MSE of raw features at the mid-depth tap.
Var perceptual_loss(const PerceptualEncoder& enc, const Var& generated, const Var& target);

// Least-squares GAN terms.
//   d = 0.5 E[(logit_real - 1)^2] + 0.5 E[logit_fake^2]
//   g = 0.5 E[(logit_fake - 1)^2]
struct AdversarialLosses {
    Var g;
    Var d;
};
AdversarialLosses adversarial_losses(const Var& disc_logits_real, const Var& disc_logits_fake);

// Continual-learning distillation: keeps the live old-decoder output close
// to its frozen snapshot. The old discriminator only scores, it is never
// optimized.
struct DistillationTerms {
    Var adv;      // g-side LSGAN term through the frozen old discriminator
    Var style;
    Var perceptual;
    Var disc_l1;  // mean |D_old(Y_o) - D_old(Yhat_o)|
    Var total;
};
DistillationTerms distillation_terms(const Var& y_old, const Var& yhat_old, const net::PatchDiscriminator& old_disc,
                                     const PerceptualEncoder& enc);
Var distillation_loss(const Var& y_old, const Var& yhat_old, const net::PatchDiscriminator& old_disc,
                      const PerceptualEncoder& enc);

// Scalar record of one objective evaluation, as written to loss history.
struct LossBundle {
    double adv = 0.0;
    double style = 0.0;
    double perceptual = 0.0;
    double old_l1 = 0.0;
    double total = 0.0;
};

}  // namespace mtgan::loss
