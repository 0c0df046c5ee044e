#include "mtgan/objectives.hpp"

#include <cmath>

#include "mtgan/hash.hpp"
#include "mtgan/serialize.hpp"

namespace mtgan::loss {

namespace {

constexpr double kMean[3] = {0.485, 0.456, 0.406};
constexpr double kStd[3] = {0.229, 0.224, 0.225};

Tensor normalize_for_encoder(const Tensor& img) {
    const auto& s = img.shape();
    Tensor out(s);
    const std::int64_t plane = s[2] * s[3];
    for (std::int64_t n = 0; n < s[0]; ++n)
        for (std::int64_t c = 0; c < 3; ++c) {
            const double* p = img.data() + (n * 3 + c) * plane;
            double* q = out.data() + (n * 3 + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) q[i] = ((p[i] + 1.0) * 0.5 - kMean[c]) / kStd[c];
        }
    return out;
}

// Same remap as a graph op so gradients flow back to the image.
Var normalize_var(const Var& image) {
    // per-channel affine: (x+1)*0.5/std - mean/std
    const auto& s = image.value().shape();
    Tensor scale_t(s), shift_t(s);
    const std::int64_t plane = s[2] * s[3];
    for (std::int64_t n = 0; n < s[0]; ++n)
        for (std::int64_t c = 0; c < 3; ++c) {
            const double a = 0.5 / kStd[c];
            const double b = (0.5 - kMean[c]) / kStd[c];
            double* sp = scale_t.data() + (n * 3 + c) * plane;
            double* bp = shift_t.data() + (n * 3 + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                sp[i] = a;
                bp[i] = b;
            }
        }
    return add(mul(image, Var(std::move(scale_t))), Var(std::move(shift_t)));
}

}  // namespace

PerceptualEncoder PerceptualEncoder::generate(std::uint64_t seed, std::vector<int> widths) {
    if (widths.size() != 5) throw ConfigError("encoder needs 5 stage widths");
    PerceptualEncoder enc;
    enc.widths_ = std::move(widths);
    Rng rng = make_rng(seed, "encoder-init");
    auto he_conv = [&rng](int cin, int cout) {
        const double std = std::sqrt(2.0 / (static_cast<double>(cin) * 9.0));
        return nn::Conv2d(cin, cout, 3, 1, 1, PadMode::zero, rng, true, std);
    };
    int prev = 3;
    for (int s = 0; s < 5; ++s) {
        const int w = enc.widths_[static_cast<std::size_t>(s)];
        enc.convs_.push_back(he_conv(prev, w));
        if (s < 4) enc.convs_.push_back(he_conv(w, w));
        prev = w;
    }
    enc.finalize("vgg9-random/" + std::to_string(seed));
    return enc;
}

void PerceptualEncoder::finalize(std::string id) {
    id_ = std::move(id);
    auto params = parameters();
    nn::set_requires_grad(params, false);
    weights_hash_ = sha256_hex(encode());
}

std::string PerceptualEncoder::encode() const {
    nn::ParamMap map;
    auto params = const_cast<PerceptualEncoder*>(this)->parameters();
    for (auto& [name, var] : params) map.emplace(name, var.value());
    Tensor meta({static_cast<std::int64_t>(widths_.size())});
    for (std::size_t i = 0; i < widths_.size(); ++i) meta[static_cast<std::int64_t>(i)] = widths_[i];
    map.emplace("__meta__.widths", std::move(meta));
    return encode_tensor_container(map);
}

void PerceptualEncoder::save(const std::filesystem::path& path) const { write_file_atomic(path, encode()); }

PerceptualEncoder PerceptualEncoder::load(const std::filesystem::path& path) {
    auto map = read_tensor_container(path);
    auto meta = map.find("__meta__.widths");
    if (meta == map.end() || meta->second.numel() != 5)
        throw IntegrityError("encoder file lacks stage widths: " + path.string());
    std::vector<int> widths;
    for (std::int64_t i = 0; i < 5; ++i) widths.push_back(static_cast<int>(meta->second[i]));
    PerceptualEncoder enc = generate(0, widths);  // topology only, weights replaced below
    map.erase(meta);
    auto params = enc.parameters();
    nn::load_param_map(params, map);
    enc.finalize("vgg9-file/" + path.filename().string());
    return enc;
}

nn::ParamList PerceptualEncoder::parameters() {
    nn::ParamList out;
    static const char* names[9] = {"conv1_1", "conv1_2", "conv2_1", "conv2_2", "conv3_1",
                                   "conv3_2", "conv4_1", "conv4_2", "conv5_1"};
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(std::string("enc.") + names[i], out);
    return out;
}

std::string PerceptualEncoder::checksum() { auto p = parameters(); return nn::params_checksum(p); }

std::vector<Var> PerceptualEncoder::style_taps(const Var& image) const {
    const auto& s = image.value().shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError("encoder expects Nx3xHxW, got " + image.value().shape_str());
    if (s[2] < kMinInputSide || s[3] < kMinInputSide)
        throw ShapeError("encoder input " + image.value().shape_str() + " below minimum side " +
                         std::to_string(kMinInputSide));
    std::vector<Var> taps;
    Var h = normalize_var(image);
    std::size_t ci = 0;
    for (int stage = 0; stage < 5; ++stage) {
        h = relu(convs_[ci++](h));
        taps.push_back(h);  // relu{stage+1}_1
        if (stage < 4) {
            h = relu(convs_[ci++](h));
            h = avg_pool2x(h);
        }
    }
    return taps;
}

Var PerceptualEncoder::perceptual_tap(const Var& image) const {
    // Same path as style_taps, truncated after relu3_1.
    const auto& s = image.value().shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError("encoder expects Nx3xHxW, got " + image.value().shape_str());
    if (s[2] < kMinInputSide || s[3] < kMinInputSide)
        throw ShapeError("encoder input " + image.value().shape_str() + " below minimum side " +
                         std::to_string(kMinInputSide));
    Var h = normalize_var(image);
    std::size_t ci = 0;
    for (int stage = 0; stage <= kPerceptualTap; ++stage) {
        h = relu(convs_[ci++](h));
        if (stage == kPerceptualTap) return h;
        h = relu(convs_[ci++](h));
        h = avg_pool2x(h);
    }
    return h;
}

Var style_loss(const PerceptualEncoder& enc, const Var& generated, const Var& target) {
    if (!generated.value().same_shape(target.value()))
        throw ShapeError("style_loss: size mismatch " + generated.value().shape_str() + " vs " +
                         target.value().shape_str());
    auto taps_g = enc.style_taps(generated);
    auto taps_t = enc.style_taps(target);
    Var total;
    for (std::size_t i = 0; i < taps_g.size(); ++i) {
        Var term = mse(gram(taps_g[i]), gram(taps_t[i]));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Var perceptual_loss(const PerceptualEncoder& enc, const Var& generated, const Var& target) {
    if (!generated.value().same_shape(target.value()))
        throw ShapeError("perceptual_loss: size mismatch " + generated.value().shape_str() + " vs " +
                         target.value().shape_str());
    return mse(enc.perceptual_tap(generated), enc.perceptual_tap(target));
}

AdversarialLosses adversarial_losses(const Var& disc_logits_real, const Var& disc_logits_fake) {
    if (!disc_logits_real.value().same_shape(disc_logits_fake.value()))
        throw ShapeError("adversarial_losses: logit shape mismatch " + disc_logits_real.value().shape_str() + " vs " +
                         disc_logits_fake.value().shape_str());
    Var d_real = mean_all(square(add_scalar(disc_logits_real, -1.0)));
    Var d_fake = mean_all(square(disc_logits_fake));
    Var d = scale(add(d_real, d_fake), 0.5);
    Var g = scale(mean_all(square(add_scalar(disc_logits_fake, -1.0))), 0.5);
    return {g, d};
}

DistillationTerms distillation_terms(const Var& y_old, const Var& yhat_old, const net::PatchDiscriminator& old_disc,
                                     const PerceptualEncoder& enc) {
    if (!y_old.value().same_shape(yhat_old.value()))
        throw ShapeError("distillation: shape mismatch " + y_old.value().shape_str() + " vs " +
                         yhat_old.value().shape_str());
    DistillationTerms t;
    Var logits_live = old_disc.forward(y_old);
    Var logits_snap = old_disc.forward(yhat_old);
    t.adv = scale(mean_all(square(add_scalar(logits_live, -1.0))), 0.5);
    t.style = style_loss(enc, y_old, yhat_old);
    t.perceptual = perceptual_loss(enc, y_old, yhat_old);
    t.disc_l1 = mean_abs_diff(logits_live, logits_snap);
    t.total = add(add(t.adv, t.style), add(t.perceptual, t.disc_l1));
    return t;
}

Var distillation_loss(const Var& y_old, const Var& yhat_old, const net::PatchDiscriminator& old_disc,
                      const PerceptualEncoder& enc) {
    return distillation_terms(y_old, yhat_old, old_disc, enc).total;
}

}  // namespace mtgan::loss
