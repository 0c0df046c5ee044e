#include "mtgan/netarch.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <sstream>

namespace mtgan::net {

using nlohmann::json;

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "per_block") return FusionMode::per_block;
    if (s == "end_only") return FusionMode::end_only;
    throw ConfigError("unknown fusion mode '" + s + "' (per_block|end_only)");
}

std::string to_string(FusionMode m) { return m == FusionMode::per_block ? "per_block" : "end_only"; }

UpsampleMode upsample_mode_from_string(const std::string& s) {
    if (s == "nearest") return UpsampleMode::nearest;
    if (s == "bilinear") return UpsampleMode::bilinear;
    throw ConfigError("unknown upsample mode '" + s + "' (nearest|bilinear)");
}

std::string to_string(UpsampleMode m) { return m == UpsampleMode::nearest ? "nearest" : "bilinear"; }

void GeneratorConfig::validate() const {
    if (num_branches < 1 || num_branches > 4)
        throw ConfigError("num_branches must be in [1,4], got " + std::to_string(num_branches));
    if (blocks_per_branch < 1) throw ConfigError("blocks_per_branch must be >= 1");
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
}

int GeneratorConfig::branch_channels(int branch) const {
    return std::min(base_channels * 4 * (1 << branch), channel_cap());
}

std::string GeneratorConfig::to_json() const {
    json j;
    j["num_branches"] = num_branches;
    j["blocks_per_branch"] = blocks_per_branch;
    j["base_channels"] = base_channels;
    j["fusion_mode"] = to_string(fusion_mode);
    j["upsample_mode"] = to_string(upsample_mode);
    return j.dump();
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    GeneratorConfig c;
    c.num_branches = j.at("num_branches").get<int>();
    c.blocks_per_branch = j.at("blocks_per_branch").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.fusion_mode = fusion_mode_from_string(j.at("fusion_mode").get<std::string>());
    c.upsample_mode = upsample_mode_from_string(j.at("upsample_mode").get<std::string>());
    c.validate();
    return c;
}

FeatureMap fuse(const FeatureMap& f_s, const FeatureMap& f_l, const nn::Conv2d& conv1x1, UpsampleMode mode) {
    if (f_s.scale != 2 * f_l.scale)
        throw ShapeError("fuse: scales must be adjacent (got " + std::to_string(f_s.scale) + "x vs " +
                         std::to_string(f_l.scale) + "x)");
    Var up = upsample2x(f_s.values, mode);
    const auto& us = up.value().shape();
    const auto& ls = f_l.values.value().shape();
    if (us[2] != ls[2] || us[3] != ls[3])
        throw ShapeError("fuse: upsampled small-scale map " + up.value().shape_str() +
                         " does not match large-scale map " + f_l.values.value().shape_str());
    Var out = conv1x1(concat_channels(up, f_l.values));
    if (out.value().shape()[1] != ls[1])
        throw ShapeError("fuse: 1x1 conv must restore " + std::to_string(ls[1]) + " channels, produced " +
                         std::to_string(out.value().shape()[1]));
    return FeatureMap{out, f_l.scale};
}

Generator::Generator(GeneratorConfig config, const std::vector<std::string>& categories, Rng& rng)
    : config_(std::move(config)) {
    config_.validate();
    if (categories.empty()) throw ConfigError("generator needs at least one category");

    const int b = config_.base_channels;
    stem_ = nn::Conv2d(3, b, 7, 1, 3, PadMode::reflect, rng);
    stem_norm_ = nn::InstanceNorm2d(b);

    // down0 reaches /2; each further stage supplies one branch tap.
    int ch = b;
    const int n_downs = 1 + config_.num_branches;
    for (int i = 0; i < n_downs; ++i) {
        const int next = std::min(ch * 2, config_.channel_cap());
        downs_.emplace_back(ch, next, 3, 2, 1, PadMode::reflect, rng);
        down_norms_.emplace_back(next);
        ch = next;
    }

    chains_.resize(static_cast<std::size_t>(config_.num_branches));
    for (int i = 0; i < config_.num_branches; ++i) {
        const int bc = config_.branch_channels(i);
        for (int k = 0; k < config_.blocks_per_branch; ++k) chains_[i].emplace_back(bc, rng);
    }

    // One fusion conv per adjacent pair and, in per_block mode, per block.
    const int pair_count = config_.num_branches - 1;
    const int per_pair = config_.fusion_mode == FusionMode::per_block ? config_.blocks_per_branch : 1;
    fusions_.resize(static_cast<std::size_t>(pair_count));
    for (int p = 0; p < pair_count; ++p) {
        const int cl = config_.branch_channels(p);
        const int cs = config_.branch_channels(p + 1);
        for (int k = 0; k < per_pair; ++k)
            fusions_[p].emplace_back(cs + cl, cl, 1, 1, 0, PadMode::zero, rng);
    }

    for (const auto& cat : categories) add_decoder(cat, rng);
}

void Generator::add_decoder(const std::string& category, Rng& rng) {
    if (category.empty()) throw ConfigError("empty category name");
    if (decoders_.count(category)) throw RegistrationError("category '" + category + "' already has a decoder");
    const int b = config_.base_channels;
    Decoder d;
    const int chans[4] = {config_.branch_channels(0), 2 * b, b, b};
    for (int j = 0; j < 3; ++j) {
        d.up_convs.emplace_back(chans[j], chans[j + 1], 3, 1, 1, PadMode::reflect, rng);
        d.up_norms.emplace_back(chans[j + 1]);
    }
    d.out_conv = nn::Conv2d(b, 3, 7, 1, 3, PadMode::reflect, rng);
    decoders_.emplace(category, std::move(d));
    categories_.push_back(category);
}

bool Generator::has_category(const std::string& category) const { return decoders_.count(category) > 0; }

Var Generator::decode(const Var& feature, const Decoder& d) const {
    Var h = feature;
    for (std::size_t j = 0; j < d.up_convs.size(); ++j)
        h = relu(d.up_norms[j](d.up_convs[j](upsample2x(h, config_.upsample_mode))));
    return tanh_op(d.out_conv(h));
}

Var Generator::forward(const Var& image, const std::string& category) const {
    const auto& s = image.value().shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError("generator expects Nx3xHxW, got " + image.value().shape_str());
    const int div = config_.input_divisor();
    if (s[2] % div != 0 || s[3] % div != 0 || s[2] < div || s[3] < div)
        throw ShapeError("generator input " + image.value().shape_str() + " must have sides divisible by " +
                         std::to_string(div) + " (" + std::to_string(config_.num_branches) + " branches)");
    auto it = decoders_.find(category);
    if (it == decoders_.end()) throw LookupError("no decoder for category '" + category + "'");

    Var h = relu(stem_norm_(stem_(image)));
    std::vector<FeatureMap> states;
    int rate = 1;
    for (std::size_t i = 0; i < downs_.size(); ++i) {
        h = relu(down_norms_[i](downs_[i](h)));
        rate *= 2;
        if (i >= 1) states.push_back(FeatureMap{h, rate});
    }

    const int nb = config_.num_branches;
    if (config_.fusion_mode == FusionMode::per_block) {
        for (int k = 0; k < config_.blocks_per_branch; ++k) {
            for (int i = 0; i < nb; ++i) states[i].values = chains_[i][static_cast<std::size_t>(k)](states[i].values);
            for (int i = nb - 2; i >= 0; --i)
                states[i] = fuse(states[i + 1], states[i], fusions_[i][static_cast<std::size_t>(k)],
                                 config_.upsample_mode);
        }
    } else {
        for (int i = 0; i < nb; ++i)
            for (int k = 0; k < config_.blocks_per_branch; ++k)
                states[i].values = chains_[i][static_cast<std::size_t>(k)](states[i].values);
        for (int i = nb - 2; i >= 0; --i)
            states[i] = fuse(states[i + 1], states[i], fusions_[i][0], config_.upsample_mode);
    }

    return decode(states[0].values, it->second);
}

nn::ParamList Generator::trunk_parameters() {
    nn::ParamList out;
    stem_.collect("trunk.stem", out);
    stem_norm_.collect("trunk.stem_norm", out);
    for (std::size_t i = 0; i < downs_.size(); ++i) {
        downs_[i].collect("trunk.down" + std::to_string(i), out);
        down_norms_[i].collect("trunk.down" + std::to_string(i) + "_norm", out);
    }
    for (std::size_t i = 0; i < chains_.size(); ++i)
        for (std::size_t k = 0; k < chains_[i].size(); ++k)
            chains_[i][k].collect("trunk.branch" + std::to_string(i) + ".block" + std::to_string(k), out);
    for (std::size_t p = 0; p < fusions_.size(); ++p)
        for (std::size_t k = 0; k < fusions_[p].size(); ++k)
            fusions_[p][k].collect("trunk.fuse" + std::to_string(p + 1) + "to" + std::to_string(p) + "." +
                                       (config_.fusion_mode == FusionMode::per_block ? "block" + std::to_string(k) : "end"),
                                   out);
    return out;
}

nn::ParamList Generator::decoder_parameters(const std::string& category) {
    auto it = decoders_.find(category);
    if (it == decoders_.end()) throw LookupError("no decoder for category '" + category + "'");
    nn::ParamList out;
    const std::string prefix = "decoder." + category;
    for (std::size_t j = 0; j < it->second.up_convs.size(); ++j) {
        it->second.up_convs[j].collect(prefix + ".up" + std::to_string(j), out);
        it->second.up_norms[j].collect(prefix + ".up" + std::to_string(j) + "_norm", out);
    }
    it->second.out_conv.collect(prefix + ".out", out);
    return out;
}

nn::ParamList Generator::parameters() {
    nn::ParamList out = trunk_parameters();
    for (const auto& cat : categories_) {
        auto d = decoder_parameters(cat);
        out.insert(out.end(), d.begin(), d.end());
    }
    return out;
}

nn::ParamMap Generator::state() const { return nn::to_param_map(const_cast<Generator*>(this)->parameters()); }

void Generator::load_state(const nn::ParamMap& map) {
    auto params = parameters();
    nn::load_param_map(params, map);
}

Generator Generator::clone() const {
    Rng rng(0);
    Generator copy(config_, categories_, rng);
    copy.load_state(state());
    return copy;
}

std::string Generator::layer_table() const {
    std::ostringstream os;
    const int b = config_.base_channels;
    os << "generator layer table (base=" << b << ", cap=" << config_.channel_cap() << ")\n";
    os << "stem: conv7x7 s1 3->" << b << " reflect3 + IN + ReLU (x1)\n";
    int ch = b, rate = 1;
    for (std::size_t i = 0; i < downs_.size(); ++i) {
        const int next = downs_[i].out_channels();
        rate *= 2;
        os << "down" << i << ": conv3x3 s2 " << ch << "->" << next << " reflect1 + IN + ReLU (x" << rate << ")";
        if (i >= 1) os << "  [branch " << i - 1 << " tap, rate " << (4 << (i - 1)) << "x]";
        os << "\n";
        ch = next;
    }
    for (int i = 0; i < config_.num_branches; ++i)
        os << "branch" << i << ": " << config_.blocks_per_branch << " x resblock(" << config_.branch_channels(i)
           << ") [conv3x3+IN+ReLU+conv3x3+IN, skip] at " << (4 << i) << "x\n";
    for (std::size_t p = 0; p < fusions_.size(); ++p)
        os << "fuse" << p + 1 << "->" << p << ": up2x(" << to_string(config_.upsample_mode) << ") + concat + conv1x1 "
           << config_.branch_channels(static_cast<int>(p) + 1) + config_.branch_channels(static_cast<int>(p)) << "->"
           << config_.branch_channels(static_cast<int>(p)) << " ("
           << (config_.fusion_mode == FusionMode::per_block ? "per block" : "end only") << ")\n";
    const int chans[4] = {config_.branch_channels(0), 2 * b, b, b};
    for (int j = 0; j < 3; ++j)
        os << "decoder.up" << j << ": up2x + conv3x3 " << chans[j] << "->" << chans[j + 1] << " reflect1 + IN + ReLU\n";
    os << "decoder.out: conv7x7 " << b << "->3 reflect3 + tanh\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// PatchDiscriminator
// ---------------------------------------------------------------------------

PatchDiscriminator::PatchDiscriminator(int base_channels, Rng& rng) : base_channels_(base_channels) {
    if (base_channels < 1) throw ConfigError("discriminator base_channels must be >= 1");
    const int d = base_channels;
    const int cap = 8 * d;
    // 4 stride-2 stages, then a stride-1 stage and the 1-channel logit conv.
    int chans[kLayers + 1] = {3, d, 2 * d, 4 * d, std::min(8 * d, cap), std::min(8 * d, cap), 1};
    for (int l = 0; l < kLayers; ++l) {
        const bool stride2 = l < 4;
        if (stride2)
            convs_.emplace_back(chans[l], chans[l + 1], 4, 2, 1, PadMode::zero, rng);
        else
            // k=4 stride-1 with (1,2,1,2) padding keeps the spatial size.
            convs_.emplace_back(chans[l], chans[l + 1], 4, 1, 1, 2, 1, 2, PadMode::zero, rng);
    }
    for (int l = 1; l < kLayers - 1; ++l) norms_.emplace_back(convs_[static_cast<std::size_t>(l)].out_channels());
}

Var PatchDiscriminator::forward(const Var& image) const {
    const auto& s = image.value().shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError("discriminator expects Nx3xHxW, got " + image.value().shape_str());
    if (s[2] < kMinInputSide || s[3] < kMinInputSide)
        throw ShapeError("discriminator input " + image.value().shape_str() + " below minimum side " +
                         std::to_string(kMinInputSide));
    Var h = leaky_relu(convs_[0](image), 0.2);
    for (int l = 1; l < kLayers - 1; ++l)
        h = leaky_relu(norms_[static_cast<std::size_t>(l - 1)](convs_[static_cast<std::size_t>(l)](h)), 0.2);
    return convs_[kLayers - 1](h);
}

nn::ParamList PatchDiscriminator::parameters() {
    nn::ParamList out;
    for (std::size_t l = 0; l < convs_.size(); ++l) convs_[l].collect("disc.l" + std::to_string(l), out);
    for (std::size_t l = 0; l < norms_.size(); ++l) norms_[l].collect("disc.l" + std::to_string(l + 1) + "_norm", out);
    return out;
}

nn::ParamMap PatchDiscriminator::state() const {
    return nn::to_param_map(const_cast<PatchDiscriminator*>(this)->parameters());
}

void PatchDiscriminator::load_state(const nn::ParamMap& map) {
    auto params = parameters();
    nn::load_param_map(params, map);
}

PatchDiscriminator PatchDiscriminator::clone() const {
    Rng rng(0);
    PatchDiscriminator copy(base_channels_, rng);
    copy.load_state(state());
    return copy;
}

}  // namespace mtgan::net
