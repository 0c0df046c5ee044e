#include "mtgan/nn.hpp"

#include <cmath>

#include "mtgan/hash.hpp"

namespace mtgan::nn {

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad, PadMode mode, Rng& rng,
               bool with_bias, double init_std)
    : Conv2d(in_channels, out_channels, kernel, stride_, pad, pad, pad, pad, mode, rng, with_bias, init_std) {}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pt, int pb, int pl, int pr,
               PadMode mode, Rng& rng, bool with_bias, double init_std)
    : stride(stride_), pad_t(pt), pad_b(pb), pad_l(pl), pad_r(pr), pad_mode(mode) {
    weight = Var(Tensor::randn({out_channels, in_channels, kernel, kernel}, rng, init_std), true);
    if (with_bias) bias = Var(Tensor::zeros({out_channels}), true);
}

Var Conv2d::operator()(const Var& x) const {
    Var padded = (pad_t || pad_b || pad_l || pad_r) ? pad2d(x, pad_t, pad_b, pad_l, pad_r, pad_mode) : x;
    return conv2d(padded, weight, bias, stride);
}

void Conv2d::collect(const std::string& prefix, ParamList& out) {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

InstanceNorm2d::InstanceNorm2d(int channels) {
    gamma = Var(Tensor::full({channels}, 1.0), true);
    beta = Var(Tensor::zeros({channels}), true);
}

Var InstanceNorm2d::operator()(const Var& x) const { return instance_norm(x, gamma, beta, eps); }

void InstanceNorm2d::collect(const std::string& prefix, ParamList& out) {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

ResidualBlock::ResidualBlock(int channels, Rng& rng)
    : conv1(channels, channels, 3, 1, 1, PadMode::reflect, rng),
      conv2(channels, channels, 3, 1, 1, PadMode::reflect, rng),
      norm1(channels),
      norm2(channels) {}

Var ResidualBlock::operator()(const Var& x) const {
    Var h = relu(norm1(conv1(x)));
    h = norm2(conv2(h));
    return add(x, h);
}

void ResidualBlock::collect(const std::string& prefix, ParamList& out) {
    conv1.collect(prefix + ".conv1", out);
    norm1.collect(prefix + ".norm1", out);
    conv2.collect(prefix + ".conv2", out);
    norm2.collect(prefix + ".norm2", out);
}

Linear::Linear(int in_features, int out_features, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_features));
    weight = Var(Tensor::randn({out_features, in_features}, rng, std), true);
    bias = Var(Tensor::zeros({out_features}), true);
}

Var Linear::operator()(const Var& x) const { return linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, ParamList& out) {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

ParamMap to_param_map(const ParamList& params) {
    ParamMap map;
    for (const auto& [name, var] : params) {
        if (map.count(name)) throw RegistrationError("duplicate parameter name '" + name + "'");
        map.emplace(name, var.value());
    }
    return map;
}

void load_param_map(ParamList& params, const ParamMap& map) {
    if (map.size() != params.size())
        throw IntegrityError("parameter count mismatch: model has " + std::to_string(params.size()) +
                             ", blob has " + std::to_string(map.size()));
    for (auto& [name, var] : params) {
        auto it = map.find(name);
        if (it == map.end()) throw IntegrityError("missing parameter '" + name + "' in blob");
        if (it->second.shape() != var.value().shape())
            throw IntegrityError("shape mismatch for '" + name + "': model " + var.value().shape_str() + " vs blob " +
                                 it->second.shape_str());
        var.mutable_value() = it->second;
    }
}

void set_requires_grad(ParamList& params, bool requires_grad) {
    for (auto& [name, var] : params) var.node()->requires_grad = requires_grad;
}

std::string params_checksum(const ParamList& params) {
    Sha256 h;
    for (const auto& [name, var] : params) {
        h.update(name.data(), name.size());
        const auto& t = var.value();
        h.update(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(double));
    }
    return h.hex();
}

Adam::Adam(ParamList params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        slots_[i].m = Tensor::zeros(params_[i].second.value().shape());
        slots_[i].v = Tensor::zeros(params_[i].second.value().shape());
    }
}

void Adam::zero_grad() {
    for (auto& [name, var] : params_) var.zero_grad();
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& var = params_[i].second;
        if (!var.has_grad()) continue;
        const Tensor& g = var.grad();
        Tensor& m = slots_[i].m;
        Tensor& v = slots_[i].v;
        Tensor& w = var.mutable_value();
        for (std::int64_t j = 0; j < g.numel(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

ParamMap Adam::state() const {
    ParamMap s;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        s.emplace(params_[i].first + ".m", slots_[i].m);
        s.emplace(params_[i].first + ".v", slots_[i].v);
    }
    return s;
}

void Adam::load_state(const ParamMap& state, std::int64_t step_count) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto m = state.find(params_[i].first + ".m");
        auto v = state.find(params_[i].first + ".v");
        if (m == state.end() || v == state.end())
            throw IntegrityError("optimizer state missing entries for '" + params_[i].first + "'");
        slots_[i].m = m->second;
        slots_[i].v = v->second;
    }
    t_ = step_count;
}

}  // namespace mtgan::nn
