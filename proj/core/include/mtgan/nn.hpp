#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtgan/autograd.hpp"

namespace mtgan::nn {

using ParamList = std::vector<std::pair<std::string, Var>>;
using ParamMap = std::map<std::string, Tensor>;

// Convolution with optional built-in padding. Weights are created through
// init_* helpers so construction order fully determines the random stream.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, PadMode pad_mode, Rng& rng,
           bool bias = true, double init_std = 0.02);
    // Asymmetric padding (top,bottom,left,right), used by size-preserving k=4 stride-1 layers.
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad_t, int pad_b, int pad_l, int pad_r,
           PadMode pad_mode, Rng& rng, bool bias = true, double init_std = 0.02);

    Var operator()(const Var& x) const;
    void collect(const std::string& prefix, ParamList& out);
    int out_channels() const { return static_cast<int>(weight.value().shape()[0]); }
    int in_channels() const { return static_cast<int>(weight.value().shape()[1]); }

    Var weight, bias;
    int stride = 1;
    int pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;
    PadMode pad_mode = PadMode::zero;
};

class InstanceNorm2d {
public:
    InstanceNorm2d() = default;
    explicit InstanceNorm2d(int channels);
    Var operator()(const Var& x) const;
    void collect(const std::string& prefix, ParamList& out);

    Var gamma, beta;
    double eps = 1e-5;
};

// conv3x3 -> IN -> ReLU -> conv3x3 -> IN, additive skip. Reflection padding.
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(int channels, Rng& rng);
    Var operator()(const Var& x) const;
    void collect(const std::string& prefix, ParamList& out);

    Conv2d conv1, conv2;
    InstanceNorm2d norm1, norm2;
};

class Linear {
public:
    Linear() = default;
    Linear(int in_features, int out_features, Rng& rng);
    Var operator()(const Var& x) const;
    void collect(const std::string& prefix, ParamList& out);

    Var weight, bias;
};

// Parameter set helpers shared by models and checkpoints.
ParamMap to_param_map(const ParamList& params);
void load_param_map(ParamList& params, const ParamMap& map);  // strict: every name must match
void set_requires_grad(ParamList& params, bool requires_grad);
std::string params_checksum(const ParamList& params);  // sha256 over names + raw bytes

// Adam with externally supplied per-step learning rate (the schedule lives
// in the trainer). State is keyed by parameter name for serialization.
class Adam {
public:
    struct Slot {
        Tensor m, v;
    };

    Adam() = default;
    Adam(ParamList params, double beta1, double beta2, double eps = 1e-8);

    void zero_grad();
    void step(double lr);

    const ParamList& params() const { return params_; }
    std::int64_t step_count() const { return t_; }

    // Serialization: "<name>.m" / "<name>.v" entries plus the step counter.
    ParamMap state() const;
    void load_state(const ParamMap& state, std::int64_t step_count);

private:
    ParamList params_;
    std::vector<Slot> slots_;
    double beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
};

}  // namespace mtgan::nn
