#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mtgan/tensor.hpp"

namespace mtgan {

// Reverse-mode autodiff over Tensor. Ops build a tape when grad mode is on;
// Var::backward() runs the tape in reverse topological order. Gradients
// accumulate on every node that requires grad, so parameters keep their
// grads across backward calls until zero_grad().
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::string name;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Tensor& g);
    void accumulate_from(Tensor&& g);
    void clear_grad();
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false, std::string name = "");

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const;
    bool has_grad() const { return node_ && node_->has_grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::string& name() const { return node_->name; }
    double item() const;

    void zero_grad() { if (node_) node_->clear_grad(); }
    Var detach() const;           // copies the value into a fresh non-grad leaf
    void backward() const;        // from a scalar (numel == 1)

    std::shared_ptr<Node> node() const { return node_; }
    static Var from_node(std::shared_ptr<Node> n);

private:
    std::shared_ptr<Node> node_;
};

// Grad mode is a thread-local toggle; NoGradGuard disables tape recording
// for its scope (inference, snapshots, probes).
bool grad_enabled();
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

enum class PadMode { zero, reflect };
enum class UpsampleMode { nearest, bilinear };

// Elementwise / scalar ops
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double negative_slope);
Var tanh_op(const Var& a);
Var abs_op(const Var& a);
Var square(const Var& a);

// Reductions (result shape {1})
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// Convenience compositions
Var mse(const Var& a, const Var& b);        // mean((a-b)^2)
Var mean_abs_diff(const Var& a, const Var& b);

// NCHW spatial ops
Var pad2d(const Var& x, int top, int bottom, int left, int right, PadMode mode);
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride);  // valid conv
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var upsample2x(const Var& x, UpsampleMode mode);
Var concat_channels(const Var& a, const Var& b);
Var global_avg_pool(const Var& x);          // N,C,H,W -> N,C
Var avg_pool2x(const Var& x);               // N,C,H,W -> N,C,H/2,W/2

// Style statistics: per-sample Gram matrix F F^T / (C*H*W), N,C,H,W -> N,C,C
Var gram(const Var& features);

// Dense ops for the classifier extractor head
Var linear(const Var& x, const Var& weight, const Var& bias);  // x: N,D  w: K,D  b: K
Var cross_entropy(const Var& logits, const std::vector<int>& labels);

}  // namespace mtgan
