#include "mtgan/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mtgan {

namespace {

thread_local int g_no_grad_depth = 0;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

}  // namespace

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void Node::accumulate(const Tensor& g) {
    if (!has_grad) {
        grad = g;
        has_grad = true;
    } else {
        grad.add_(g);
    }
}

void Node::accumulate_from(Tensor&& g) {
    if (!has_grad) {
        grad = std::move(g);
        has_grad = true;
    } else {
        grad.add_(g);
    }
}

void Node::clear_grad() {
    grad = Tensor();
    has_grad = false;
}

Var::Var(Tensor value, bool requires_grad, std::string name) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
}

Var Var::from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

const Tensor& Var::grad() const {
    if (!node_ || !node_->has_grad) throw PreconditionError("grad accessed before backward on '" + (node_ ? node_->name : "?") + "'");
    return node_->grad;
}

double Var::item() const {
    if (value().numel() != 1) throw ShapeError("item() on non-scalar " + value().shape_str());
    return value()[0];
}

Var Var::detach() const {
    Var v(node_->value, false, node_->name.empty() ? "" : node_->name + ".detached");
    return v;
}

void Var::backward() const {
    if (!node_) throw PreconditionError("backward on undefined Var");
    if (node_->value.numel() != 1) throw ShapeError("backward requires a scalar, got " + node_->value.shape_str());
    if (!node_->requires_grad) throw PreconditionError("backward on a graph with no grad-requiring inputs");

    // Iterative post-order over parents, then replay reversed.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->accumulate(Tensor::full({1}, 1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad) n->backward_fn(*n);
    }
}

namespace {

// Builds the output node; records the tape only when grad mode is on and
// some input requires grad.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
    auto out = std::make_shared<Node>();
    out->value = std::move(value);
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& in : inputs)
            if (in.defined() && in.requires_grad()) { needs = true; break; }
    }
    if (needs) {
        out->requires_grad = true;
        out->parents.reserve(inputs.size());
        for (const auto& in : inputs) out->parents.push_back(in.node());
        out->backward_fn = std::move(backward_fn);
    }
    return Var::from_node(std::move(out));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " + b.value().shape_str());
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a.value();
    out.add_(b.value());
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a.value();
    out.add_scaled_(b.value(), -1.0);
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            Tensor g = n.grad;
            g.scale_(-1.0);
            n.parents[1]->accumulate_from(std::move(g));
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor g = n.grad;
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= bv[i];
            n.parents[0]->accumulate_from(std::move(g));
        }
        if (n.parents[1]->requires_grad) {
            Tensor g = n.grad;
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= av[i];
            n.parents[1]->accumulate_from(std::move(g));
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    out.scale_(s);
    return make_op(std::move(out), {a}, [s](Node& n) {
        Tensor g = n.grad;
        g.scale_(s);
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += s;
    return make_op(std::move(out), {a}, [](Node& n) { n.parents[0]->accumulate(n.grad); });
}

Var relu(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return make_op(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Tensor g = n.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x[i] <= 0.0) g[i] = 0.0;
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var leaky_relu(const Var& a, double negative_slope) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        if (out[i] < 0.0) out[i] *= negative_slope;
    return make_op(std::move(out), {a}, [negative_slope](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Tensor g = n.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x[i] < 0.0) g[i] *= negative_slope;
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var tanh_op(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    Tensor y = out;  // saved activation
    return make_op(std::move(out), {a}, [y = std::move(y)](Node& n) {
        Tensor g = n.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= 1.0 - y[i] * y[i];
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var abs_op(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
    return make_op(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Tensor g = n.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i)
            g[i] *= (x[i] > 0.0) ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var square(const Var& a) {
    Tensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= out[i];
    return make_op(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Tensor g = n.grad;
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= 2.0 * x[i];
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var sum_all(const Var& a) {
    return make_op(Tensor::scalar(a.value().sum()), {a}, [](Node& n) {
        Tensor g = Tensor::full(n.parents[0]->value.shape(), n.grad[0]);
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var mean_all(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a.value().numel());
    return make_op(Tensor::scalar(a.value().sum() * inv), {a}, [inv](Node& n) {
        Tensor g = Tensor::full(n.parents[0]->value.shape(), n.grad[0] * inv);
        n.parents[0]->accumulate_from(std::move(g));
    });
}

Var mse(const Var& a, const Var& b) { return mean_all(square(sub(a, b))); }
Var mean_abs_diff(const Var& a, const Var& b) { return mean_all(abs_op(sub(a, b))); }

// ---------------------------------------------------------------------------
// Spatial ops
// ---------------------------------------------------------------------------

namespace {

inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    // np.pad 'reflect': no edge duplication. Valid while pad < n.
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

void require_nchw(const Var& x, const char* op) {
    if (x.value().dim() != 4) throw ShapeError(std::string(op) + ": expected NCHW tensor, got " + x.value().shape_str());
}

}  // namespace

Var pad2d(const Var& x, int top, int bottom, int left, int right, PadMode mode) {
    require_nchw(x, "pad2d");
    const auto& s = x.value().shape();
    const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
    if (mode == PadMode::reflect && (top >= H || bottom >= H || left >= W || right >= W))
        throw ShapeError("pad2d: reflect padding " + std::to_string(std::max({top, bottom, left, right})) +
                         " too large for " + x.value().shape_str());
    const std::int64_t OH = H + top + bottom, OW = W + left + right;
    Tensor out({N, C, OH, OW});
    const Tensor& in = x.value();
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t oh = 0; oh < OH; ++oh) {
                std::int64_t ih = oh - top;
                if (mode == PadMode::reflect) ih = reflect_index(ih, H);
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    std::int64_t iw = ow - left;
                    if (mode == PadMode::reflect) iw = reflect_index(iw, W);
                    double v = 0.0;
                    if (ih >= 0 && ih < H && iw >= 0 && iw < W) v = in.at4(n, c, ih, iw);
                    out.at4(n, c, oh, ow) = v;
                }
            }
    return make_op(std::move(out), {x}, [top, left, mode, H, W](Node& n) {
        const auto& os = n.grad.shape();
        Tensor gx(n.parents[0]->value.shape());
        for (std::int64_t b = 0; b < os[0]; ++b)
            for (std::int64_t c = 0; c < os[1]; ++c)
                for (std::int64_t oh = 0; oh < os[2]; ++oh) {
                    std::int64_t ih = oh - top;
                    if (mode == PadMode::reflect) ih = reflect_index(ih, H);
                    if (ih < 0 || ih >= H) continue;
                    for (std::int64_t ow = 0; ow < os[3]; ++ow) {
                        std::int64_t iw = ow - left;
                        if (mode == PadMode::reflect) iw = reflect_index(iw, W);
                        if (iw < 0 || iw >= W) continue;
                        gx.at4(b, c, ih, iw) += n.grad.at4(b, c, oh, ow);
                    }
                }
        n.parents[0]->accumulate_from(std::move(gx));
    });
}

namespace {

// col layout: (C*KH*KW) x (OH*OW), row-major.
void im2col(const Tensor& x, std::int64_t n, std::int64_t KH, std::int64_t KW, std::int64_t stride,
            std::int64_t OH, std::int64_t OW, std::vector<double>& col) {
    const auto& s = x.shape();
    const std::int64_t C = s[1], H = s[2], W = s[3];
    const double* base = x.data() + n * C * H * W;
    double* out = col.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t kh = 0; kh < KH; ++kh)
            for (std::int64_t kw = 0; kw < KW; ++kw) {
                const double* src = base + c * H * W + kh * W + kw;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const double* row = src + oh * stride * W;
                    for (std::int64_t ow = 0; ow < OW; ++ow) *out++ = row[ow * stride];
                }
            }
}

void col2im_add(const std::vector<double>& col, std::int64_t n, std::int64_t KH, std::int64_t KW,
                std::int64_t stride, std::int64_t OH, std::int64_t OW, Tensor& gx) {
    const auto& s = gx.shape();
    const std::int64_t C = s[1], H = s[2], W = s[3];
    double* base = gx.data() + n * C * H * W;
    const double* in = col.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t kh = 0; kh < KH; ++kh)
            for (std::int64_t kw = 0; kw < KW; ++kw) {
                double* dst = base + c * H * W + kh * W + kw;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    double* row = dst + oh * stride * W;
                    for (std::int64_t ow = 0; ow < OW; ++ow) row[ow * stride] += *in++;
                }
            }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride) {
    init_threading();
    require_nchw(x, "conv2d");
    const auto& xs = x.value().shape();
    const auto& ws = weight.value().shape();
    if (ws.size() != 4) throw ShapeError("conv2d: weight must be FxCxKHxKW, got " + weight.value().shape_str());
    const std::int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const std::int64_t F = ws[0], KH = ws[2], KW = ws[3];
    if (ws[1] != C)
        throw ShapeError("conv2d: input channels " + std::to_string(C) + " != weight channels " + std::to_string(ws[1]));
    if (H < KH || W < KW)
        throw ShapeError("conv2d: input " + x.value().shape_str() + " smaller than kernel " + weight.value().shape_str());
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    const std::int64_t OH = (H - KH) / stride + 1;
    const std::int64_t OW = (W - KW) / stride + 1;
    const std::int64_t K = C * KH * KW;

    Tensor out({N, F, OH, OW});
    std::vector<double> col(static_cast<std::size_t>(K * OH * OW));
    CMapRM Wm(weight.value().data(), F, K);
    for (std::int64_t n = 0; n < N; ++n) {
        im2col(x.value(), n, KH, KW, stride, OH, OW, col);
        CMapRM colm(col.data(), K, OH * OW);
        MapRM outm(out.data() + n * F * OH * OW, F, OH * OW);
        outm.noalias() = Wm * colm;
        if (bias.defined()) {
            const Tensor& b = bias.value();
            for (std::int64_t f = 0; f < F; ++f)
                outm.row(f).array() += b[f];
        }
    }

    std::vector<Var> inputs = bias.defined() ? std::vector<Var>{x, weight, bias} : std::vector<Var>{x, weight};
    const int st = stride;
    return make_op(std::move(out), std::move(inputs), [st, KH, KW, OH, OW, K, F](Node& n) {
        Node& xn = *n.parents[0];
        Node& wn = *n.parents[1];
        Node* bn = n.parents.size() > 2 ? n.parents[2].get() : nullptr;
        const std::int64_t N = xn.value.shape()[0];

        Tensor gx, gw, gb;
        if (xn.requires_grad) gx = Tensor(xn.value.shape());
        if (wn.requires_grad) gw = Tensor(wn.value.shape());
        if (bn && bn->requires_grad) gb = Tensor(bn->value.shape());

        std::vector<double> col(static_cast<std::size_t>(K * OH * OW));
        std::vector<double> gcol(static_cast<std::size_t>(K * OH * OW));
        CMapRM Wm(wn.value.data(), F, K);
        for (std::int64_t b = 0; b < N; ++b) {
            CMapRM goutm(n.grad.data() + b * F * OH * OW, F, OH * OW);
            if (wn.requires_grad || xn.requires_grad) im2col(xn.value, b, KH, KW, st, OH, OW, col);
            if (wn.requires_grad) {
                CMapRM colm(col.data(), K, OH * OW);
                MapRM gWm(gw.data(), F, K);
                gWm.noalias() += goutm * colm.transpose();
            }
            if (xn.requires_grad) {
                MapRM gcolm(gcol.data(), K, OH * OW);
                gcolm.noalias() = Wm.transpose() * goutm;
                col2im_add(gcol, b, KH, KW, st, OH, OW, gx);
            }
            if (bn && bn->requires_grad)
                for (std::int64_t f = 0; f < F; ++f) gb[f] += goutm.row(f).sum();
        }
        if (xn.requires_grad) xn.accumulate_from(std::move(gx));
        if (wn.requires_grad) wn.accumulate_from(std::move(gw));
        if (bn && bn->requires_grad) bn->accumulate_from(std::move(gb));
    });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    require_nchw(x, "instance_norm");
    const auto& s = x.value().shape();
    const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
    if (gamma.value().numel() != C || beta.value().numel() != C)
        throw ShapeError("instance_norm: affine parameters must have C=" + std::to_string(C) + " entries");

    Tensor out(s);
    Tensor mean({N, C}), invstd({N, C});
    const double* in = x.value().data();
    double* o = out.data();
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double* p = in + (n * C + c) * HW;
            double m = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) m += p[i];
            m /= static_cast<double>(HW);
            double v = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) {
                const double d = p[i] - m;
                v += d * d;
            }
            v /= static_cast<double>(HW);
            const double is = 1.0 / std::sqrt(v + eps);
            mean[n * C + c] = m;
            invstd[n * C + c] = is;
            const double g = gamma.value()[c], b = beta.value()[c];
            double* q = o + (n * C + c) * HW;
            for (std::int64_t i = 0; i < HW; ++i) q[i] = (p[i] - m) * is * g + b;
        }

    return make_op(std::move(out), {x, gamma, beta},
                   [mean = std::move(mean), invstd = std::move(invstd), HW](Node& n) {
        Node& xn = *n.parents[0];
        Node& gn = *n.parents[1];
        Node& bn = *n.parents[2];
        const auto& s = xn.value.shape();
        const std::int64_t N = s[0], C = s[1];
        Tensor gx, gg, gb;
        if (xn.requires_grad) gx = Tensor(s);
        if (gn.requires_grad) gg = Tensor(gn.value.shape());
        if (bn.requires_grad) gb = Tensor(bn.value.shape());
        const double invHW = 1.0 / static_cast<double>(HW);
        for (std::int64_t b = 0; b < N; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                const double m = mean[b * C + c], is = invstd[b * C + c];
                const double gamma_c = gn.value[c];
                const double* xp = xn.value.data() + (b * C + c) * HW;
                const double* gp = n.grad.data() + (b * C + c) * HW;
                double sum_g = 0.0, sum_gy = 0.0;
                for (std::int64_t i = 0; i < HW; ++i) {
                    const double y = (xp[i] - m) * is;
                    sum_g += gp[i];
                    sum_gy += gp[i] * y;
                }
                if (gn.requires_grad) gg[c] += sum_gy;
                if (bn.requires_grad) gb[c] += sum_g;
                if (xn.requires_grad) {
                    double* q = gx.data() + (b * C + c) * HW;
                    const double mg = sum_g * invHW, mgy = sum_gy * invHW;
                    for (std::int64_t i = 0; i < HW; ++i) {
                        const double y = (xp[i] - m) * is;
                        q[i] = gamma_c * is * (gp[i] - mg - y * mgy);
                    }
                }
            }
        if (xn.requires_grad) xn.accumulate_from(std::move(gx));
        if (gn.requires_grad) gn.accumulate_from(std::move(gg));
        if (bn.requires_grad) bn.accumulate_from(std::move(gb));
    });
}

Var upsample2x(const Var& x, UpsampleMode mode) {
    require_nchw(x, "upsample2x");
    const auto& s = x.value().shape();
    const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
    Tensor out({N, C, 2 * H, 2 * W});
    const Tensor& in = x.value();
    if (mode == UpsampleMode::nearest) {
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t h = 0; h < H; ++h)
                    for (std::int64_t w = 0; w < W; ++w) {
                        const double v = in.at4(n, c, h, w);
                        out.at4(n, c, 2 * h, 2 * w) = v;
                        out.at4(n, c, 2 * h, 2 * w + 1) = v;
                        out.at4(n, c, 2 * h + 1, 2 * w) = v;
                        out.at4(n, c, 2 * h + 1, 2 * w + 1) = v;
                    }
        return make_op(std::move(out), {x}, [](Node& n) {
            const auto& is = n.parents[0]->value.shape();
            Tensor gx(is);
            for (std::int64_t b = 0; b < is[0]; ++b)
                for (std::int64_t c = 0; c < is[1]; ++c)
                    for (std::int64_t h = 0; h < is[2]; ++h)
                        for (std::int64_t w = 0; w < is[3]; ++w)
                            gx.at4(b, c, h, w) = n.grad.at4(b, c, 2 * h, 2 * w) + n.grad.at4(b, c, 2 * h, 2 * w + 1) +
                                                 n.grad.at4(b, c, 2 * h + 1, 2 * w) + n.grad.at4(b, c, 2 * h + 1, 2 * w + 1);
            n.parents[0]->accumulate_from(std::move(gx));
        });
    }

    // Bilinear, align_corners=false: src = (dst + 0.5)/2 - 0.5.
    auto taps = [](std::int64_t dst, std::int64_t n, std::int64_t& i0, std::int64_t& i1, double& w1) {
        const double src = (static_cast<double>(dst) + 0.5) * 0.5 - 0.5;
        const double f = std::floor(src);
        i0 = std::clamp(static_cast<std::int64_t>(f), std::int64_t{0}, n - 1);
        i1 = std::clamp(i0 + 1, std::int64_t{0}, n - 1);
        w1 = std::clamp(src - f, 0.0, 1.0);
        if (src < 0.0) w1 = 0.0;
    };
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t oh = 0; oh < 2 * H; ++oh) {
                std::int64_t h0, h1;
                double wh1;
                taps(oh, H, h0, h1, wh1);
                for (std::int64_t ow = 0; ow < 2 * W; ++ow) {
                    std::int64_t w0, w1i;
                    double ww1;
                    taps(ow, W, w0, w1i, ww1);
                    out.at4(n, c, oh, ow) = (1 - wh1) * ((1 - ww1) * in.at4(n, c, h0, w0) + ww1 * in.at4(n, c, h0, w1i)) +
                                            wh1 * ((1 - ww1) * in.at4(n, c, h1, w0) + ww1 * in.at4(n, c, h1, w1i));
                }
            }
    return make_op(std::move(out), {x}, [taps](Node& n) {
        const auto& is = n.parents[0]->value.shape();
        const std::int64_t H = is[2], W = is[3];
        Tensor gx(is);
        for (std::int64_t b = 0; b < is[0]; ++b)
            for (std::int64_t c = 0; c < is[1]; ++c)
                for (std::int64_t oh = 0; oh < 2 * H; ++oh) {
                    std::int64_t h0, h1;
                    double wh1;
                    taps(oh, H, h0, h1, wh1);
                    for (std::int64_t ow = 0; ow < 2 * W; ++ow) {
                        std::int64_t w0, w1i;
                        double ww1;
                        taps(ow, W, w0, w1i, ww1);
                        const double g = n.grad.at4(b, c, oh, ow);
                        gx.at4(b, c, h0, w0) += (1 - wh1) * (1 - ww1) * g;
                        gx.at4(b, c, h0, w1i) += (1 - wh1) * ww1 * g;
                        gx.at4(b, c, h1, w0) += wh1 * (1 - ww1) * g;
                        gx.at4(b, c, h1, w1i) += wh1 * ww1 * g;
                    }
                }
        n.parents[0]->accumulate_from(std::move(gx));
    });
}

Var concat_channels(const Var& a, const Var& b) {
    require_nchw(a, "concat_channels");
    require_nchw(b, "concat_channels");
    const auto& as = a.value().shape();
    const auto& bs = b.value().shape();
    if (as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
        throw ShapeError("concat_channels: incompatible " + a.value().shape_str() + " vs " + b.value().shape_str());
    const std::int64_t N = as[0], Ca = as[1], Cb = bs[1], H = as[2], W = as[3];
    Tensor out({N, Ca + Cb, H, W});
    const std::int64_t plane = H * W;
    for (std::int64_t n = 0; n < N; ++n) {
        std::copy_n(a.value().data() + n * Ca * plane, Ca * plane, out.data() + n * (Ca + Cb) * plane);
        std::copy_n(b.value().data() + n * Cb * plane, Cb * plane, out.data() + (n * (Ca + Cb) + Ca) * plane);
    }
    return make_op(std::move(out), {a, b}, [Ca, Cb, plane](Node& n) {
        const std::int64_t N = n.grad.shape()[0];
        if (n.parents[0]->requires_grad) {
            Tensor ga(n.parents[0]->value.shape());
            for (std::int64_t b = 0; b < N; ++b)
                std::copy_n(n.grad.data() + b * (Ca + Cb) * plane, Ca * plane, ga.data() + b * Ca * plane);
            n.parents[0]->accumulate_from(std::move(ga));
        }
        if (n.parents[1]->requires_grad) {
            Tensor gb(n.parents[1]->value.shape());
            for (std::int64_t b = 0; b < N; ++b)
                std::copy_n(n.grad.data() + (b * (Ca + Cb) + Ca) * plane, Cb * plane, gb.data() + b * Cb * plane);
            n.parents[1]->accumulate_from(std::move(gb));
        }
    });
}

Var global_avg_pool(const Var& x) {
    require_nchw(x, "global_avg_pool");
    const auto& s = x.value().shape();
    const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
    Tensor out({N, C});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c) {
            const double* p = x.value().data() + (n * C + c) * HW;
            double sum = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) sum += p[i];
            out[n * C + c] = sum / static_cast<double>(HW);
        }
    return make_op(std::move(out), {x}, [HW](Node& n) {
        Tensor gx(n.parents[0]->value.shape());
        const std::int64_t NC = n.grad.numel();
        const double inv = 1.0 / static_cast<double>(HW);
        for (std::int64_t i = 0; i < NC; ++i) {
            double* q = gx.data() + i * HW;
            const double g = n.grad[i] * inv;
            for (std::int64_t j = 0; j < HW; ++j) q[j] = g;
        }
        n.parents[0]->accumulate_from(std::move(gx));
    });
}

Var avg_pool2x(const Var& x) {
    require_nchw(x, "avg_pool2x");
    const auto& s = x.value().shape();
    const std::int64_t N = s[0], C = s[1], H = s[2] / 2, W = s[3] / 2;
    if (H < 1 || W < 1) throw ShapeError("avg_pool2x: input too small " + x.value().shape_str());
    Tensor out({N, C, H, W});
    const Tensor& in = x.value();
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t w = 0; w < W; ++w)
                    out.at4(n, c, h, w) = 0.25 * (in.at4(n, c, 2 * h, 2 * w) + in.at4(n, c, 2 * h, 2 * w + 1) +
                                                  in.at4(n, c, 2 * h + 1, 2 * w) + in.at4(n, c, 2 * h + 1, 2 * w + 1));
    return make_op(std::move(out), {x}, [](Node& n) {
        Tensor gx(n.parents[0]->value.shape());
        const auto& os = n.grad.shape();
        for (std::int64_t b = 0; b < os[0]; ++b)
            for (std::int64_t c = 0; c < os[1]; ++c)
                for (std::int64_t h = 0; h < os[2]; ++h)
                    for (std::int64_t w = 0; w < os[3]; ++w) {
                        const double g = 0.25 * n.grad.at4(b, c, h, w);
                        gx.at4(b, c, 2 * h, 2 * w) += g;
                        gx.at4(b, c, 2 * h, 2 * w + 1) += g;
                        gx.at4(b, c, 2 * h + 1, 2 * w) += g;
                        gx.at4(b, c, 2 * h + 1, 2 * w + 1) += g;
                    }
        n.parents[0]->accumulate_from(std::move(gx));
    });
}

Var gram(const Var& features) {
    init_threading();
    require_nchw(features, "gram");
    const auto& s = features.value().shape();
    const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
    if (HW < 1) throw ShapeError("gram: empty spatial extent " + features.value().shape_str());
    const double norm = 1.0 / static_cast<double>(C * HW);
    Tensor out({N, C, C});
    for (std::int64_t n = 0; n < N; ++n) {
        CMapRM F(features.value().data() + n * C * HW, C, HW);
        MapRM G(out.data() + n * C * C, C, C);
        G.noalias() = F * F.transpose();
        G *= norm;
    }
    return make_op(std::move(out), {features}, [norm, C, HW](Node& n) {
        const std::int64_t N = n.grad.shape()[0];
        Tensor gx(n.parents[0]->value.shape());
        for (std::int64_t b = 0; b < N; ++b) {
            CMapRM F(n.parents[0]->value.data() + b * C * HW, C, HW);
            CMapRM gG(n.grad.data() + b * C * C, C, C);
            MapRM gF(gx.data() + b * C * HW, C, HW);
            gF.noalias() = (gG + gG.transpose()) * F;
            gF *= norm;
        }
        n.parents[0]->accumulate_from(std::move(gx));
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    init_threading();
    const auto& xs = x.value().shape();
    const auto& ws = weight.value().shape();
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
        throw ShapeError("linear: incompatible " + x.value().shape_str() + " vs " + weight.value().shape_str());
    const std::int64_t N = xs[0], D = xs[1], K = ws[0];
    Tensor out({N, K});
    CMapRM X(x.value().data(), N, D);
    CMapRM Wm(weight.value().data(), K, D);
    MapRM O(out.data(), N, K);
    O.noalias() = X * Wm.transpose();
    if (bias.defined())
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t k = 0; k < K; ++k) out[n * K + k] += bias.value()[k];
    std::vector<Var> inputs = bias.defined() ? std::vector<Var>{x, weight, bias} : std::vector<Var>{x, weight};
    return make_op(std::move(out), std::move(inputs), [N, D, K](Node& n) {
        Node& xn = *n.parents[0];
        Node& wn = *n.parents[1];
        Node* bn = n.parents.size() > 2 ? n.parents[2].get() : nullptr;
        CMapRM G(n.grad.data(), N, K);
        if (xn.requires_grad) {
            Tensor gx(xn.value.shape());
            CMapRM Wm(wn.value.data(), K, D);
            MapRM gX(gx.data(), N, D);
            gX.noalias() = G * Wm;
            xn.accumulate_from(std::move(gx));
        }
        if (wn.requires_grad) {
            Tensor gw(wn.value.shape());
            CMapRM X(xn.value.data(), N, D);
            MapRM gW(gw.data(), K, D);
            gW.noalias() = G.transpose() * X;
            wn.accumulate_from(std::move(gw));
        }
        if (bn && bn->requires_grad) {
            Tensor gb(bn->value.shape());
            for (std::int64_t i = 0; i < N; ++i)
                for (std::int64_t k = 0; k < K; ++k) gb[k] += n.grad[i * K + k];
            bn->accumulate_from(std::move(gb));
        }
    });
}

Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
    const auto& s = logits.value().shape();
    if (s.size() != 2) throw ShapeError("cross_entropy: logits must be NxK, got " + logits.value().shape_str());
    const std::int64_t N = s[0], K = s[1];
    if (static_cast<std::int64_t>(labels.size()) != N)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " + std::to_string(N));
    Tensor softmax({N, K});
    double loss = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
        const double* row = logits.value().data() + n * K;
        double mx = row[0];
        for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double z = 0.0;
        for (std::int64_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
        const double lz = std::log(z) + mx;
        loss += lz - row[labels[static_cast<std::size_t>(n)]];
        for (std::int64_t k = 0; k < K; ++k) softmax[n * K + k] = std::exp(row[k] - lz);
    }
    loss /= static_cast<double>(N);
    return make_op(Tensor::scalar(loss), {logits}, [softmax = std::move(softmax), labels, N, K](Node& n) {
        Tensor g({N, K});
        const double s = n.grad[0] / static_cast<double>(N);
        for (std::int64_t i = 0; i < N; ++i)
            for (std::int64_t k = 0; k < K; ++k)
                g[i * K + k] = s * (softmax[i * K + k] - (labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0));
        n.parents[0]->accumulate_from(std::move(g));
    });
}

}  // namespace mtgan
