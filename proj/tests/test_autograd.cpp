#include <doctest.h>

#include <cmath>

#include "mtgan/autograd.hpp"
#include "testutil.hpp"

using namespace mtgan;
using mtgan::testutil::central_difference;
using mtgan::testutil::rel_err;

namespace {

// Checks autodiff against central finite differences on `count` entries of
// every input, for an arbitrary graph builder. The finite-difference side
// only ever calls the forward pass.
void grad_check(const std::vector<Var>& inputs, const std::function<Var()>& build, int count = 4,
                double rtol = 1e-5, double h = 1e-5) {
    Var out = build();
    REQUIRE(out.value().numel() == 1);
    out.backward();
    auto eval = [&] {
        NoGradGuard ng;
        return build().value()[0];
    };
    Rng pick(1234);
    for (const auto& in : inputs) {
        REQUIRE(in.has_grad());
        const Tensor& g = in.grad();
        std::uniform_int_distribution<std::int64_t> di(0, in.value().numel() - 1);
        for (int k = 0; k < count; ++k) {
            const std::int64_t i = di(pick);
            double* slot = const_cast<double*>(in.value().data()) + i;
            const double fd = central_difference(eval, slot, h);
            CAPTURE(i);
            CAPTURE(fd);
            CAPTURE(g[i]);
            CHECK(mtgan::testutil::grad_close(fd, g[i], rtol));
        }
    }
}

Var leaf(std::vector<std::int64_t> shape, Rng& rng, double std = 1.0) {
    return Var(Tensor::randn(std::move(shape), rng, std), true);
}

}  // namespace

TEST_CASE("grad: elementwise chain") {
    Rng rng(7);
    Var a = leaf({3, 2}, rng);
    Var b = leaf({3, 2}, rng);
    grad_check({a, b}, [&] { return mean_all(mul(tanh_op(a), add(square(b), scale(a, 0.5)))); });
}

TEST_CASE("grad: relu leaky_relu abs") {
    Rng rng(8);
    Var a = leaf({4, 4}, rng);
    // keep sampled entries away from the kink
    for (std::int64_t i = 0; i < a.value().numel(); ++i)
        if (std::abs(a.value()[i]) < 0.05) a.mutable_value()[i] = 0.2;
    grad_check({a}, [&] { return sum_all(relu(a)); });
    a.zero_grad();
    grad_check({a}, [&] { return sum_all(leaky_relu(a, 0.2)); });
    a.zero_grad();
    grad_check({a}, [&] { return mean_all(abs_op(a)); });
}

TEST_CASE("grad: conv2d w.r.t. input, weight and bias") {
    Rng rng(9);
    Var x = leaf({2, 3, 8, 8}, rng);
    Var w = leaf({4, 3, 3, 3}, rng, 0.3);
    Var b = leaf({4}, rng, 0.3);
    grad_check({x, w, b}, [&] { return mean_all(square(conv2d(x, w, b, 1))); }, 6);
}

TEST_CASE("grad: strided conv2d") {
    Rng rng(10);
    Var x = leaf({1, 2, 9, 9}, rng);
    Var w = leaf({3, 2, 4, 4}, rng, 0.3);
    Var b = leaf({3}, rng, 0.3);
    grad_check({x, w, b}, [&] { return mean_all(square(conv2d(x, w, b, 2))); }, 6);
}

TEST_CASE("grad: pad2d reflect and zero") {
    Rng rng(11);
    Var x = leaf({1, 2, 5, 5}, rng);
    grad_check({x}, [&] { return mean_all(square(pad2d(x, 2, 1, 2, 1, PadMode::reflect))); });
    x.zero_grad();
    grad_check({x}, [&] { return mean_all(square(pad2d(x, 1, 2, 1, 2, PadMode::zero))); });
}

TEST_CASE("grad: instance_norm") {
    Rng rng(12);
    Var x = leaf({2, 3, 4, 4}, rng);
    Var gamma(Tensor::full({3}, 1.3), true);
    Var beta(Tensor::full({3}, -0.2), true);
    Var target(Tensor::randn({2, 3, 4, 4}, rng));
    grad_check({x, gamma, beta}, [&] { return mse(instance_norm(x, gamma, beta), target); }, 6);
}

TEST_CASE("grad: upsample nearest and bilinear") {
    Rng rng(13);
    Var x = leaf({1, 2, 4, 4}, rng);
    grad_check({x}, [&] { return mean_all(square(upsample2x(x, UpsampleMode::nearest))); });
    x.zero_grad();
    grad_check({x}, [&] { return mean_all(square(upsample2x(x, UpsampleMode::bilinear))); });
}

TEST_CASE("grad: concat, pools, gram") {
    Rng rng(14);
    Var a = leaf({1, 2, 4, 4}, rng);
    Var b = leaf({1, 3, 4, 4}, rng);
    grad_check({a, b}, [&] { return mean_all(square(concat_channels(a, b))); });
    a.zero_grad();
    grad_check({a}, [&] { return mean_all(square(avg_pool2x(a))); });
    a.zero_grad();
    grad_check({a}, [&] { return sum_all(square(global_avg_pool(a))); });
    a.zero_grad();
    grad_check({a}, [&] { return mean_all(square(gram(a))); });
}

TEST_CASE("grad: linear and cross_entropy") {
    Rng rng(15);
    Var x = leaf({3, 5}, rng);
    Var w = leaf({4, 5}, rng, 0.5);
    Var b = leaf({4}, rng, 0.5);
    std::vector<int> labels{0, 2, 3};
    grad_check({x, w, b}, [&] { return cross_entropy(linear(x, w, b), labels); }, 6);
}

TEST_CASE("grad accumulates across reuse of an input") {
    Rng rng(16);
    Var a = leaf({4}, rng);
    grad_check({a}, [&] { return mean_all(mul(a, a)); });
}

TEST_CASE("no-grad mode builds no tape") {
    Rng rng(17);
    Var a = leaf({4}, rng);
    NoGradGuard ng;
    Var out = mean_all(square(a));
    CHECK_FALSE(out.requires_grad());
    CHECK_THROWS_AS(out.backward(), PreconditionError);
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(18);
    Var a = leaf({4}, rng);
    Var out = mean_all(square(a.detach()));
    CHECK_FALSE(out.requires_grad());
}

TEST_CASE("backward requires scalar") {
    Rng rng(19);
    Var a = leaf({4}, rng);
    Var out = square(a);
    CHECK_THROWS_AS(out.backward(), ShapeError);
}

TEST_CASE("conv2d shape errors name shapes") {
    Rng rng(20);
    Var x = leaf({1, 3, 4, 4}, rng);
    Var w = leaf({2, 4, 3, 3}, rng);
    Var b = leaf({2}, rng);
    CHECK_THROWS_AS(conv2d(x, w, b, 1), ShapeError);
    Var w2 = leaf({2, 3, 5, 5}, rng);
    Var b2 = leaf({2}, rng);
    CHECK_THROWS_AS(conv2d(x, w2, b2, 1), ShapeError);
}
