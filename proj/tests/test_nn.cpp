#include <doctest.h>

#include <cmath>

#include "mtgan/nn.hpp"
#include "mtgan/serialize.hpp"
#include "testutil.hpp"

using namespace mtgan;

TEST_CASE("conv module output shape with padding") {
    Rng rng(1);
    nn::Conv2d conv(3, 8, 3, 1, 1, PadMode::reflect, rng);
    Var x(Tensor::randn({2, 3, 16, 16}, rng));
    Var y = conv(x);
    CHECK(y.value().shape() == std::vector<std::int64_t>{2, 8, 16, 16});
}

TEST_CASE("residual block keeps shape and adds skip") {
    Rng rng(2);
    nn::ResidualBlock block(4, rng);
    Var x(Tensor::randn({1, 4, 8, 8}, rng));
    Var y = block(x);
    CHECK(y.value().shape() == x.value().shape());
}

TEST_CASE("adam minimizes a quadratic") {
    Var w(Tensor::full({4}, 5.0), true, "w");
    nn::Adam opt({{"w", w}}, 0.9, 0.999);
    for (int i = 0; i < 400; ++i) {
        opt.zero_grad();
        Var loss = mean_all(square(w));
        loss.backward();
        opt.step(0.05);
    }
    CHECK(w.value().abs_max() < 1e-2);
}

TEST_CASE("adam state round trip is exact") {
    Rng rng(3);
    auto run = [&](bool reload) {
        Var w(Tensor::full({3}, 2.0), true, "w");
        nn::Adam opt({{"w", w}}, 0.5, 0.999);
        auto step = [&] {
            opt.zero_grad();
            Var loss = mean_all(square(add_scalar(w, -1.0)));
            loss.backward();
            opt.step(0.01);
        };
        for (int i = 0; i < 5; ++i) step();
        if (reload) {
            auto st = opt.state();
            auto ts = opt.step_count();
            nn::Adam opt2({{"w", w}}, 0.5, 0.999);
            opt2.load_state(st, ts);
            for (int i = 0; i < 5; ++i) {
                opt2.zero_grad();
                Var loss = mean_all(square(add_scalar(w, -1.0)));
                loss.backward();
                opt2.step(0.01);
            }
        } else {
            for (int i = 0; i < 5; ++i) step();
        }
        return w.value().raw();
    };
    CHECK(run(false) == run(true));
}

TEST_CASE("param map round trip preserves bytes") {
    Rng rng(4);
    nn::Conv2d conv(2, 3, 3, 1, 0, PadMode::zero, rng);
    nn::ParamList params;
    conv.collect("conv", params);
    auto map = nn::to_param_map(params);
    auto bytes = encode_tensor_container(map);
    auto decoded = decode_tensor_container(bytes, "test");
    nn::Conv2d conv2(2, 3, 3, 1, 0, PadMode::zero, rng);
    nn::ParamList params2;
    conv2.collect("conv", params2);
    nn::load_param_map(params2, decoded);
    CHECK(conv.weight.value().raw() == conv2.weight.value().raw());
    CHECK(nn::params_checksum(params) == nn::params_checksum(params2));
}

TEST_CASE("load_param_map rejects mismatches") {
    Rng rng(5);
    nn::Conv2d conv(2, 3, 3, 1, 0, PadMode::zero, rng);
    nn::ParamList params;
    conv.collect("conv", params);
    auto map = nn::to_param_map(params);
    map.erase("conv.bias");
    CHECK_THROWS_AS(nn::load_param_map(params, map), IntegrityError);
}

TEST_CASE("container rejects corruption") {
    Rng rng(6);
    nn::Conv2d conv(2, 2, 3, 1, 0, PadMode::zero, rng);
    nn::ParamList params;
    conv.collect("conv", params);
    auto bytes = encode_tensor_container(nn::to_param_map(params));
    auto bad = bytes.substr(0, bytes.size() - 8);
    CHECK_THROWS_AS(decode_tensor_container(bad, "test"), IntegrityError);
    bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_tensor_container(bad, "test"), IntegrityError);
}
