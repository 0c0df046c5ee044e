#include <doctest.h>

#include "mtgan/tensor.hpp"

using namespace mtgan;

TEST_CASE("tensor shape and fill") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.shape_str() == "[2x3x4x5]");
    t.fill(2.5);
    CHECK(t.sum() == doctest::Approx(300.0));
    t.at4(1, 2, 3, 4) = -1.0;
    CHECK(t[t.numel() - 1] == -1.0);
}

TEST_CASE("tensor shape mismatch throws") {
    Tensor a({2, 2}), b({4});
    CHECK_THROWS_AS(a.add_(b), ShapeError);
    CHECK_THROWS_AS(a.reshaped({3}), ShapeError);
    CHECK_NOTHROW(a.reshaped({4}));
}

TEST_CASE("randn determinism per seed") {
    Rng r1 = make_rng(42, "x");
    Rng r2 = make_rng(42, "x");
    Tensor a = Tensor::randn({16}, r1);
    Tensor b = Tensor::randn({16}, r2);
    CHECK(a.raw() == b.raw());
    Rng r3 = make_rng(43, "x");
    Tensor c = Tensor::randn({16}, r3);
    CHECK(a.raw() != c.raw());
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mix_seed(1, "a") != mix_seed(1, "b"));
    CHECK(mix_seed(1, "a") != mix_seed(2, "a"));
    CHECK(mix_seed(1, "a", 0) != mix_seed(1, "a", 1));
}

TEST_CASE("finiteness check") {
    Tensor t({4});
    CHECK(t.all_finite());
    t[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}
