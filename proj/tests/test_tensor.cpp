#include <catch2/catch_amalgamated.hpp>

#include "fxda/core/tensor.hpp"

using fxda::Tensor;

TEST_CASE("tensor construction and indexing") {
    Tensor t({2, 3});
    REQUIRE(t.size() == 6);
    REQUIRE(t.ndim() == 2);
    REQUIRE(t.dim(0) == 2);
    REQUIRE(t.dim(1) == 3);
    for (int64_t i = 0; i < t.size(); ++i) REQUIRE(t[i] == 0.0);
    t[4] = 2.5;
    REQUIRE(t[4] == 2.5);

    Tensor lit({2, 2}, {1.0, 2.0, 3.0, 4.0});
    REQUIRE(lit[3] == 4.0);
    REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0}), fxda::ContractError);
}

TEST_CASE("tensor copies share data, clone does not") {
    Tensor a = Tensor::full({4}, 1.0);
    Tensor b = a;
    b[0] = 9.0;
    REQUIRE(a[0] == 9.0);
    REQUIRE(a.shares_data(b));

    Tensor c = a.clone();
    REQUIRE_FALSE(c.shares_data(a));
    c[1] = -1.0;
    REQUIRE(a[1] == 1.0);
}

TEST_CASE("reshaped shares data and checks count") {
    Tensor a({2, 6});
    Tensor b = a.reshaped({3, 4});
    REQUIRE(b.shares_data(a));
    REQUIRE(b.dim(0) == 3);
    b[0] = 7.0;
    REQUIRE(a[0] == 7.0);
    REQUIRE_THROWS_AS(a.reshaped({5}), fxda::ContractError);
}

TEST_CASE("bitwise equality and finiteness") {
    Tensor a = Tensor::full({3}, 0.1);
    Tensor b = Tensor::full({3}, 0.1);
    REQUIRE(fxda::bitwise_equal(a, b));
    b[2] = 0.1 + 1e-18;
    REQUIRE(fxda::bitwise_equal(a, b));  // 0.1 + 1e-18 rounds back to 0.1
    b[2] = 0.2;
    REQUIRE_FALSE(fxda::bitwise_equal(a, b));

    REQUIRE(a.all_finite());
    a[1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_FALSE(a.all_finite());
    a[1] = std::numeric_limits<double>::infinity();
    REQUIRE_FALSE(a.all_finite());
}
