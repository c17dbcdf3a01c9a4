#include <catch2/catch_amalgamated.hpp>

#include "fxda/core/ops.hpp"
#include "fxda/core/tape.hpp"

using namespace fxda;

TEST_CASE("param gradients accumulate in place") {
    Param p("p", {3});
    p.value = Tensor({3}, {1.0, 2.0, 3.0});
    Tape t;
    NodeId x = t.param(p);
    NodeId loss = ops::mean_all(t, ops::mul(t, x, x));
    t.backward(loss);
    // d/dx mean(x^2) = 2x/3
    REQUIRE(p.grad[0] == Catch::Approx(2.0 / 3.0));
    REQUIRE(p.grad[1] == Catch::Approx(4.0 / 3.0));
    REQUIRE(p.grad[2] == Catch::Approx(2.0));
}

TEST_CASE("wrapping the same param twice accumulates both paths") {
    Param p("p", {1});
    p.value[0] = 5.0;
    Tape t;
    NodeId a = t.param(p);
    NodeId b = t.param(p);
    NodeId loss = ops::mean_all(t, ops::mul(t, a, b));  // x*x through two wraps
    t.backward(loss);
    REQUIRE(p.grad[0] == Catch::Approx(10.0));
}

TEST_CASE("gradients from consecutive backwards accumulate until zeroed") {
    Param p("p", {1});
    p.value[0] = 2.0;
    {
        Tape t;
        NodeId loss = ops::mean_all(t, t.param(p));
        t.backward(loss);
    }
    REQUIRE(p.grad[0] == Catch::Approx(1.0));
    {
        Tape t;
        NodeId loss = ops::mean_all(t, t.param(p));
        t.backward(loss);
    }
    REQUIRE(p.grad[0] == Catch::Approx(2.0));
    p.zero_grad();
    REQUIRE(p.grad[0] == 0.0);
}

TEST_CASE("dead branches never receive gradient buffers") {
    Param p("p", {2});
    p.value = Tensor({2}, {1.0, 2.0});
    Tape t;
    NodeId x = t.param(p);
    NodeId used = ops::mean_all(t, x);
    NodeId unused = ops::mul(t, x, x);
    t.backward(used);
    REQUIRE_FALSE(t.grad_live(unused));
    REQUIRE(p.grad[0] == Catch::Approx(0.5));
}

TEST_CASE("detach blocks gradient flow") {
    Param p("p", {2});
    p.value = Tensor({2}, {3.0, 4.0});
    Tape t;
    NodeId x = t.param(p);
    NodeId d = ops::detach(t, x);
    NodeId loss = ops::mean_all(t, ops::mul(t, d, d));
    t.backward(loss);
    REQUIRE(p.grad[0] == 0.0);
    REQUIRE(p.grad[1] == 0.0);
    REQUIRE(t.val(d).shares_data(t.val(x)));
}

TEST_CASE("scalar() rejects non-scalar nodes") {
    Tape t;
    NodeId v = t.leaf(Tensor({3}));
    REQUIRE_THROWS_AS(t.scalar(v), ContractError);
}

TEST_CASE("backward seeds the root with 1 and sweeps in reverse order") {
    Param a("a", {1}), b("b", {1});
    a.value[0] = 2.0;
    b.value[0] = 3.0;
    Tape t;
    NodeId na = t.param(a), nb = t.param(b);
    NodeId prod = ops::mul(t, na, nb);
    NodeId total = ops::add(t, prod, na);  // a*b + a
    t.backward(ops::mean_all(t, total));
    REQUIRE(a.grad[0] == Catch::Approx(4.0));  // b + 1
    REQUIRE(b.grad[0] == Catch::Approx(2.0));  // a
}
