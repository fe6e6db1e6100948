#include <doctest.h>

#include "irvf/optim.hpp"
#include "irvf/params.hpp"

using namespace irvf;

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(cosine_lr(0, 1000, 2e-4, 2e-6) == doctest::Approx(2e-4).epsilon(1e-15));
    CHECK(cosine_lr(1000, 1000, 2e-4, 2e-6) == doctest::Approx(2e-6).epsilon(1e-12));
    CHECK(cosine_lr(500, 1000, 2e-4, 2e-6) == doctest::Approx(1.01e-4).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(-1, 100, 2e-4, 2e-6), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(101, 100, 2e-4, 2e-6), std::invalid_argument);
}

TEST_CASE("adamw: zero gradient with zero decay leaves parameters unchanged") {
    ParamStore<double> ps;
    ps.add("w", TensorD({2, 2, 1}, 1.5));
    AdamW<double> opt(0.9, 0.999, 1e-8, 0.0);
    opt.attach(ps);
    opt.step(ps, {TensorD({2, 2, 1}, 0.0)}, 0.1);
    for (std::size_t i = 0; i < ps.tensor(0).size(); ++i) CHECK(ps.tensor(0)[i] == 1.5);
}

TEST_CASE("adamw: single step on x^2 matches the hand-computed update") {
    ParamStore<double> ps;
    ps.add("x", TensorD({1, 1, 1}, 1.0));
    AdamW<double> opt(0.9, 0.999, 1e-8, 0.0);
    opt.attach(ps);
    // f(x) = x^2, gradient at x=1 is 2
    opt.step(ps, {TensorD({1, 1, 1}, 2.0)}, 0.1);
    // m_hat = 2, v_hat = 4, update = lr * m_hat / (sqrt(v_hat) + eps)
    const double expect = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8));
    CHECK(ps.tensor(0)[0] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(ps.tensor(0)[0] < 1.0);
}

TEST_CASE("adamw: pure decoupled weight decay") {
    ParamStore<double> ps;
    ps.add("x", TensorD({1, 1, 1}, 2.0));
    AdamW<double> opt(0.9, 0.999, 1e-8, 0.01);
    opt.attach(ps);
    opt.step(ps, {TensorD({1, 1, 1}, 0.0)}, 0.5);
    CHECK(ps.tensor(0)[0] == doctest::Approx(2.0 * (1.0 - 0.5 * 0.01)).epsilon(1e-15));
}

TEST_CASE("adamw rejects mismatched gradients") {
    ParamStore<double> ps;
    ps.add("w", TensorD({2, 2, 1}, 1.0));
    AdamW<double> opt;
    opt.attach(ps);
    CHECK_THROWS_AS(opt.step(ps, {}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(opt.step(ps, {TensorD({1, 2, 1}, 0.0)}, 0.1), std::invalid_argument);
}

TEST_CASE("adamw moments track the gradient history") {
    ParamStore<double> ps;
    ps.add("x", TensorD({1, 1, 1}, 0.0));
    AdamW<double> opt(0.9, 0.999, 1e-8, 0.0);
    opt.attach(ps);
    opt.step(ps, {TensorD({1, 1, 1}, 1.0)}, 0.0);  // lr 0: only moments move
    CHECK(opt.first_moments()[0][0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(opt.second_moments()[0][0] == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(opt.steps_taken() == 1);
}
