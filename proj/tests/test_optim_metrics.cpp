#include "tradegraph/metrics.hpp"
#include "tradegraph/optimizer.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace tradegraph;

namespace {

ModelParams tiny(double a, double b) {
    ModelParams p;
    p.proj = (Matrix(1, 2) << a, b).finished();
    p.sem_w = Matrix::Zero(0, 0);
    return p;
}

} // namespace

TEST_SUITE("optimizer") {

TEST_CASE("zero gradient and no decay leaves parameters alone") {
    ModelParams p = tiny(0.5, -2.0);
    const ModelParams before = p;
    OptimizerState opt = OptimizerState::for_params(p);
    for (int i = 0; i < 5; ++i) optimizer_step(p, ModelParams::zeros_like(p), opt, 0.05, 0.0);
    CHECK(p == before);
    CHECK(opt.step == 5);
}

TEST_CASE("decoupled decay shrinks by lr * wd") {
    ModelParams p = tiny(0.8, -3.0);
    OptimizerState opt = OptimizerState::for_params(p);
    optimizer_step(p, ModelParams::zeros_like(p), opt, 0.05, 0.001);
    CHECK(p.proj(0, 0) == 0.8 * (1.0 - 5e-5));
    CHECK(p.proj(0, 1) == -3.0 * (1.0 - 5e-5));
}

TEST_CASE("constant gradient steps approach the learning rate") {
    ModelParams p = tiny(0.0, 0.0);
    ModelParams g = tiny(0.3, -7.0);
    OptimizerState opt = OptimizerState::for_params(p);
    const double lr = 0.01;
    double last0 = 0.0, last1 = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const double a = p.proj(0, 0), b = p.proj(0, 1);
        optimizer_step(p, g, opt, lr, 0.0);
        last0 = a - p.proj(0, 0);
        last1 = b - p.proj(0, 1);
    }
    // With bias correction, m_hat = g and v_hat = g^2 exactly for a constant g.
    CHECK(last0 == doctest::Approx(lr * 0.3 / (0.3 + 1e-8)).epsilon(1e-9));
    CHECK(last1 == doctest::Approx(-lr * 7.0 / (7.0 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("non-finite updates name the tensor") {
    ModelParams p = tiny(1.0, 1.0);
    ModelParams g = tiny(std::nan(""), 0.0);
    OptimizerState opt = OptimizerState::for_params(p);
    try {
        optimizer_step(p, g, opt, 0.05, 0.0);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(e.parameter() == "proj");
    }
    ModelParams other;
    other.proj = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(optimizer_step(p, other, opt, 0.05, 0.0), DimensionError);
}

} // TEST_SUITE

TEST_SUITE("metrics") {

TEST_CASE("AUC basics") {
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y) == 0.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y) == 0.5);
    CHECK_THROWS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}));
}

TEST_CASE("AUC equals pair counting") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n = seed < 50 ? 30 : 2 + rng() % 199;
        std::vector<double> s(n);
        std::vector<int> y(n);
        std::uniform_int_distribution<int> coarse(0, 9);
        std::uniform_real_distribution<double> fine(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = seed % 2 ? coarse(rng) / 10.0 : fine(rng);
            y[i] = fine(rng) < 0.3;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(std::abs(roc_auc(s, y) - support::pairwise_auc(s, y)) <= 1e-12);
    }
}

TEST_CASE("threshold and ranking invariances") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.001, 0.999);
    std::vector<double> s(150);
    std::vector<int> y(150);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = unit(rng);
        y[i] = unit(rng) < 0.2 + 0.6 * s[i];
    }
    const Evaluation base = evaluate(s, y);
    REQUIRE(base.auc);

    std::vector<double> cubed(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) cubed[i] = std::pow(s[i], 3.0) - 4.0;
    CHECK(roc_auc(cubed, y) == *base.auc);

    // Scaling the logit keeps the 0.5 level set and every side of it.
    for (double k : {0.5, 2.0, 7.0}) {
        std::vector<double> t(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double logit = std::log(s[i] / (1.0 - s[i]));
            t[i] = 1.0 / (1.0 + std::exp(-k * logit));
        }
        const Evaluation e = evaluate(t, y);
        CHECK(e.recall == base.recall);
        CHECK(e.f1 == base.f1);
        CHECK(*e.auc == *base.auc);
    }
}

TEST_CASE("recall, precision and F1") {
    const std::vector<double> s{0.9, 0.6, 0.4, 0.2, 0.7};
    const std::vector<int> y{1, 1, 1, 0, 0};
    const Evaluation e = evaluate(s, y);
    CHECK(e.recall == doctest::Approx(2.0 / 3.0));
    CHECK(e.precision == doctest::Approx(2.0 / 3.0));
    CHECK(e.f1 == doctest::Approx(2.0 / 3.0));

    const Evaluation none = evaluate(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 0});
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    const Evaluation single = evaluate(std::vector<double>{0.9, 0.2}, std::vector<int>{1, 1});
    CHECK_FALSE(single.auc);
    CHECK(single.recall == 0.5);
    CHECK_THROWS(evaluate(std::vector<double>{}, std::vector<int>{}));
}

} // TEST_SUITE
