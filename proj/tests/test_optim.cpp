#include <doctest.h>

#include <cmath>
#include <random>

#include "onn/optim.hpp"

using namespace onn;

namespace {

// Scalar recursions written out from the update formulas.
struct ScalarAdam {
    double m = 0, v = 0, mu = 0;
    int t = 0;
    double step(double p, double g, bool centered, double lr = 1e-3, double b1 = 0.9, double b2 = 0.999,
                double eps = 1e-8) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        if (centered) {
            mu = b2 * mu + (1 - b2) * g;
            v = b2 * v + (1 - b2) * (g - mu) * (g - mu);
        } else {
            v = b2 * v + (1 - b2) * g * g;
        }
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        return p - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

std::vector<double> gradient_sequence(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.3, 1.0);
    std::vector<double> out(n);
    for (double& x : out) x = g(rng);
    return out;
}

}  // namespace

TEST_CASE("sgd") {
    std::vector<double> p{1.0};
    const std::vector<double> g{0.5};
    sgd_step(p, g, 0.1);
    CHECK(p[0] == doctest::Approx(0.95));
    const std::vector<double> zero{0.0};
    sgd_step(p, zero, 0.1);
    CHECK(p[0] == doctest::Approx(0.95));
    std::vector<double> two(2);
    CHECK_THROWS(sgd_step(two, g, 0.1));

    // Quadratic 0.5 (x - 3)^2 converges to 3.
    std::vector<double> x{0.0};
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> grad{x[0] - 3.0};
        sgd_step(x, grad, 0.1);
    }
    CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("adam first step and 100-step scalar trace") {
    OptimizerConfig cfg;
    auto state = AdamState::create(3, cfg);
    std::vector<double> p{0.0, 1.0, -2.0};
    const std::vector<double> ones(3, 1.0);
    adam_step(state, p, ones);
    CHECK(p[0] == doctest::Approx(-1e-3 / (1 + 1e-8)).epsilon(1e-12));

    const auto gs = gradient_sequence(100, 31);
    auto s = AdamState::create(1, cfg);
    std::vector<double> q{0.7};
    ScalarAdam ref;
    double expect = 0.7;
    for (double g : gs) {
        const std::vector<double> gv{g};
        adam_step(s, q, gv);
        expect = ref.step(expect, g, false);
        CHECK(std::fabs(q[0] - expect) <= 1e-12 * std::max(1.0, std::fabs(expect)));
    }
    CHECK(s.t == 100);
}

TEST_CASE("variance adam matches its scalar recursion") {
    const auto gs = gradient_sequence(100, 32);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::VarianceAdam;
    cfg.lr = 2e-3;
    auto s = AdamState::create(1, cfg);
    std::vector<double> q{-0.4};
    ScalarAdam ref;
    double expect = -0.4;
    for (double g : gs) {
        const std::vector<double> gv{g};
        variance_adam_step(s, q, gv);
        expect = ref.step(expect, g, true, 2e-3);
        CHECK(std::fabs(q[0] - expect) <= 1e-12 * std::max(1.0, std::fabs(expect)));
    }
}

TEST_CASE("variance adam steps exceed adam under a constant gradient") {
    OptimizerConfig cfg, vcfg;
    vcfg.kind = OptimizerKind::VarianceAdam;
    auto a = AdamState::create(1, cfg);
    auto v = AdamState::create(1, vcfg);
    std::vector<double> pa{0.0}, pv{0.0};
    const std::vector<double> g{0.5};
    double da = 0, dv = 0;
    for (int i = 0; i < 50; ++i) {
        const double a0 = pa[0], v0 = pv[0];
        adam_step(a, pa, g);
        variance_adam_step(v, pv, g);
        da = std::fabs(pa[0] - a0);
        dv = std::fabs(pv[0] - v0);
    }
    CHECK(dv >= da);
    CHECK(std::isfinite(pv[0]));
}

TEST_CASE("zero gradients leave parameters fixed") {
    for (OptimizerKind k : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::VarianceAdam}) {
        OptimizerConfig cfg;
        cfg.kind = k;
        Optimizer opt(cfg, 4);
        std::vector<double> p{1, -2, 3, 0.5};
        const auto before = p;
        const std::vector<double> zero(4, 0.0);
        for (int i = 0; i < 100; ++i) opt.step(p, zero);
        CHECK(p == before);
    }
}

TEST_CASE("alternating gradients stay bounded for 10^4 steps") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::VarianceAdam;
    auto s = AdamState::create(1, cfg);
    std::vector<double> p{0.0};
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const std::vector<double> g{i % 2 == 0 ? 1.0 : -1.0};
        const double before = p[0];
        variance_adam_step(s, p, g);
        REQUIRE(std::isfinite(p[0]));
        worst = std::max(worst, std::fabs(p[0] - before));
    }
    CHECK(worst < 0.1);
}

TEST_CASE("uninitialized state and mismatched sizes are rejected") {
    AdamState empty;
    std::vector<double> p{1.0};
    const std::vector<double> g{1.0};
    CHECK_THROWS(adam_step(empty, p, g));
    CHECK_THROWS(variance_adam_step(empty, p, g));
    auto s = AdamState::create(2, OptimizerConfig{});
    CHECK_THROWS(adam_step(s, p, g));
}

TEST_CASE("optimizer names") {
    for (OptimizerKind k : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::VarianceAdam})
        CHECK(parse_optimizer(to_string(k)) == k);
    CHECK_THROWS(parse_optimizer("rmsprop"));
}
