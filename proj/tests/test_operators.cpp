#include <doctest.h>

#include <cmath>
#include <random>

#include "onn/operators.hpp"

using namespace onn;

namespace {

// Closed forms written out independently of the library kernels.
double oracle(NodalKind k, double y, double w) {
    switch (k) {
        case NodalKind::Mul: return w * y;
        case NodalKind::Cubic: return w * y * y * y;
        case NodalKind::Sin: return std::sin(w * y);
        case NodalKind::Exp: return std::exp(std::clamp(w * y, -20.0, 20.0)) - 1.0;
        case NodalKind::Sinh: return std::sinh(std::clamp(w * y, -20.0, 20.0));
        case NodalKind::Sinc: return w * y == 0.0 ? 1.0 : std::sin(w * y) / (w * y);
        case NodalKind::Chirp: return std::sin(w * y * y);
        case NodalKind::SignedLog: return (y > 0 ? 1.0 : y < 0 ? -1.0 : 0.0) * w * std::log1p(std::fabs(y));
        default: return NAN;
    }
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

double rel(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6}); }

const NodalKind kAll[] = {NodalKind::Mul,  NodalKind::Cubic, NodalKind::Sin,   NodalKind::Exp,
                          NodalKind::Sinh, NodalKind::Sinc,  NodalKind::Chirp, NodalKind::SignedLog};

}  // namespace

TEST_CASE("nodal values match closed forms") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (NodalKind k : kAll) {
        const auto& op = nodal_op(k);
        for (int i = 0; i < 1000; ++i) {
            const double y = u(rng), w = u(rng);
            CHECK_MESSAGE(rel(op.eval(y, w), oracle(k, y, w)) < 1e-12, op.name);
            CHECK_MESSAGE(rel(op.partials(y, w).value, oracle(k, y, w)) < 1e-12, op.name);
        }
    }
}

TEST_CASE("nodal partials match central differences on 1000 points per op") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double h = 1e-6;
    for (NodalKind k : kAll) {
        const auto& op = nodal_op(k);
        for (int i = 0; i < 1000; ++i) {
            double y = u(rng), w = u(rng);
            if (k == NodalKind::SignedLog && std::fabs(y) < 1e-3) y = 0.5;  // kink at y = 0
            const auto p = op.partials(y, w);
            const double dy = (oracle(k, y + h, w) - oracle(k, y - h, w)) / (2 * h);
            const double dw = (oracle(k, y, w + h) - oracle(k, y, w - h)) / (2 * h);
            CHECK_MESSAGE(std::fabs(p.d_dy - dy) / std::max({std::fabs(p.d_dy), std::fabs(dy), 1.0}) <= 1e-6, op.name);
            CHECK_MESSAGE(std::fabs(p.d_dw - dw) / std::max({std::fabs(p.d_dw), std::fabs(dw), 1.0}) <= 1e-6, op.name);
        }
    }
}

TEST_CASE("nodal examples") {
    CHECK(nodal_op(NodalKind::Mul).eval(2, 3) == 6);
    CHECK(nodal_op(NodalKind::Sin).eval(0, 1.7) == 0);
    CHECK(nodal_op(NodalKind::Sinc).eval(0, 3) == 1);
    CHECK(nodal_op(NodalKind::Sinc).partials(0, 3).d_dw == 0);
    const auto c = nodal_op(NodalKind::Cubic).partials(1, 2);
    CHECK(c.d_dy == 6);
    CHECK(c.d_dw == 1);
    const auto m = nodal_op(NodalKind::Mul).partials(0.3, -1.5);
    CHECK(m.d_dy == -1.5);
    CHECK(m.d_dw == 0.3);
}

TEST_CASE("sinc is continuous across the series switch and finite at zero") {
    const auto& op = nodal_op(NodalKind::Sinc);
    for (double s : {0.0, 1e-12, 1e-8, 5e-5, 9.9e-5, 1e-4, 1.01e-4, 1e-3}) {
        const auto p = op.partials(s, 1.0);
        CHECK(std::isfinite(p.value));
        CHECK(std::isfinite(p.d_dy));
        CHECK(p.value == doctest::Approx(s == 0 ? 1.0 : std::sin(s) / s).epsilon(1e-14));
        // sinc'(s): Taylor form below 1e-2 avoids cancellation in the closed form.
        const double d = s < 1e-2 ? -s / 3.0 + s * s * s / 30.0 : (s * std::cos(s) - std::sin(s)) / (s * s);
        // d/dw sinc(w y) = y sinc'(w y); here y = s, w = 1.
        CHECK(p.d_dw == doctest::Approx(s * d).epsilon(1e-9));
        CHECK(p.d_dy == doctest::Approx(d).epsilon(1e-9));
    }
    const auto z = nodal_op(NodalKind::SignedLog).partials(0.0, 2.0);
    CHECK(std::isfinite(z.value));
    CHECK(std::isfinite(z.d_dy));
}

TEST_CASE("exp and sinh clamp their argument with zero derivative outside") {
    const auto e = nodal_op(NodalKind::Exp).partials(30.0, 1.0);
    CHECK(e.value == doctest::Approx(std::exp(20.0) - 1.0));
    CHECK(e.d_dy == 0);
    CHECK(e.d_dw == 0);
    const auto s = nodal_op(NodalKind::Sinh).partials(-5.0, 10.0);
    CHECK(s.value == doctest::Approx(std::sinh(-20.0)));
    CHECK(s.d_dw == 0);
}

TEST_CASE("pool examples") {
    const Tensor z({1, 3}, std::vector<double>{1, 5, 3});
    CHECK(pool_forward(PoolKind::Sum, z).values[0] == 9);
    const auto med = pool_forward(PoolKind::Median, z);
    CHECK(med.values[0] == 3);
    const double g[] = {2.0};
    const Tensor dmed = pool_backward(PoolKind::Median, z, med, g);
    CHECK(vals(dmed) == std::vector<double>{0, 0, 2});
    const auto mx = pool_forward(PoolKind::Max, z);
    const Tensor dmax = pool_backward(PoolKind::Max, z, mx, g);
    CHECK(vals(dmax) == std::vector<double>{0, 2, 0});
    const auto sum = pool_forward(PoolKind::Sum, z);
    CHECK(vals(pool_backward(PoolKind::Sum, z, sum, g)) == std::vector<double>{2, 2, 2});
}

TEST_CASE("median takes the lower middle and ties resolve to the lowest column") {
    const double even[] = {4, 1, 3, 2};
    // Sorted: 1 2 3 4, lower middle = 2 at column 3.
    CHECK(select_in_row(PoolKind::Median, even) == 3);
    const double tied[] = {2, 7, 2, 2, 9};
    CHECK(select_in_row(PoolKind::Median, tied) == 0);  // middle value 2, first at column 0
    CHECK(select_in_row(PoolKind::Max, std::span<const double>(tied)) == 4);
    const double maxtie[] = {1, 8, 8, 0};
    CHECK(select_in_row(PoolKind::Max, maxtie) == 1);
    const double mtie[] = {5, 5, 5};
    CHECK(select_in_row(PoolKind::Median, mtie) == 0);
}

TEST_CASE("median selection matches a sort-based oracle") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> v(0, 4);  // small range forces ties
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> row(1 + static_cast<std::size_t>(t % 9));
        for (double& x : row) x = v(rng);
        std::vector<std::size_t> idx(row.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
        const double target = row[idx[(row.size() - 1) / 2]];
        std::size_t expect = 0;
        while (row[expect] != target) ++expect;
        CHECK(select_in_row(PoolKind::Median, row) == expect);
        std::size_t amax = 0;
        for (std::size_t i = 1; i < row.size(); ++i)
            if (row[i] > row[amax]) amax = i;
        CHECK(select_in_row(PoolKind::Max, row) == amax);
    }
}

TEST_CASE("pool backward matches differences away from ties") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (PoolKind k : {PoolKind::Sum, PoolKind::Median, PoolKind::Max}) {
        Tensor z = Tensor::matrix(6, 9);
        for (double& x : z.values()) x = u(rng);
        std::vector<double> up(6);
        for (double& x : up) x = u(rng);
        const auto fwd = pool_forward(k, z);
        const Tensor g = pool_backward(k, z, fwd, up);
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            Tensor zp = z, zm = z;
            zp[i] += 1e-7;
            zm[i] -= 1e-7;
            const auto a = pool_forward(k, zp).values, b = pool_forward(k, zm).values;
            double num = 0.0;
            for (std::size_t r = 0; r < 6; ++r) num += up[r] * (a[r] - b[r]) / 2e-7;
            CHECK(g[i] == doctest::Approx(num).epsilon(1e-6));
            if (g[i] != 0.0) ++nonzero;
        }
        CHECK(nonzero == (k == PoolKind::Sum ? 54u : 6u));
    }
}

TEST_CASE("activations") {
    CHECK(activation_eval(ActivationKind::Tanh, 0) == 0);
    CHECK(activation_deriv(ActivationKind::Tanh, 0) == 1);
    CHECK(activation_eval(ActivationKind::LinCut, 2.5) == 1.0);
    CHECK(activation_deriv(ActivationKind::LinCut, 2.5) == 0.0);
    CHECK(activation_eval(ActivationKind::LinCut, -0.3) == -0.3);
    CHECK(activation_deriv(ActivationKind::LinCut, -0.3) == 1.0);
    CHECK(activation_eval(ActivationKind::Identity, 7.0) == 7.0);
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (ActivationKind k : {ActivationKind::Tanh, ActivationKind::LinCut, ActivationKind::Identity})
        for (int i = 0; i < 1000; ++i) {
            const double x = u(rng);
            if (k == ActivationKind::LinCut && std::fabs(std::fabs(x) - 1.0) < 1e-4) continue;
            const double num = (activation_eval(k, x + 1e-6) - activation_eval(k, x - 1e-6)) / 2e-6;
            CHECK(activation_deriv(k, x) == doctest::Approx(num).epsilon(1e-6));
        }
}

TEST_CASE("Mul-Sum over a patch matrix is a direct convolution") {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor img = Tensor::matrix(7, 7), k = Tensor::matrix(3, 3);
    for (double& x : img.values()) x = u(rng);
    for (double& x : k.values()) x = u(rng);
    const auto p = im2col(img, {3, 3});
    const auto z = nodal_forward(nodal_op(NodalKind::Mul), p.values, broadcast_weights(k, p.rows()));
    const auto x = pool_forward(PoolKind::Sum, z).values;
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) {
            double s = 0.0;
            for (int u2 = -1; u2 <= 1; ++u2)
                for (int v = -1; v <= 1; ++v) {
                    const int rr = r + u2, cc = c + v;
                    if (rr >= 0 && rr < 7 && cc >= 0 && cc < 7)
                        s += k(static_cast<std::size_t>(u2 + 1), static_cast<std::size_t>(v + 1)) *
                             img(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                }
            CHECK(rel(x[static_cast<std::size_t>(r * 7 + c)], s) <= 1e-12);
        }
}

TEST_CASE("nodal matrix ops reject shape mismatch") {
    const Tensor a = Tensor::matrix(2, 3), b = Tensor::matrix(3, 2);
    CHECK_THROWS(nodal_forward(nodal_op(NodalKind::Mul), a, b));
    CHECK_THROWS(nodal_backward(nodal_op(NodalKind::Mul), a, a, b));
}

TEST_CASE("operator names and library") {
    const auto lib = OperatorLibrary::default_library();
    CHECK(lib.size() == 72);
    for (const auto& s : lib.sets()) CHECK(parse_operator_set(s.name()) == s);
    CHECK(parse_operator_set("log-median-tanh").nodal.kind == NodalKind::SignedLog);
    CHECK_THROWS(parse_operator_set("foo-sum-tanh"));
    CHECK_THROWS(parse_operator_set("mul-sum"));
    CHECK(lexicographic_less(parse_operator_set("chirp-sum-tanh"), parse_operator_set("cubic-max-tanh")));
    CHECK_THROWS(OperatorLibrary({parse_operator_set("mul-sum-tanh"), parse_operator_set("mul-sum-tanh")}));
}
