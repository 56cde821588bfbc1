#include <doctest.h>

#include <random>

#include "onn/tensor.hpp"

using namespace onn;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = u(rng);
    return t;
}

// Zero-padded read, written out directly.
double padded(const Tensor& img, long r, long c) {
    if (r < 0 || c < 0 || r >= static_cast<long>(img.rows()) || c >= static_cast<long>(img.cols())) return 0.0;
    return img(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

}  // namespace

TEST_CASE("im2col rows are zero-padded windows centered on each pixel") {
    const Tensor img = random_matrix(4, 5, 1);
    for (KernelShape k : {KernelShape{3, 3}, KernelShape{1, 1}, KernelShape{3, 5}}) {
        const auto p = im2col(img, k);
        REQUIRE(p.rows() == 20);
        REQUIRE(p.cols() == k.size());
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 5; ++c)
                for (std::size_t u = 0; u < k.rows; ++u)
                    for (std::size_t v = 0; v < k.cols; ++v) {
                        const long rr = static_cast<long>(r + u) - static_cast<long>(k.rows / 2);
                        const long cc = static_cast<long>(c + v) - static_cast<long>(k.cols / 2);
                        const std::size_t col = u * k.cols + v;
                        CHECK(p.values(r * 5 + c, col) == padded(img, rr, cc));
                        const bool pad = padded(img, rr, cc) == 0.0 &&
                                         (rr < 0 || cc < 0 || rr >= 4 || cc >= 5);
                        CHECK((p.index_map[(r * 5 + c) * k.size() + col] == kPadIndex) == pad);
                    }
    }
}

TEST_CASE("1x1 kernel im2col is the flattened image") {
    const Tensor img = random_matrix(3, 3, 2);
    const auto p = im2col(img, {1, 1});
    for (std::size_t i = 0; i < 9; ++i) CHECK(p.values(i, 0) == img[i]);
}

TEST_CASE("col2im_accumulate is the adjoint of im2col") {
    const Tensor img = random_matrix(6, 7, 3);
    const auto p = im2col(img, {3, 3});
    const Tensor g = random_matrix(p.rows(), p.cols(), 4);
    const Tensor back = col2im_accumulate(g, p.index_map, 6, 7);
    CHECK(dot(p.values.values(), g.values()) == doctest::Approx(dot(img.values(), back.values())).epsilon(1e-14));
}

TEST_CASE("tap-major patches are the transpose of im2col") {
    for (KernelShape k : {KernelShape{3, 3}, KernelShape{5, 3}, KernelShape{1, 1}}) {
        const Tensor img = random_matrix(5, 8, 5);
        const auto p = im2col(img, k);
        const Tensor t = im2col_tap_major(img, k);
        REQUIRE(t.rows() == k.size());
        REQUIRE(t.cols() == 40);
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t j = 0; j < k.size(); ++j) CHECK(t(j, i) == p.values(i, j));
    }
}

TEST_CASE("col2im_tap_major is the adjoint of im2col_tap_major") {
    const Tensor img = random_matrix(7, 4, 6);
    const KernelShape k{3, 3};
    const Tensor t = im2col_tap_major(img, k);
    const Tensor g = random_matrix(t.rows(), t.cols(), 7);
    const Tensor back = col2im_tap_major(g, k, 7, 4);
    CHECK(dot(t.values(), g.values()) == doctest::Approx(dot(img.values(), back.values())).epsilon(1e-14));
}

TEST_CASE("im2col rejects even kernels") {
    const Tensor img = random_matrix(4, 4, 8);
    CHECK_THROWS(im2col(img, {2, 3}));
    CHECK_THROWS(im2col_tap_major(img, {3, 2}));
}

TEST_CASE("vec and vec_inverse round trip") {
    const Tensor img = random_matrix(3, 4, 9);
    const Tensor v = vec(img);
    CHECK(v.size() == 12);
    CHECK(vec_inverse(v, img.shape()) == img);
}

TEST_CASE("broadcast_weights repeats the kernel per row") {
    const Tensor k({3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor b = broadcast_weights(k, 4);
    REQUIRE(b.rows() == 4);
    REQUIRE(b.cols() == 9);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 9; ++c) CHECK(b(r, c) == static_cast<double>(c + 1));
}
