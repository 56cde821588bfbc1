#include "onn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace onn {

std::size_t element_count(const Shape& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto extent : shape_)
        if (extent == 0) throw std::invalid_argument("tensor extents must be positive");
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto extent : shape_)
        if (extent == 0) throw std::invalid_argument("tensor extents must be positive");
    if (element_count(shape_) != data_.size())
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape");
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

PatchMatrix im2col(const Tensor& image, KernelShape kernel) {
    if (image.rank() != 2 || image.empty()) throw std::invalid_argument("im2col expects a non-empty 2-D image");
    if (kernel.rows == 0 || kernel.cols == 0 || kernel.rows % 2 == 0 || kernel.cols % 2 == 0)
        throw std::invalid_argument("im2col requires odd kernel extents");

    const std::size_t height = image.rows();
    const std::size_t width = image.cols();
    const auto pad_r = static_cast<std::ptrdiff_t>(kernel.rows / 2);
    const auto pad_c = static_cast<std::ptrdiff_t>(kernel.cols / 2);

    PatchMatrix out;
    out.source_rows = height;
    out.source_cols = width;
    out.values = Tensor::matrix(height * width, kernel.size());
    out.index_map.assign(height * width * kernel.size(), kPadIndex);

    std::size_t e = 0;
    for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            for (std::size_t u = 0; u < kernel.rows; ++u) {
                const auto r = static_cast<std::ptrdiff_t>(i + u) - pad_r;
                for (std::size_t v = 0; v < kernel.cols; ++v, ++e) {
                    const auto c = static_cast<std::ptrdiff_t>(j + v) - pad_c;
                    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(height) ||
                        c >= static_cast<std::ptrdiff_t>(width))
                        continue;
                    const auto src = static_cast<std::int64_t>(r) * static_cast<std::int64_t>(width) + c;
                    out.index_map[e] = src;
                    out.values[e] = image[static_cast<std::size_t>(src)];
                }
            }
        }
    }
    return out;
}

Tensor col2im_accumulate(const Tensor& grad, std::span<const std::int64_t> index_map, std::size_t rows,
                         std::size_t cols) {
    if (grad.size() != index_map.size()) throw std::invalid_argument("col2im: gradient and index map differ in size");
    if (rows == 0 || cols == 0) throw std::invalid_argument("col2im: empty target shape");
    Tensor out = Tensor::matrix(rows, cols);
    const auto limit = static_cast<std::int64_t>(rows * cols);
    for (std::size_t e = 0; e < index_map.size(); ++e) {
        const auto src = index_map[e];
        if (src == kPadIndex) continue;
        if (src < 0 || src >= limit) throw std::invalid_argument("col2im: index map entry out of range");
        out[static_cast<std::size_t>(src)] += grad[e];
    }
    return out;
}

namespace {

void check_kernel(KernelShape kernel) {
    if (kernel.rows == 0 || kernel.cols == 0 || kernel.rows % 2 == 0 || kernel.cols % 2 == 0)
        throw std::invalid_argument("im2col requires odd kernel extents");
}

// Valid output range [lo, hi) along one axis for a tap offset d.
std::pair<std::size_t, std::size_t> valid_range(std::size_t extent, std::ptrdiff_t d) {
    const auto n = static_cast<std::ptrdiff_t>(extent);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -d);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, n - d);
    if (hi <= lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

Tensor im2col_tap_major(const Tensor& image, KernelShape kernel) {
    if (image.rank() != 2 || image.empty()) throw std::invalid_argument("im2col expects a non-empty 2-D image");
    check_kernel(kernel);
    const std::size_t height = image.rows();
    const std::size_t width = image.cols();
    const std::size_t pixels = height * width;
    Tensor out = Tensor::matrix(kernel.size(), pixels);
    for (std::size_t u = 0; u < kernel.rows; ++u) {
        const auto dr = static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(kernel.rows / 2);
        const auto [r0, r1] = valid_range(height, dr);
        for (std::size_t v = 0; v < kernel.cols; ++v) {
            const auto dc = static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(kernel.cols / 2);
            const auto [c0, c1] = valid_range(width, dc);
            double* dst = out.data() + (u * kernel.cols + v) * pixels;
            for (std::size_t r = r0; r < r1; ++r) {
                const double* src = image.data() + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr) * width;
                for (std::size_t c = c0; c < c1; ++c)
                    dst[r * width + c] = src[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + dc)];
            }
        }
    }
    return out;
}

Tensor col2im_tap_major(const Tensor& grad, KernelShape kernel, std::size_t rows, std::size_t cols) {
    check_kernel(kernel);
    if (grad.rank() != 2 || grad.rows() != kernel.size() || grad.cols() != rows * cols)
        throw std::invalid_argument("col2im_tap_major: gradient shape mismatch");
    Tensor out = Tensor::matrix(rows, cols);
    for (std::size_t u = 0; u < kernel.rows; ++u) {
        const auto dr = static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(kernel.rows / 2);
        const auto [r0, r1] = valid_range(rows, dr);
        for (std::size_t v = 0; v < kernel.cols; ++v) {
            const auto dc = static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(kernel.cols / 2);
            const auto [c0, c1] = valid_range(cols, dc);
            const double* src = grad.data() + (u * kernel.cols + v) * rows * cols;
            for (std::size_t r = r0; r < r1; ++r) {
                double* dst = out.data() + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr) * cols;
                for (std::size_t c = c0; c < c1; ++c)
                    dst[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + dc)] += src[r * cols + c];
            }
        }
    }
    return out;
}

Tensor broadcast_weights(const Tensor& kernel, std::size_t rows) {
    if (rows == 0) throw std::invalid_argument("broadcast_weights: rows must be >= 1");
    if (kernel.empty()) throw std::invalid_argument("broadcast_weights: empty kernel");
    const std::size_t taps = kernel.size();
    Tensor out = Tensor::matrix(rows, taps);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < taps; ++j) out(i, j) = kernel[j];
    return out;
}

Tensor vec(const Tensor& t) {
    if (t.empty()) throw std::invalid_argument("vec: empty tensor");
    return Tensor({t.size()}, std::vector<double>(t.values().begin(), t.values().end()));
}

Tensor vec_inverse(const Tensor& v, const Shape& shape) {
    if (element_count(shape) != v.size())
        throw std::invalid_argument("vec_inverse: element count does not match target shape");
    return Tensor(shape, std::vector<double>(v.values().begin(), v.values().end()));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace onn
